#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lpe/embeddings.hpp"
#include "lpe/metrics.hpp"
#include "lpe/models.hpp"

using Catch::Approx;
using namespace lpe;

namespace {

ParamVector theta2(double mu, double sigma) {
  ParamVector t(2);
  t << mu, sigma;
  return t;
}

// O(G^2) oracle for the ratio distortion: max over all pairs of the error in
// log-likelihood differences. Independent of the range identity in the
// implementation.
double brute_force_delta(const ModelFamily& family, const Dataset& data,
                         const Encoder& encoder, const Decoder& decoder,
                         const ThetaGrid& grid) {
  const DatasetEmbedding S = embed(encoder, data);
  std::vector<double> ll(grid.size()), sll(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ll[i] = log_likelihood(family, data, grid.points[i]);
    sll[i] = surrogate_log_likelihood(decoder, grid.points[i], S);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j)
      worst = std::max(worst, std::abs((ll[i] - ll[j]) - (sll[i] - sll[j])));
  return worst;
}

CallableDecoder offset_decoder(const Decoder& base, double c) {
  return CallableDecoder("offset", [&base, c](const ParamVector& t,
                                              const DatasetEmbedding& S) {
    return base.per_sample_log_likelihood(t, S) + c;
  });
}

}  // namespace

TEST_CASE("pointwise_error on the exact and incomplete Gaussian embeddings",
          "[metrics]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  const ThetaGrid grid = gaussian_grid();
  const Dataset data = sample(family, theta2(0.5, 1.5), 100, 2024);

  const auto exact = pointwise_error(family, data, GaussianMomentEncoder(2), dec, grid);
  CHECK(exact.epsilon <= 1e-10);

  const auto lossy = pointwise_error(family, data, GaussianMomentEncoder(1), dec, grid);
  CHECK(lossy.epsilon > 0.5);
  CHECK(lossy.epsilon < 10.0);
}

TEST_CASE("constant decoder offset moves epsilon but not delta", "[metrics]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder base;
  const GaussianMomentEncoder enc(2);
  const ThetaGrid grid = gaussian_grid();
  const Dataset data = sample(family, theta2(-0.4, 0.9), 100, 7);

  const double c = 0.8125;
  const auto shifted = offset_decoder(base, c);
  const auto err = pointwise_error(family, data, enc, shifted, grid);
  CHECK(err.epsilon == Approx(c).margin(1e-9));

  const auto rd = ratio_distortion(family, data, enc, shifted, grid);
  CHECK(rd.delta <= 1e-9);
}

TEST_CASE("adding a constant changes epsilon by at most |c| and delta not at all",
          "[metrics][property]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder base;
  const GaussianMomentEncoder enc(1);  // lossy, so both metrics are O(1)
  const ThetaGrid grid = gaussian_grid();
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const ParamVector t0 = theta2(rng.uniform(-2, 2), rng.uniform(0.6, 1.6));
    const Dataset data = sample(family, t0, 100, rng.next_u64());
    const double c = rng.uniform(-5.0, 5.0);
    const auto shifted = offset_decoder(base, c);

    const double eps0 = pointwise_error(family, data, enc, base, grid).epsilon;
    const double eps1 = pointwise_error(family, data, enc, shifted, grid).epsilon;
    CHECK(std::abs(eps1 - eps0) <= std::abs(c) + 1e-12);

    const double d0 = ratio_distortion(family, data, enc, base, grid).delta;
    const double d1 = ratio_distortion(family, data, enc, shifted, grid).delta;
    CHECK(d1 == Approx(d0).margin(1e-12));
  }
}

TEST_CASE("range identity matches the pairwise brute force", "[metrics][property]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const ParamVector t0 = theta2(rng.uniform(-2, 2), rng.uniform(0.6, 1.6));
    const Dataset data =
        sample(family, t0, 20 + static_cast<Eigen::Index>(rng.uniform_index(80)),
               rng.next_u64());
    ThetaGrid grid;
    const int G = 7;
    for (int g = 0; g < G; ++g)
      grid.points.push_back(theta2(rng.uniform(-2, 2), rng.uniform(0.6, 1.6)));
    grid.description = "random G=7";
    const GaussianMomentEncoder enc(1 + static_cast<int>(rng.uniform_index(2)));
    const double via_range = ratio_distortion(family, data, enc, dec, grid).delta;
    const double via_pairs = brute_force_delta(family, data, enc, dec, grid);
    REQUIRE(via_range == Approx(via_pairs).margin(1e-12));
  }
}

TEST_CASE("check_pointwise_to_ratio records tightness and honors the bound",
          "[metrics]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  const ThetaGrid grid = gaussian_grid();
  const Dataset data = sample(family, theta2(0.7, 1.4), 100, 31);

  // Incomplete embedding: bound holds with the grid-determined tightness.
  DistortionReport report;
  report.n = data.n();
  report.epsilon_n =
      pointwise_error(family, data, GaussianMomentEncoder(1), dec, grid).epsilon;
  report.delta_n =
      ratio_distortion(family, data, GaussianMomentEncoder(1), dec, grid).delta;
  CHECK(check_pointwise_to_ratio(report));
  REQUIRE(report.tightness.has_value());
  CHECK(*report.tightness > 0.4);
  CHECK(*report.tightness < 0.5);

  // Exactly zero error: same code path as the truth, so eps == 0 and the
  // tightness ratio is undefined.
  const CallableDecoder mirror("mirror", [&](const ParamVector& t,
                                             const DatasetEmbedding& S) {
    (void)S;
    return log_likelihood(family, data, t) / static_cast<double>(data.n());
  });
  DistortionReport zero;
  zero.n = data.n();
  zero.epsilon_n =
      pointwise_error(family, data, GaussianMomentEncoder(2), mirror, grid).epsilon;
  zero.delta_n =
      ratio_distortion(family, data, GaussianMomentEncoder(2), mirror, grid).delta;
  CHECK(zero.epsilon_n == 0.0);
  CHECK(check_pointwise_to_ratio(zero));
  CHECK(!zero.tightness.has_value());

  // Sign-flipped surrogate: a hostile decoder still satisfies the theorem.
  const CallableDecoder flipped("flipped", [&](const ParamVector& t,
                                               const DatasetEmbedding& S) {
    (void)S;
    return -log_likelihood(family, data, t) / static_cast<double>(data.n());
  });
  DistortionReport adv;
  adv.n = data.n();
  adv.epsilon_n =
      pointwise_error(family, data, GaussianMomentEncoder(2), flipped, grid).epsilon;
  adv.delta_n =
      ratio_distortion(family, data, GaussianMomentEncoder(2), flipped, grid).delta;
  CHECK(check_pointwise_to_ratio(adv));
}

TEST_CASE("lrt_statistics: exact decoder and the 4-delta bound", "[metrics]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  ThetaGrid grid = gaussian_grid(-2, 2, 21, 0.6, 1.6, 21);
  const ParamVector theta0 = grid.points[110];
  const Dataset data = sample(family, theta0, 100, 47);

  const auto exact =
      lrt_statistics(family, data, GaussianMomentEncoder(2), dec, grid, theta0);
  CHECK(exact.gap <= 1e-8);
  CHECK(exact.lambda >= 0.0);

  const auto lossy =
      lrt_statistics(family, data, GaussianMomentEncoder(1), dec, grid, theta0);
  const double delta =
      ratio_distortion(family, data, GaussianMomentEncoder(1), dec, grid).delta;
  CHECK(lossy.gap <= 4.0 * delta + 1e-9);

  ParamVector not_in_grid = theta2(0.123456, 1.01);
  CHECK_THROWS_AS(
      lrt_statistics(family, data, GaussianMomentEncoder(2), dec, grid, not_in_grid),
      std::invalid_argument);
}

TEST_CASE("surrogate LR statistic is chi-square calibrated", "[metrics][slow]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  const GaussianMomentEncoder enc(2);
  const ParamVector theta0 = theta2(0.3, 1.0);
  Rng rng(59);
  const int reps = 1000;
  double lambda_sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    const Dataset data = sample(family, theta0, 400, rng.next_u64());
    const ParamVector mle = gaussian_mle(data);
    // Fine local grid around the closed-form maximizer, with theta0 appended
    // so the null point is always available.
    ThetaGrid grid;
    for (double mu = mle[0] - 0.2; mu <= mle[0] + 0.2001; mu += 0.02)
      for (double s = std::max(0.5, mle[1] - 0.14); s <= mle[1] + 0.1401; s += 0.014)
        grid.points.push_back(theta2(mu, s));
    grid.points.push_back(theta0);
    grid.description = "local wilks grid";
    const auto lrt = lrt_statistics(family, data, enc, dec, grid, theta0);
    lambda_sum += lrt.lambda;
  }
  const double mean_lambda = lambda_sum / reps;
  CHECK(std::abs(mean_lambda - 2.0) < 0.25);
}

TEST_CASE("mle_gap: exact decoder agrees and the grid argmax tracks the MLE",
          "[metrics]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  const ThetaGrid grid = gaussian_grid();
  const Dataset data = sample(family, theta2(0.4, 1.1), 200, 61);

  const auto exact = mle_gap(family, data, GaussianMomentEncoder(2), dec, grid);
  CHECK(exact.gap == 0.0);

  const ParamVector mle = gaussian_mle(data);
  CHECK(std::abs(exact.theta_hat[0] - mle[0]) <= 0.1 + 1e-12);
  CHECK(std::abs(exact.theta_hat[1] - mle[1]) <= 0.025 + 1e-12);
}

TEST_CASE("aic_bic_report: exact decoder and the 6-n-eps bound", "[metrics]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  const ThetaGrid grid = gaussian_grid();
  const Dataset data = sample(family, theta2(-1.0, 1.3), 100, 71);

  const auto exact = aic_bic_report(family, data, GaussianMomentEncoder(2), dec, grid, 2);
  CHECK(exact.aic_gap <= 1e-8);
  CHECK(exact.bic_gap <= 1e-8);

  const double eps =
      pointwise_error(family, data, GaussianMomentEncoder(1), dec, grid).epsilon;
  const auto lossy = aic_bic_report(family, data, GaussianMomentEncoder(1), dec, grid, 2);
  const double bound = 6.0 * static_cast<double>(data.n()) * eps + 1e-9;
  CHECK(lossy.aic_gap <= bound);
  CHECK(lossy.bic_gap <= bound);
}

TEST_CASE("log_bayes_factor_gap: exact decoder, bound, and degenerate grids",
          "[metrics]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  const Dataset data = sample(family, theta2(0.1, 0.8), 100, 83);

  ThetaGrid grid0, grid1;
  for (double mu = -2.0; mu <= 0.0; mu += 0.25) grid0.points.push_back(theta2(mu, 1.0));
  for (double mu = 0.25; mu <= 2.0; mu += 0.25) grid1.points.push_back(theta2(mu, 1.0));
  grid0.description = "null";
  grid1.description = "alternative";

  const auto exact = log_bayes_factor_gap(family, data, GaussianMomentEncoder(2), dec,
                                          grid0, grid1);
  CHECK(exact.gap <= 1e-8);

  ThetaGrid whole;
  whole.points = grid0.points;
  whole.points.insert(whole.points.end(), grid1.points.begin(), grid1.points.end());
  whole.description = "union";
  const double eps =
      pointwise_error(family, data, GaussianMomentEncoder(1), dec, whole).epsilon;
  const auto lossy = log_bayes_factor_gap(family, data, GaussianMomentEncoder(1), dec,
                                          grid0, grid1);
  CHECK(lossy.gap <= 2.0 * static_cast<double>(data.n()) * eps + 1e-9);

  const auto same = log_bayes_factor_gap(family, data, GaussianMomentEncoder(1), dec,
                                         grid0, grid0);
  CHECK(same.log_bf == 0.0);
  CHECK(same.log_bf_surrogate == 0.0);
  CHECK(same.gap == 0.0);
}

TEST_CASE("epsilon and delta are invariant under row permutation",
          "[metrics][property]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  const GaussianMomentEncoder enc(1);
  const ThetaGrid grid = gaussian_grid(-2, 2, 11, 0.6, 1.6, 11);
  const Dataset data = sample(family, theta2(0.9, 1.2), 64, 91);

  const double eps = pointwise_error(family, data, enc, dec, grid).epsilon;
  const double delta = ratio_distortion(family, data, enc, dec, grid).delta;
  Rng rng(5);
  for (int p = 0; p < 5; ++p) {
    Dataset shuffled;
    shuffled.rows.resize(data.n(), 1);
    std::vector<Eigen::Index> order(data.n());
    std::iota(order.begin(), order.end(), 0);
    for (Eigen::Index i = data.n() - 1; i > 0; --i)
      std::swap(order[i], order[rng.uniform_index(i + 1)]);
    for (Eigen::Index i = 0; i < data.n(); ++i)
      shuffled.rows.row(i) = data.rows.row(order[i]);
    CHECK(pointwise_error(family, shuffled, enc, dec, grid).epsilon ==
          Approx(eps).epsilon(1e-12));
    CHECK(ratio_distortion(family, shuffled, enc, dec, grid).delta ==
          Approx(delta).epsilon(1e-12));
  }
}

TEST_CASE("grid_distortion_bound calculator and its optimum", "[metrics]") {
  CHECK(grid_distortion_bound(0.0, 50.0, 100.0, 1.0, 4.0) ==
        Approx(2.0 * 100.0 * 4.0 / 50.0).epsilon(1e-15));
  CHECK(grid_distortion_bound(0.01, 100.0, 100.0, 1.0, 4.0) ==
        Approx(18.0).epsilon(1e-15));

  const double eps = 0.01, n = 100.0, L = 1.0, diam = 4.0;
  const double g_star = grid_distortion_optimal_g(eps, n, L, diam);
  const double at_opt = grid_distortion_bound(eps, g_star, n, L, diam);
  CHECK(at_opt <= grid_distortion_bound(eps, g_star * 1.05, n, L, diam));
  CHECK(at_opt <= grid_distortion_bound(eps, g_star * 0.95, n, L, diam));
  CHECK(g_star == Approx(std::sqrt(2.0 * n * L * diam / std::sqrt(eps))).epsilon(1e-15));

  CHECK_THROWS_AS(grid_distortion_bound(0.01, 0.0, 100.0, 1.0, 4.0),
                  std::invalid_argument);
}

TEST_CASE("evaluate_grid names the offending grid point", "[metrics]") {
  const GaussianModel family;
  const Dataset data = sample(family, theta2(0.0, 1.0), 10, 3);
  const GaussianMomentEncoder enc(2);
  const CallableDecoder bad("bad", [](const ParamVector& t, const DatasetEmbedding&) {
    return t[0] > 1.0 ? std::numeric_limits<double>::quiet_NaN() : -1.0;
  });
  ThetaGrid grid;
  grid.points.push_back(theta2(0.0, 1.0));
  grid.points.push_back(theta2(1.5, 1.0));
  grid.description = "two points";
  CHECK_THROWS_WITH(evaluate_grid(family, data, enc, bad, grid),
                    Catch::Matchers::ContainsSubstring("grid point 1"));
}

TEST_CASE("distortion report: cascade holds and serialization is flat",
          "[metrics]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  ThetaGrid grid = gaussian_grid(-2, 2, 15, 0.6, 1.6, 15);
  const ParamVector theta0 = grid.points[7 * 15 + 7];
  const Dataset data = sample(family, theta0, 100, 101);

  for (int m : {1, 2}) {
    const GaussianMomentEncoder enc(m);
    const DistortionReport r =
        make_distortion_report(family, data, enc, dec, grid, theta0, 2);
    CHECK(check_bound_cascade(r));
    CHECK(r.n == 100);
    CHECK(r.grid == grid.description);

    const nlohmann::json j = to_json(r);
    CHECK(j.at("epsilon_n").get<double>() == r.epsilon_n);
    CHECK(j.at("delta_n").get<double>() == r.delta_n);
    CHECK(j.at("n").get<std::int64_t>() == 100);
    if (m == 2)
      CHECK(r.epsilon_n <= 1e-10);
    else
      CHECK(j.at("tightness").get<double>() == Approx(*r.tightness));
  }
}
