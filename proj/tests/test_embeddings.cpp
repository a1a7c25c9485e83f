#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lpe/embeddings.hpp"
#include "lpe/models.hpp"

using Catch::Approx;
using namespace lpe;

namespace {

ParamVector theta2(double mu, double sigma) {
  ParamVector t(2);
  t << mu, sigma;
  return t;
}

ParamVector theta1(double v) {
  ParamVector t(1);
  t << v;
  return t;
}

Dataset dataset_from(const std::vector<double>& xs) {
  Dataset d;
  d.rows.resize(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) d.rows(static_cast<Eigen::Index>(i), 0) = xs[i];
  return d;
}

Dataset permuted(const Dataset& d, Rng& rng) {
  std::vector<Eigen::Index> order(d.n());
  std::iota(order.begin(), order.end(), 0);
  for (Eigen::Index i = d.n() - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_index(i + 1)]);
  Dataset out;
  out.rows.resize(d.n(), d.dim());
  for (Eigen::Index i = 0; i < d.n(); ++i) out.rows.row(i) = d.rows.row(order[i]);
  return out;
}

}  // namespace

TEST_CASE("aggregate is the mean of per-row encodings", "[embeddings]") {
  const IdentityEncoder enc(1);
  const auto S = aggregate(enc, dataset_from({0.0, 2.0}));
  REQUIRE(S.s.size() == 1);
  CHECK(S.s[0] == 1.0);
  CHECK(S.n == 2);

  Dataset empty;
  empty.rows.resize(0, 1);
  CHECK_THROWS_AS(aggregate(enc, empty), std::invalid_argument);
}

TEST_CASE("aggregate of a concatenation is the count-weighted mean",
          "[embeddings][property]") {
  const GaussianMomentEncoder enc(3);
  const GaussianModel family;
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset d1 = sample(family, theta2(0.3, 1.0), 4 + trial, rng.next_u64());
    const Dataset d2 = sample(family, theta2(-0.5, 0.8), 9 + trial, rng.next_u64());
    const auto s1 = aggregate(enc, d1);
    const auto s2 = aggregate(enc, d2);
    const auto whole = aggregate(enc, concat(d1, d2));
    const Eigen::VectorXd weighted =
        (static_cast<double>(s1.n) * s1.s + static_cast<double>(s2.n) * s2.s) /
        static_cast<double>(s1.n + s2.n);
    REQUIRE(whole.n == s1.n + s2.n);
    for (Eigen::Index j = 0; j < weighted.size(); ++j)
      CHECK(whole.s[j] == Approx(weighted[j]).epsilon(1e-12));
  }
}

TEST_CASE("embeddings are invariant under row permutation", "[embeddings][property]") {
  const GaussianModel gaussian;
  const CauchyModel cauchy;
  const Dataset dg = sample(gaussian, theta2(0.2, 1.2), 60, 55);
  const Dataset dc = sample(cauchy, theta1(0.5), 60, 56);
  const GaussianMomentEncoder moment(4);
  const CauchyQuantileEncoder quantile(5);
  const auto base_m = embed(moment, dg);
  const auto base_q = embed(quantile, dc);
  Rng rng(99);
  for (int p = 0; p < 20; ++p) {
    const auto perm_m = embed(moment, permuted(dg, rng));
    const auto perm_q = embed(quantile, permuted(dc, rng));
    for (Eigen::Index j = 0; j < base_m.s.size(); ++j)
      CHECK(perm_m.s[j] == Approx(base_m.s[j]).margin(1e-12));
    // Sorting makes the quantile embedding exactly order-free.
    CHECK(perm_q.s == base_q.s);
  }
}

TEST_CASE("gaussian_moment_encoder truncates the raw moment map", "[embeddings]") {
  const GaussianMomentEncoder m2(2);
  Eigen::RowVectorXd x(1);
  x << 3.0;
  const Eigen::VectorXd z = m2.encode_row(x);
  REQUIRE(z.size() == 2);
  CHECK(z[0] == 3.0);
  CHECK(z[1] == 9.0);

  const GaussianMomentEncoder m1(1);
  x << -1.0;
  CHECK(m1.encode_row(x)[0] == -1.0);

  CHECK_THROWS_AS(GaussianMomentEncoder(0), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMomentEncoder(5), std::invalid_argument);

  // Aggregation yields the raw sample moments.
  const Dataset d = dataset_from({0.5, -1.5, 2.0, 0.0});
  const auto S = aggregate(GaussianMomentEncoder(4), d);
  for (int k = 1; k <= 4; ++k) {
    double want = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) want += std::pow(d.rows(i, 0), k);
    want /= static_cast<double>(d.n());
    CHECK(S.s[k - 1] == Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("gaussian analytic decoder reproduces the per-sample log-likelihood",
          "[embeddings]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  const Dataset d = dataset_from({0.0, 2.0});
  const auto S = aggregate(GaussianMomentEncoder(2), d);
  CHECK(dec.per_sample_log_likelihood(theta2(1.0, 1.0), S) ==
        Approx(-1.4189385332046727).epsilon(1e-12));

  // m = 2 is an algebraic identity everywhere on the domain.
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const ParamVector t0 = theta2(rng.uniform(-2, 2), rng.uniform(0.6, 1.6));
    const Dataset data = sample(family, t0, 50, rng.next_u64());
    const auto Sd = aggregate(GaussianMomentEncoder(2), data);
    for (int g = 0; g < 25; ++g) {
      const ParamVector t = theta2(rng.uniform(-2, 2), rng.uniform(0.6, 1.6));
      const double truth = log_likelihood(family, data, t) / data.n();
      CHECK(dec.per_sample_log_likelihood(t, Sd) == Approx(truth).margin(1e-12));
    }
  }

  // m = 1 plug-in coincides when the /n sample variance is exactly 1.
  const auto S1 = aggregate(GaussianMomentEncoder(1), d);
  CHECK(dec.per_sample_log_likelihood(theta2(0.5, 1.3), S1) ==
        Approx(log_likelihood(family, d, theta2(0.5, 1.3)) / 2.0).margin(1e-12));
}

TEST_CASE("cauchy quantile encoder follows midpoint plotting positions",
          "[embeddings]") {
  const CauchyQuantileEncoder enc1(1);
  const auto med = embed(enc1, dataset_from({1.0, 2.0, 3.0}));
  CHECK(med.s[0] == 2.0);

  // Levels 0.25 / 0.75 against order statistics at (k - 0.5)/4.
  const CauchyQuantileEncoder enc2(2);
  const auto q = embed(enc2, dataset_from({0.0, 1.0, 2.0, 3.0}));
  CHECK(q.s[0] == Approx(0.5).margin(1e-15));
  CHECK(q.s[1] == Approx(2.5).margin(1e-15));

  CHECK_THROWS_AS(embed(CauchyQuantileEncoder(5), dataset_from({1.0, 2.0})),
                  std::invalid_argument);
}

TEST_CASE("cauchy quantile decoder with m = n reproduces the mean log-density",
          "[embeddings][property]") {
  const CauchyModel family;
  const CauchyQuantileDecoder dec;
  Rng rng(17);
  for (Eigen::Index n : {5L, 37L, 100L, 200L}) {
    const ParamVector t0 = theta1(rng.uniform(-3.0, 3.0));
    const Dataset data = sample(family, t0, n, rng.next_u64());
    const auto S = embed(CauchyQuantileEncoder(static_cast<int>(n)), data);
    for (int g = 0; g <= 20; ++g) {
      const ParamVector t = theta1(-3.0 + 0.3 * g);
      const double truth = log_likelihood(family, data, t) / static_cast<double>(n);
      REQUIRE(dec.per_sample_log_likelihood(t, S) == Approx(truth).margin(1e-9));
    }
  }
}

TEST_CASE("cauchy quantile decoder error shrinks as m grows", "[embeddings]") {
  const CauchyModel family;
  const CauchyQuantileDecoder dec;
  Rng rng(23);
  std::vector<double> mean_err(9, 0.0);
  const int n_datasets = 100;
  for (int i = 0; i < n_datasets; ++i) {
    const ParamVector t0 = theta1(rng.uniform(-3.0, 3.0));
    const Dataset data = sample(family, t0, 100, rng.next_u64());
    for (int m = 1; m <= 8; ++m) {
      const auto S = embed(CauchyQuantileEncoder(m), data);
      double worst = 0.0;
      for (int g = 0; g <= 60; ++g) {
        const ParamVector t = theta1(-3.0 + 0.1 * g);
        const double truth = log_likelihood(family, data, t) / 100.0;
        worst = std::max(worst,
                         std::abs(truth - dec.per_sample_log_likelihood(t, S)));
      }
      mean_err[m] += worst / n_datasets;
    }
  }
  for (int m = 1; m < 8; ++m) CHECK(mean_err[m + 1] < mean_err[m] + 0.02);
  CHECK(mean_err[8] < mean_err[1]);

  // Symmetric three-point data: the median equals theta and dominates.
  const Dataset sym = dataset_from({-1.0, 0.0, 1.0});
  const auto S1 = embed(CauchyQuantileEncoder(1), sym);
  CHECK(dec.per_sample_log_likelihood(theta1(0.0), S1) ==
        Approx(-std::log(M_PI)).margin(1e-12));
}

TEST_CASE("surrogate_log_likelihood scales the decoder by n", "[embeddings]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  Rng rng(29);
  const Dataset data = sample(family, theta2(0.4, 1.1), 80, rng.next_u64());
  const auto S = aggregate(GaussianMomentEncoder(2), data);
  const ParamVector t = theta2(-0.3, 0.9);
  CHECK(surrogate_log_likelihood(dec, t, S) ==
        Approx(log_likelihood(family, data, t)).epsilon(1e-10));

  // n = 1: the surrogate is the decoder output itself.
  const Dataset one = dataset_from({0.37});
  const auto S1 = aggregate(GaussianMomentEncoder(2), one);
  CHECK(surrogate_log_likelihood(dec, t, S1) ==
        dec.per_sample_log_likelihood(t, S1));

  // Duplicating the dataset keeps S and doubles the surrogate.
  const Dataset doubled = concat(data, data);
  const auto S2 = aggregate(GaussianMomentEncoder(2), doubled);
  CHECK(surrogate_log_likelihood(dec, t, S2) ==
        Approx(2.0 * surrogate_log_likelihood(dec, t, S)).epsilon(1e-12));
}

TEST_CASE("exact sufficiency at m = 2 on every test dataset",
          "[embeddings][property]") {
  const GaussianModel family;
  const GaussianAnalyticDecoder dec;
  const GaussianMomentEncoder enc(2);
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const ParamVector t0 = theta2(rng.uniform(-2, 2), rng.uniform(0.6, 1.6));
    const Dataset data = sample(family, t0, 100, rng.next_u64());
    const auto S = aggregate(enc, data);
    double sup = 0.0;
    for (double mu = -2.0; mu <= 2.001; mu += 0.25)
      for (double sigma = 0.6; sigma <= 1.601; sigma += 0.1) {
        const ParamVector t = theta2(mu, sigma);
        const double truth = log_likelihood(family, data, t) / data.n();
        sup = std::max(sup, std::abs(truth - dec.per_sample_log_likelihood(t, S)));
      }
    REQUIRE(sup <= 1e-10);
  }
}
