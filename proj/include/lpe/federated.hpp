#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpe/parallel.hpp"
#include "lpe/rng.hpp"
#include "lpe/stats.hpp"

namespace lpe {

// Multi-site regression trial: design columns are
// (intercept, treatment, covariate1, covariate2).
inline constexpr int kTrialP = 4;
inline constexpr int kTreatCol = 1;

struct SiteData {
  Eigen::MatrixXd X;  // n x 4, intercept column all ones, treatment binary
  Eigen::VectorXd y;
};

enum class SummaryLevel { full16, mid12, treat8 };

inline std::string to_string(SummaryLevel level) {
  switch (level) {
    case SummaryLevel::full16: return "full16";
    case SummaryLevel::mid12: return "mid12";
    case SummaryLevel::treat8: return "treat8";
  }
  throw std::logic_error("unreachable");
}

inline int payload_length(SummaryLevel level) {
  switch (level) {
    case SummaryLevel::full16: return 16;
    case SummaryLevel::mid12: return 12;
    case SummaryLevel::treat8: return 8;
  }
  throw std::logic_error("unreachable");
}

/// Additive per-site statistics. Payload layouts:
///   full16: [n, y'y, X'y (4), upper triangle of X'X (10)]
///   treat8: [n, sum y, y'y, y'x_t, treatment row of X'X (4)]
///   mid12:  treat8 followed by [sum c1, sum c2, sum c1^2, sum c2^2]
struct SiteSummary {
  SummaryLevel level = SummaryLevel::full16;
  std::int64_t n = 0;
  Eigen::VectorXd payload;
};

/// Treatment Bernoulli(0.5), covariates standard normal, outcome
/// y = 0.5 + beta_treat * t + 0.3 c1 - 0.2 c2 + sigma * eps.
inline SiteData simulate_site(double beta_treat, Eigen::Index n, std::uint64_t seed,
                              double sigma = 1.0) {
  if (n < 8) throw std::invalid_argument("simulate_site: n must be >= 8");
  Rng rng(seed);
  SiteData site;
  site.X.resize(n, kTrialP);
  site.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    site.X(i, 0) = 1.0;
    site.X(i, 1) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    site.X(i, 2) = rng.normal();
    site.X(i, 3) = rng.normal();
  }
  Eigen::VectorXd beta(kTrialP);
  beta << 0.5, beta_treat, 0.3, -0.2;
  for (Eigen::Index i = 0; i < n; ++i)
    site.y[i] = site.X.row(i).dot(beta) + sigma * rng.normal();
  return site;
}

inline SiteSummary summarize_site(const SiteData& data, SummaryLevel level) {
  const Eigen::Index n = data.X.rows();
  SiteSummary out;
  out.level = level;
  out.n = n;
  out.payload.resize(payload_length(level));

  const double yty = data.y.squaredNorm();
  if (level == SummaryLevel::full16) {
    const Eigen::VectorXd xty = data.X.transpose() * data.y;
    const Eigen::MatrixXd xtx = data.X.transpose() * data.X;
    out.payload[0] = static_cast<double>(n);
    out.payload[1] = yty;
    out.payload.segment(2, 4) = xty;
    int k = 6;
    for (int r = 0; r < kTrialP; ++r)
      for (int c = r; c < kTrialP; ++c) out.payload[k++] = xtx(r, c);
    return out;
  }

  const auto t = data.X.col(kTreatCol);
  out.payload[0] = static_cast<double>(n);
  out.payload[1] = data.y.sum();
  out.payload[2] = yty;
  out.payload[3] = data.y.dot(t);
  for (int c = 0; c < kTrialP; ++c) out.payload[4 + c] = t.dot(data.X.col(c));
  if (level == SummaryLevel::mid12) {
    out.payload[8] = data.X.col(2).sum();
    out.payload[9] = data.X.col(3).sum();
    out.payload[10] = data.X.col(2).squaredNorm();
    out.payload[11] = data.X.col(3).squaredNorm();
  }
  return out;
}

/// Coordinate-wise sum; every payload entry is an additive statistic.
inline SiteSummary aggregate_summaries(std::span<const SiteSummary> summaries) {
  if (summaries.empty())
    throw std::invalid_argument("aggregate_summaries: no summaries");
  SiteSummary out = summaries.front();
  for (std::size_t i = 1; i < summaries.size(); ++i) {
    if (summaries[i].level != out.level)
      throw std::invalid_argument("aggregate_summaries: mixed summary levels");
    out.payload += summaries[i].payload;
    out.n += summaries[i].n;
  }
  return out;
}

struct InferenceResult {
  double beta_hat_t = 0.0;
  double se = 0.0;
  double p_value = 1.0;
};

namespace detail {

/// Wald z-test of beta_treat = 0 given the normal-equation pieces.
inline InferenceResult wald_from_moments(const Eigen::MatrixXd& xtx,
                                         const Eigen::VectorXd& xty, double yty,
                                         double n) {
  Eigen::LLT<Eigen::MatrixXd> solver(xtx);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("inference: singular X'X");
  const Eigen::VectorXd beta = solver.solve(xty);
  const double rss = yty - beta.dot(xty);
  const double sigma2 = rss / (n - static_cast<double>(xtx.rows()));
  if (!(sigma2 > 0.0)) throw std::runtime_error("inference: nonpositive variance");
  const Eigen::MatrixXd xtx_inv =
      solver.solve(Eigen::MatrixXd::Identity(xtx.rows(), xtx.cols()));
  InferenceResult out;
  out.beta_hat_t = beta[kTreatCol];
  out.se = std::sqrt(sigma2 * xtx_inv(kTreatCol, kTreatCol));
  out.p_value = two_sided_p(out.beta_hat_t / out.se);
  return out;
}

}  // namespace detail

/// OLS on the stacked patient-level data (the gold standard); Wald test of
/// beta_treat = 0 with sigma2 = RSS / (n - p).
inline InferenceResult pooled_inference(std::span<const SiteData> sites) {
  if (sites.empty()) throw std::invalid_argument("pooled_inference: no sites");
  Eigen::Index n = 0;
  for (const auto& s : sites) n += s.X.rows();
  if (n <= kTrialP)
    throw std::invalid_argument("pooled_inference: need combined n > p");
  Eigen::MatrixXd X(n, kTrialP);
  Eigen::VectorXd y(n);
  Eigen::Index at = 0;
  for (const auto& s : sites) {
    X.middleRows(at, s.X.rows()) = s.X;
    y.segment(at, s.X.rows()) = s.y;
    at += s.X.rows();
  }
  Eigen::LLT<Eigen::MatrixXd> solver(X.transpose() * X);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("pooled_inference: singular X'X");
  const Eigen::VectorXd xty = X.transpose() * y;
  const Eigen::VectorXd beta = solver.solve(xty);
  const double rss = (y - X * beta).squaredNorm();
  const double sigma2 = rss / static_cast<double>(n - kTrialP);
  const Eigen::MatrixXd xtx_inv =
      solver.solve(Eigen::MatrixXd::Identity(kTrialP, kTrialP));
  InferenceResult out;
  out.beta_hat_t = beta[kTreatCol];
  out.se = std::sqrt(sigma2 * xtx_inv(kTreatCol, kTreatCol));
  out.p_value = two_sided_p(out.beta_hat_t / out.se);
  return out;
}

/// Same estimator and test as pooled_inference, computed from the aggregated
/// 16-number summary alone (RSS = y'y - beta' X'y).
inline InferenceResult summary_inference(const SiteSummary& agg) {
  if (agg.level != SummaryLevel::full16)
    throw std::invalid_argument("summary_inference: expected a full16 summary");
  const double n = agg.payload[0];
  const double yty = agg.payload[1];
  const Eigen::VectorXd xty = agg.payload.segment(2, 4);
  Eigen::MatrixXd xtx(kTrialP, kTrialP);
  int k = 6;
  for (int r = 0; r < kTrialP; ++r)
    for (int c = r; c < kTrialP; ++c) {
      xtx(r, c) = agg.payload[k];
      xtx(c, r) = agg.payload[k];
      ++k;
    }
  return detail::wald_from_moments(xtx, xty, yty, n);
}

/// Intercept-plus-treatment regression recovered from the stored moments.
/// For mid12 the residual variance is additionally shrunk by a tenth of the
/// nuisance covariates' marginal variance share (a heuristic; the extra
/// moments carry no cross-information about y).
inline InferenceResult compressed_inference(const SiteSummary& agg) {
  if (agg.level != SummaryLevel::treat8 && agg.level != SummaryLevel::mid12)
    throw std::invalid_argument("compressed_inference: expected treat8 or mid12");
  const double n = agg.payload[0];
  const double sum_y = agg.payload[1];
  const double yty = agg.payload[2];
  const double ytx_t = agg.payload[3];
  const double sum_t = agg.payload[4];   // t . intercept
  const double t2 = agg.payload[5];      // t . t
  const double sxx = t2 - sum_t * sum_t / n;
  if (!(sxx > 0.0))
    throw std::runtime_error("compressed_inference: zero treatment variance");
  const double sxy = ytx_t - sum_y * sum_t / n;
  const double beta_t = sxy / sxx;
  const double tss = yty - sum_y * sum_y / n;
  const double rss = tss - beta_t * sxy;
  double sigma2 = rss / (n - 2.0);
  if (agg.level == SummaryLevel::mid12) {
    const double v1 = (agg.payload[10] - agg.payload[8] * agg.payload[8] / n) / (n - 1.0);
    const double v2 = (agg.payload[11] - agg.payload[9] * agg.payload[9] / n) / (n - 1.0);
    const double share = (v1 + v2) / (v1 + v2 + sigma2);
    sigma2 *= 1.0 - 0.1 * share;
  }
  if (!(sigma2 > 0.0))
    throw std::runtime_error("compressed_inference: nonpositive variance");
  InferenceResult out;
  out.beta_hat_t = beta_t;
  out.se = std::sqrt(sigma2 / sxx);
  out.p_value = two_sided_p(out.beta_hat_t / out.se);
  return out;
}

/// Fixed-effect inverse-variance weighting of per-site OLS estimates.
inline InferenceResult meta_analysis(std::span<const SiteData> sites) {
  if (sites.empty()) throw std::invalid_argument("meta_analysis: no sites");
  double sum_w = 0.0;
  double sum_wb = 0.0;
  for (const auto& site : sites) {
    if (site.X.rows() <= kTrialP)
      throw std::invalid_argument("meta_analysis: each site needs n > p");
    const SiteData one[1] = {site};
    const InferenceResult local = pooled_inference(one);
    const double w = 1.0 / (local.se * local.se);
    sum_w += w;
    sum_wb += w * local.beta_hat_t;
  }
  InferenceResult out;
  out.beta_hat_t = sum_wb / sum_w;
  out.se = 1.0 / std::sqrt(sum_w);
  out.p_value = two_sided_p(out.beta_hat_t / out.se);
  return out;
}

// ---------------------------------------------------------------------------
// Power analysis

struct TrialConfig {
  int sites = 5;
  Eigen::Index n_per_site = 200;
  std::vector<double> beta_grid = {0.0, 0.1, 0.2, 0.3};
  double sigma = 1.0;
  int n_sims = 500;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

inline const char* kTrialMethods[5] = {"pooled", "full16", "mid12", "treat8", "meta"};

struct PowerCurveRow {
  double beta = 0.0;
  std::string method;
  std::int64_t rejections = 0;
  std::int64_t n_sims = 0;
  double power = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

struct PowerCurve {
  std::vector<PowerCurveRow> rows;

  [[nodiscard]] const PowerCurveRow& at(double beta, const std::string& method) const {
    for (const auto& r : rows)
      if (r.beta == beta && r.method == method) return r;
    throw std::out_of_range("PowerCurve: no row for beta/method");
  }
};

/// Rejection indicators for every method on one simulated trial; all methods
/// see the same site data (paired design).
struct TrialOutcome {
  bool reject[5] = {false, false, false, false, false};
};

inline TrialOutcome run_one_trial(const TrialConfig& config, double beta_treat,
                                  Rng sim_rng) {
  std::vector<SiteData> sites;
  sites.reserve(config.sites);
  for (int s = 0; s < config.sites; ++s) {
    const std::uint64_t site_seed = sim_rng.substream(s).next_u64();
    sites.push_back(
        simulate_site(beta_treat, config.n_per_site, site_seed, config.sigma));
  }
  std::vector<SiteSummary> full, mid, treat;
  for (const auto& site : sites) {
    full.push_back(summarize_site(site, SummaryLevel::full16));
    mid.push_back(summarize_site(site, SummaryLevel::mid12));
    treat.push_back(summarize_site(site, SummaryLevel::treat8));
  }
  const InferenceResult results[5] = {
      pooled_inference(sites),
      summary_inference(aggregate_summaries(full)),
      compressed_inference(aggregate_summaries(mid)),
      compressed_inference(aggregate_summaries(treat)),
      meta_analysis(sites)};
  TrialOutcome out;
  for (int m = 0; m < 5; ++m) out.reject[m] = results[m].p_value < config.alpha;
  return out;
}

/// Aggregated power curve plus the raw paired rejection indicators,
/// outcomes[b][sim] for beta_grid index b.
struct PowerStudy {
  PowerCurve curve;
  std::vector<std::vector<TrialOutcome>> outcomes;
  bool sufficiency_identity = true;  // full16 rejections match pooled sim-by-sim
};

/// Monte-Carlo power for every (beta, method). Per-sim seeds derive from
/// (master seed, beta index, sim index), so results are reproducible
/// bit-for-bit for any worker count.
inline PowerStudy run_power_study(const TrialConfig& config, int threads = 1) {
  if (config.n_sims < 1)
    throw std::invalid_argument("run_power_study: n_sims must be >= 1");
  if (!(config.alpha > 0.0 && config.alpha < 1.0))
    throw std::invalid_argument("run_power_study: alpha must be in (0, 1)");
  PowerStudy study;
  const Rng master(config.seed);
  for (std::size_t b = 0; b < config.beta_grid.size(); ++b) {
    const double beta = config.beta_grid[b];
    const Rng beta_rng = master.substream(b);
    std::vector<TrialOutcome> outcomes(config.n_sims);
    parallel_for(config.n_sims, threads, [&](std::size_t sim) {
      outcomes[sim] = run_one_trial(config, beta, beta_rng.substream(sim));
    });
    for (int m = 0; m < 5; ++m) {
      PowerCurveRow row;
      row.beta = beta;
      row.method = kTrialMethods[m];
      row.n_sims = config.n_sims;
      for (const auto& o : outcomes) row.rejections += o.reject[m] ? 1 : 0;
      row.power = static_cast<double>(row.rejections) / config.n_sims;
      const WilsonInterval ci = wilson_interval(row.rejections, row.n_sims);
      row.wilson_lo = ci.lo;
      row.wilson_hi = ci.hi;
      study.curve.rows.push_back(std::move(row));
    }
    for (const auto& o : outcomes)
      study.sufficiency_identity =
          study.sufficiency_identity && (o.reject[0] == o.reject[1]);
    study.outcomes.push_back(std::move(outcomes));
  }
  return study;
}

inline PowerCurve power_curve(const TrialConfig& config, int threads = 1) {
  return run_power_study(config, threads).curve;
}

}  // namespace lpe
