#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpe/embeddings.hpp"
#include "lpe/models.hpp"
#include "lpe/stats.hpp"

namespace lpe {

/// Absolute slack used when checking theorem bounds; absorbs float
/// re-association in the grid sums.
inline constexpr double kBoundSlack = 1e-9;

/// Finite set of parameter points standing in for the compact domain;
/// suprema in all metrics are maxima over this grid.
struct ThetaGrid {
  std::vector<ParamVector> points;
  std::string description;

  [[nodiscard]] std::size_t size() const { return points.size(); }

  /// Index of a point equal to theta (exact coordinate match).
  [[nodiscard]] std::optional<std::size_t> find(const ParamVector& theta) const {
    for (std::size_t i = 0; i < points.size(); ++i)
      if (points[i].size() == theta.size() && points[i] == theta) return i;
    return std::nullopt;
  }
};

inline std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw std::invalid_argument("linspace: count must be >= 1");
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (int i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

inline ThetaGrid gaussian_grid(double mu_lo = -2.0, double mu_hi = 2.0, int mu_n = 41,
                               double sigma_lo = 0.6, double sigma_hi = 1.6,
                               int sigma_n = 41) {
  ThetaGrid grid;
  grid.points.reserve(static_cast<std::size_t>(mu_n) * sigma_n);
  for (double mu : linspace(mu_lo, mu_hi, mu_n))
    for (double sigma : linspace(sigma_lo, sigma_hi, sigma_n)) {
      ParamVector p(2);
      p << mu, sigma;
      grid.points.push_back(std::move(p));
    }
  std::ostringstream desc;
  desc << "mu[" << mu_lo << "," << mu_hi << "]x" << mu_n << " sigma[" << sigma_lo << ","
       << sigma_hi << "]x" << sigma_n;
  grid.description = desc.str();
  return grid;
}

inline ThetaGrid cauchy_grid(double lo = -3.0, double hi = 3.0, int count = 121) {
  ThetaGrid grid;
  grid.points.reserve(count);
  for (double t : linspace(lo, hi, count)) {
    ParamVector p(1);
    p << t;
    grid.points.push_back(std::move(p));
  }
  std::ostringstream desc;
  desc << "theta[" << lo << "," << hi << "]x" << count;
  grid.description = desc.str();
  return grid;
}

/// Grid of arbitrary points (training pools, unions with a null point, ...).
inline ThetaGrid point_grid(std::vector<ParamVector> points, std::string description) {
  if (points.empty()) throw std::invalid_argument("point_grid: empty grid");
  return {std::move(points), std::move(description)};
}

// ---------------------------------------------------------------------------
// Grid evaluation

/// True and surrogate log-likelihood on every grid point, with the embedding
/// computed once. Evaluation order is the grid order; ties in any argmax /
/// argmin below resolve to the first attaining index, so reports are
/// reproducible regardless of how callers parallelize around this.
struct GridEval {
  std::vector<double> loglik;     // L_n(theta) per grid point
  std::vector<double> surrogate;  // n * h(theta, S) per grid point
  DatasetEmbedding embedding;
  Eigen::Index n = 0;
};

inline GridEval evaluate_grid(const ModelFamily& family, const Dataset& data,
                              const Encoder& encoder, const Decoder& decoder,
                              const ThetaGrid& grid) {
  if (grid.points.empty()) throw std::invalid_argument("evaluate_grid: empty grid");
  GridEval ev;
  ev.embedding = embed(encoder, data);
  ev.n = data.n();
  ev.loglik.reserve(grid.size());
  ev.surrogate.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ParamVector& theta = grid.points[i];
    const double ll = log_likelihood(family, data, theta);
    const double sll = surrogate_log_likelihood(decoder, theta, ev.embedding);
    if (!std::isfinite(ll) || !std::isfinite(sll)) {
      std::ostringstream msg;
      msg << "evaluate_grid: non-finite value at grid point " << i << " (theta = ["
          << theta.transpose() << "], loglik = " << ll << ", surrogate = " << sll
          << ")";
      throw std::runtime_error(msg.str());
    }
    ev.loglik.push_back(ll);
    ev.surrogate.push_back(sll);
  }
  return ev;
}

// ---------------------------------------------------------------------------
// Pointwise error and ratio distortion

struct PointwiseError {
  double epsilon = 0.0;
  ParamVector argmax;
};

/// max over the grid of |(1/n) L_n(theta) - h(theta, S)|.
inline PointwiseError pointwise_error(const GridEval& ev, const ThetaGrid& grid) {
  const double n = static_cast<double>(ev.n);
  double best = -1.0;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double gap = std::abs(ev.loglik[i] / n - ev.surrogate[i] / n);
    if (gap > best) {
      best = gap;
      best_i = i;
    }
  }
  return {best, grid.points[best_i]};
}

inline PointwiseError pointwise_error(const ModelFamily& family, const Dataset& data,
                                      const Encoder& encoder, const Decoder& decoder,
                                      const ThetaGrid& grid) {
  return pointwise_error(evaluate_grid(family, data, encoder, decoder, grid), grid);
}

struct RatioDistortion {
  double delta = 0.0;
  ParamVector arg_hi;  // maximizer of L_n - surrogate
  ParamVector arg_lo;  // minimizer of L_n - surrogate
};

/// Worst-case error in log-likelihood differences over grid pairs, computed
/// via the range identity on d(theta) = L_n(theta) - n h(theta, S).
inline RatioDistortion ratio_distortion(const GridEval& ev, const ThetaGrid& grid) {
  if (grid.size() < 2)
    throw std::invalid_argument("ratio_distortion: need at least 2 grid points");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t lo_i = 0, hi_i = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = ev.loglik[i] - ev.surrogate[i];
    if (d > hi) {
      hi = d;
      hi_i = i;
    }
    if (d < lo) {
      lo = d;
      lo_i = i;
    }
  }
  return {hi - lo, grid.points[hi_i], grid.points[lo_i]};
}

inline RatioDistortion ratio_distortion(const ModelFamily& family, const Dataset& data,
                                        const Encoder& encoder, const Decoder& decoder,
                                        const ThetaGrid& grid) {
  return ratio_distortion(evaluate_grid(family, data, encoder, decoder, grid), grid);
}

// ---------------------------------------------------------------------------
// Derived inference gaps

struct LrtStatistics {
  double lambda = 0.0;        // 2 (max_grid L_n - L_n(theta0))
  double lambda_tilde = 0.0;  // same with the surrogate
  double gap = 0.0;
};

inline LrtStatistics lrt_statistics(const GridEval& ev, const ThetaGrid& grid,
                                    const ParamVector& theta0) {
  const auto idx = grid.find(theta0);
  if (!idx)
    throw std::invalid_argument("lrt_statistics: theta0 is not a grid point");
  double max_ll = ev.loglik[0];
  double max_sll = ev.surrogate[0];
  for (std::size_t i = 1; i < grid.size(); ++i) {
    max_ll = std::max(max_ll, ev.loglik[i]);
    max_sll = std::max(max_sll, ev.surrogate[i]);
  }
  LrtStatistics out;
  out.lambda = 2.0 * (max_ll - ev.loglik[*idx]);
  out.lambda_tilde = 2.0 * (max_sll - ev.surrogate[*idx]);
  out.gap = std::abs(out.lambda_tilde - out.lambda);
  return out;
}

inline LrtStatistics lrt_statistics(const ModelFamily& family, const Dataset& data,
                                    const Encoder& encoder, const Decoder& decoder,
                                    const ThetaGrid& grid, const ParamVector& theta0) {
  return lrt_statistics(evaluate_grid(family, data, encoder, decoder, grid), grid,
                        theta0);
}

struct MleGap {
  double gap = 0.0;           // Euclidean distance between the two argmaxes
  ParamVector theta_hat;      // grid argmax of L_n
  ParamVector theta_tilde;    // grid argmax of the surrogate
};

inline MleGap mle_gap(const GridEval& ev, const ThetaGrid& grid) {
  if (grid.size() < 2) throw std::invalid_argument("mle_gap: need at least 2 grid points");
  std::size_t hat = 0, tilde = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (ev.loglik[i] > ev.loglik[hat]) hat = i;
    if (ev.surrogate[i] > ev.surrogate[tilde]) tilde = i;
  }
  MleGap out;
  out.theta_hat = grid.points[hat];
  out.theta_tilde = grid.points[tilde];
  out.gap = (out.theta_hat - out.theta_tilde).norm();
  return out;
}

inline MleGap mle_gap(const ModelFamily& family, const Dataset& data,
                      const Encoder& encoder, const Decoder& decoder,
                      const ThetaGrid& grid) {
  return mle_gap(evaluate_grid(family, data, encoder, decoder, grid), grid);
}

struct AicBicGaps {
  double aic_gap = 0.0;
  double bic_gap = 0.0;
};

/// |AIC~ - AIC| and |BIC~ - BIC| with maximizers restricted to the grid;
/// AIC = -2 L_n(theta_hat) + 2k, BIC = -2 L_n(theta_hat) + k log n.
inline AicBicGaps aic_bic_report(const GridEval& ev, int k) {
  double max_ll = ev.loglik[0];
  double max_sll = ev.surrogate[0];
  for (std::size_t i = 1; i < ev.loglik.size(); ++i) {
    max_ll = std::max(max_ll, ev.loglik[i]);
    max_sll = std::max(max_sll, ev.surrogate[i]);
  }
  const double n = static_cast<double>(ev.n);
  const double aic = -2.0 * max_ll + 2.0 * k;
  const double aic_t = -2.0 * max_sll + 2.0 * k;
  const double bic = -2.0 * max_ll + k * std::log(n);
  const double bic_t = -2.0 * max_sll + k * std::log(n);
  return {std::abs(aic_t - aic), std::abs(bic_t - bic)};
}

inline AicBicGaps aic_bic_report(const ModelFamily& family, const Dataset& data,
                                 const Encoder& encoder, const Decoder& decoder,
                                 const ThetaGrid& grid, int k) {
  return aic_bic_report(evaluate_grid(family, data, encoder, decoder, grid), k);
}

struct BayesFactorGap {
  double log_bf = 0.0;
  double log_bf_surrogate = 0.0;
  double gap = 0.0;
};

/// Log-Bayes-factor gap between hypotheses carried by two grids, each with a
/// uniform discrete prior: log BF = lse(L_n over grid1) - log G1 -
/// (lse(L_n over grid0) - log G0), surrogate analogous.
inline BayesFactorGap log_bayes_factor_gap(const ModelFamily& family,
                                           const Dataset& data, const Encoder& encoder,
                                           const Decoder& decoder,
                                           const ThetaGrid& grid0,
                                           const ThetaGrid& grid1) {
  const GridEval e0 = evaluate_grid(family, data, encoder, decoder, grid0);
  const GridEval e1 = evaluate_grid(family, data, encoder, decoder, grid1);
  const double lse = log_sum_exp(e1.loglik) - std::log(static_cast<double>(grid1.size()));
  const double lse0 =
      log_sum_exp(e0.loglik) - std::log(static_cast<double>(grid0.size()));
  const double lse_s =
      log_sum_exp(e1.surrogate) - std::log(static_cast<double>(grid1.size()));
  const double lse0_s =
      log_sum_exp(e0.surrogate) - std::log(static_cast<double>(grid0.size()));
  BayesFactorGap out;
  out.log_bf = lse - lse0;
  out.log_bf_surrogate = lse_s - lse0_s;
  out.gap = std::abs(out.log_bf_surrogate - out.log_bf);
  return out;
}

// ---------------------------------------------------------------------------
// Grid-resolution bound calculator

/// sqrt(eps_emp) * G + 2 n L diam / G: distortion bound for training over a
/// finite grid of G points when the log-likelihood is L-Lipschitz.
inline double grid_distortion_bound(double eps_emp, double G, double n, double L,
                                    double diam) {
  if (!(G > 0.0) || !(n > 0.0) || !(L > 0.0) || !(diam > 0.0) || eps_emp < 0.0)
    throw std::invalid_argument("grid_distortion_bound: inputs must be positive");
  return std::sqrt(eps_emp) * G + 2.0 * n * L * diam / G;
}

/// Grid size minimizing the bound above: G* = sqrt(2 n L diam / sqrt(eps)).
inline double grid_distortion_optimal_g(double eps_emp, double n, double L,
                                        double diam) {
  if (!(eps_emp > 0.0) || !(n > 0.0) || !(L > 0.0) || !(diam > 0.0))
    throw std::invalid_argument("grid_distortion_optimal_g: inputs must be positive");
  return std::sqrt(2.0 * n * L * diam / std::sqrt(eps_emp));
}

// ---------------------------------------------------------------------------
// The full report

/// Every derived gap for one (family, encoder, decoder, grid, dataset) tuple,
/// with the bounds each gap must satisfy.
struct DistortionReport {
  double epsilon_n = 0.0;
  double delta_n = 0.0;
  double bound_2n_eps = 0.0;
  std::optional<double> tightness;  // delta / (2 n eps); null when eps == 0
  double lrt_gap = 0.0;
  double lrt_bound_4delta = 0.0;
  double mle_gap_norm = 0.0;
  double aic_gap = 0.0;
  double bic_gap = 0.0;
  double bound_6n_eps = 0.0;
  double logbf_gap = 0.0;
  double bound_2n_eps_bf = 0.0;
  std::string grid;  // construction description
  std::int64_t n = 0;
};

/// delta <= 2 n eps, with slack; records the tightness ratio.
inline bool check_pointwise_to_ratio(DistortionReport& report) {
  report.bound_2n_eps = 2.0 * static_cast<double>(report.n) * report.epsilon_n;
  if (report.epsilon_n > 0.0)
    report.tightness = report.delta_n / report.bound_2n_eps;
  else
    report.tightness = std::nullopt;
  return report.delta_n <= report.bound_2n_eps + kBoundSlack;
}

/// All derived-gap bounds, each with absolute slack.
inline bool check_bound_cascade(const DistortionReport& r) {
  return r.delta_n <= r.bound_2n_eps + kBoundSlack &&
         r.lrt_gap <= r.lrt_bound_4delta + kBoundSlack &&
         r.aic_gap <= r.bound_6n_eps + kBoundSlack &&
         r.bic_gap <= r.bound_6n_eps + kBoundSlack &&
         r.logbf_gap <= r.bound_2n_eps_bf + kBoundSlack;
}

/// Builds the full report. The Bayes-factor gap compares the point null
/// {theta0} against a uniform prior over the whole grid; k is the parameter
/// count entering AIC/BIC.
inline DistortionReport make_distortion_report(const ModelFamily& family,
                                               const Dataset& data,
                                               const Encoder& encoder,
                                               const Decoder& decoder,
                                               const ThetaGrid& grid,
                                               const ParamVector& theta0, int k) {
  const auto theta0_idx = grid.find(theta0);
  if (!theta0_idx)
    throw std::invalid_argument("make_distortion_report: theta0 is not a grid point");
  const GridEval ev = evaluate_grid(family, data, encoder, decoder, grid);

  DistortionReport r;
  r.n = static_cast<std::int64_t>(ev.n);
  r.grid = grid.description;
  r.epsilon_n = pointwise_error(ev, grid).epsilon;
  r.delta_n = ratio_distortion(ev, grid).delta;
  check_pointwise_to_ratio(r);

  const LrtStatistics lrt = lrt_statistics(ev, grid, theta0);
  r.lrt_gap = lrt.gap;
  r.lrt_bound_4delta = 4.0 * r.delta_n;

  r.mle_gap_norm = mle_gap(ev, grid).gap;

  const AicBicGaps ab = aic_bic_report(ev, k);
  r.aic_gap = ab.aic_gap;
  r.bic_gap = ab.bic_gap;
  r.bound_6n_eps = 6.0 * static_cast<double>(r.n) * r.epsilon_n;

  // Point-null Bayes factor straight from the cached grid values.
  const double g = static_cast<double>(grid.size());
  const double log_bf = log_sum_exp(ev.loglik) - std::log(g) - ev.loglik[*theta0_idx];
  const double log_bf_s =
      log_sum_exp(ev.surrogate) - std::log(g) - ev.surrogate[*theta0_idx];
  r.logbf_gap = std::abs(log_bf_s - log_bf);
  r.bound_2n_eps_bf = 2.0 * static_cast<double>(r.n) * r.epsilon_n;
  return r;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const DistortionReport& r) {
  nlohmann::json j{{"epsilon_n", r.epsilon_n},
                   {"delta_n", r.delta_n},
                   {"bound_2n_eps", r.bound_2n_eps},
                   {"lrt_gap", r.lrt_gap},
                   {"lrt_bound_4delta", r.lrt_bound_4delta},
                   {"mle_gap_norm", r.mle_gap_norm},
                   {"aic_gap", r.aic_gap},
                   {"bic_gap", r.bic_gap},
                   {"bound_6n_eps", r.bound_6n_eps},
                   {"logbf_gap", r.logbf_gap},
                   {"bound_2n_eps_bf", r.bound_2n_eps_bf},
                   {"grid", r.grid},
                   {"n", r.n}};
  if (r.tightness)
    j["tightness"] = *r.tightness;
  else
    j["tightness"] = nullptr;
  return j;
}

inline const char* kDistortionCsvHeader =
    "epsilon_n,delta_n,bound_2n_eps,tightness,lrt_gap,lrt_bound_4delta,"
    "mle_gap_norm,aic_gap,bic_gap,bound_6n_eps,logbf_gap,bound_2n_eps_bf,n";

}  // namespace lpe
