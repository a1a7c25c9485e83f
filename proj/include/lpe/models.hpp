#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include "lpe/rng.hpp"

namespace lpe {

using ParamVector = Eigen::VectorXd;

/// Scale parameters below this are treated as degenerate and rejected.
inline constexpr double kMinSigma = 1e-6;

inline constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2*pi)

// ---------------------------------------------------------------------------
// Data

/// An n x d matrix of i.i.d. observations plus the seed that generated it
/// (0 for external data).
struct Dataset {
  Eigen::MatrixXd rows;
  std::uint64_t seed = 0;

  [[nodiscard]] Eigen::Index n() const { return rows.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return rows.cols(); }
};

inline Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("concat: datasets have different widths");
  Dataset out;
  out.rows.resize(a.n() + b.n(), a.dim());
  out.rows.topRows(a.n()) = a.rows;
  out.rows.bottomRows(b.n()) = b.rows;
  return out;
}

/// Per-coordinate box bounds for a parameter domain.
struct ParamBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  [[nodiscard]] bool contains(const ParamVector& theta) const {
    if (theta.size() != lo.size()) return false;
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      if (theta[i] < lo[i] || theta[i] > hi[i]) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Densities

inline double gaussian_log_density(double x, double mu, double sigma) {
  if (!(sigma >= kMinSigma))
    throw std::domain_error("gaussian_log_density: sigma must be >= 1e-6, got " +
                            std::to_string(sigma));
  const double z = (x - mu) / sigma;
  return -std::log(sigma) - 0.5 * kLogTwoPi - 0.5 * z * z;
}

inline double cauchy_log_density(double x, double theta) {
  const double d = x - theta;
  return -std::log(M_PI) - std::log1p(d * d);
}

/// Mixture weights of the three-component model; fixed, not parameters.
inline constexpr double kGmmWeights[3] = {0.4, 0.35, 0.25};

/// Log-density of a 3-component Gaussian mixture with identity covariances
/// and fixed weights. `means` is k x d with k == 3; evaluated via
/// log-sum-exp for stability.
inline double gmm_log_density(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                              const Eigen::Ref<const Eigen::MatrixXd>& means) {
  if (means.rows() != 3)
    throw std::invalid_argument("gmm_log_density: expected 3 component means, got " +
                                std::to_string(means.rows()));
  if (means.cols() != x.size())
    throw std::invalid_argument("gmm_log_density: mean dimension " +
                                std::to_string(means.cols()) + " != data dimension " +
                                std::to_string(x.size()));
  const double d = static_cast<double>(x.size());
  double terms[3];
  for (int k = 0; k < 3; ++k) {
    const double sq = (x - means.row(k)).squaredNorm();
    terms[k] = std::log(kGmmWeights[k]) - 0.5 * d * kLogTwoPi - 0.5 * sq;
  }
  const double m = std::max({terms[0], terms[1], terms[2]});
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - m);
  return m + std::log(acc);
}

// ---------------------------------------------------------------------------
// Families

/// A parametric family: exact log-density, reproducible sampler, and the
/// parameter box every grid and training pool must stay inside.
class ModelFamily {
 public:
  virtual ~ModelFamily() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual int param_dim() const = 0;
  [[nodiscard]] virtual int data_dim() const = 0;
  [[nodiscard]] virtual const ParamBox& param_domain() const = 0;

  [[nodiscard]] virtual double log_density(
      const Eigen::Ref<const Eigen::RowVectorXd>& row,
      const ParamVector& theta) const = 0;

  [[nodiscard]] virtual Eigen::MatrixXd sample_rows(const ParamVector& theta,
                                                    Eigen::Index n,
                                                    Rng& rng) const = 0;

  [[nodiscard]] bool in_domain(const ParamVector& theta) const {
    return param_domain().contains(theta);
  }

  void require_param(const ParamVector& theta) const {
    if (theta.size() != param_dim())
      throw std::invalid_argument(name() + ": parameter has length " +
                                  std::to_string(theta.size()) + ", expected " +
                                  std::to_string(param_dim()));
  }
};

class GaussianModel final : public ModelFamily {
 public:
  GaussianModel(double mu_lo = -2.0, double mu_hi = 2.0, double sigma_lo = 0.6,
                double sigma_hi = 1.6) {
    domain_.lo.resize(2);
    domain_.hi.resize(2);
    domain_.lo << mu_lo, sigma_lo;
    domain_.hi << mu_hi, sigma_hi;
  }

  [[nodiscard]] std::string name() const override { return "gaussian"; }
  [[nodiscard]] int param_dim() const override { return 2; }
  [[nodiscard]] int data_dim() const override { return 1; }
  [[nodiscard]] const ParamBox& param_domain() const override { return domain_; }

  [[nodiscard]] double log_density(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                   const ParamVector& theta) const override {
    require_param(theta);
    return gaussian_log_density(row[0], theta[0], theta[1]);
  }

  [[nodiscard]] Eigen::MatrixXd sample_rows(const ParamVector& theta, Eigen::Index n,
                                            Rng& rng) const override {
    require_param(theta);
    Eigen::MatrixXd rows(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) rows(i, 0) = rng.normal(theta[0], theta[1]);
    return rows;
  }

 private:
  ParamBox domain_;
};

class CauchyModel final : public ModelFamily {
 public:
  CauchyModel(double theta_lo = -3.0, double theta_hi = 3.0) {
    domain_.lo.resize(1);
    domain_.hi.resize(1);
    domain_.lo << theta_lo;
    domain_.hi << theta_hi;
  }

  [[nodiscard]] std::string name() const override { return "cauchy"; }
  [[nodiscard]] int param_dim() const override { return 1; }
  [[nodiscard]] int data_dim() const override { return 1; }
  [[nodiscard]] const ParamBox& param_domain() const override { return domain_; }

  [[nodiscard]] double log_density(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                   const ParamVector& theta) const override {
    require_param(theta);
    return cauchy_log_density(row[0], theta[0]);
  }

  [[nodiscard]] Eigen::MatrixXd sample_rows(const ParamVector& theta, Eigen::Index n,
                                            Rng& rng) const override {
    require_param(theta);
    Eigen::MatrixXd rows(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) rows(i, 0) = rng.cauchy(theta[0]);
    return rows;
  }

 private:
  ParamBox domain_;
};

/// Three-component Gaussian mixture in R^10 with identity covariances and
/// fixed weights; the parameter is the 30-vector of stacked component means
/// (component-major). Rows draw a component by weight, then add unit noise.
class GmmModel final : public ModelFamily {
 public:
  explicit GmmModel(double mean_lo = -10.0, double mean_hi = 10.0) {
    domain_.lo = Eigen::VectorXd::Constant(30, mean_lo);
    domain_.hi = Eigen::VectorXd::Constant(30, mean_hi);
  }

  [[nodiscard]] std::string name() const override { return "gmm3_r10"; }
  [[nodiscard]] int param_dim() const override { return 30; }
  [[nodiscard]] int data_dim() const override { return 10; }
  [[nodiscard]] const ParamBox& param_domain() const override { return domain_; }

  [[nodiscard]] static Eigen::MatrixXd means_from_theta(const ParamVector& theta) {
    Eigen::MatrixXd means(3, 10);
    for (int k = 0; k < 3; ++k) means.row(k) = theta.segment(10 * k, 10).transpose();
    return means;
  }

  [[nodiscard]] double log_density(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                   const ParamVector& theta) const override {
    require_param(theta);
    return gmm_log_density(row, means_from_theta(theta));
  }

  [[nodiscard]] Eigen::MatrixXd sample_rows(const ParamVector& theta, Eigen::Index n,
                                            Rng& rng) const override {
    require_param(theta);
    const Eigen::MatrixXd means = means_from_theta(theta);
    Eigen::MatrixXd rows(n, 10);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = rng.uniform();
      int k = 0;
      if (u >= kGmmWeights[0]) k = (u < kGmmWeights[0] + kGmmWeights[1]) ? 1 : 2;
      for (int j = 0; j < 10; ++j) rows(i, j) = means(k, j) + rng.normal();
    }
    return rows;
  }

 private:
  ParamBox domain_;
};

// ---------------------------------------------------------------------------
// Whole-dataset operations

/// Sum of per-row log-densities.
inline double log_likelihood(const ModelFamily& family, const Dataset& data,
                             const ParamVector& theta) {
  if (data.dim() != family.data_dim())
    throw std::invalid_argument(family.name() + ": dataset width " +
                                std::to_string(data.dim()) + " != data dimension " +
                                std::to_string(family.data_dim()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i)
    acc += family.log_density(data.rows.row(i), theta);
  return acc;
}

/// Deterministic in (theta, n, seed).
inline Dataset sample(const ModelFamily& family, const ParamVector& theta,
                      Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  Rng rng(seed);
  Dataset out;
  out.rows = family.sample_rows(theta, n, rng);
  out.seed = seed;
  return out;
}

/// Closed-form Gaussian maximizer (mean, sqrt of the /n second central
/// moment). Degenerate inputs (n < 2 or zero spread) are rejected.
inline ParamVector gaussian_mle(const Dataset& data) {
  if (data.dim() != 1)
    throw std::invalid_argument("gaussian_mle: expected univariate data");
  const Eigen::Index n = data.n();
  if (n < 2) throw std::domain_error("gaussian_mle: need at least 2 observations");
  const double mu = data.rows.col(0).mean();
  const double ssd = (data.rows.col(0).array() - mu).square().sum();
  const double sigma = std::sqrt(ssd / static_cast<double>(n));
  if (!(sigma >= kMinSigma))
    throw std::domain_error("gaussian_mle: degenerate sample (zero variance)");
  ParamVector theta(2);
  theta << mu, sigma;
  return theta;
}

/// Log-likelihood of y = X beta + eps with eps ~ N(0, sigma2 I).
inline double linreg_log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& beta, double sigma2) {
  if (!(sigma2 > 0.0))
    throw std::domain_error("linreg_log_likelihood: sigma2 must be positive");
  if (X.rows() != y.size() || X.cols() != beta.size())
    throw std::invalid_argument("linreg_log_likelihood: inconsistent shapes");
  const double n = static_cast<double>(X.rows());
  const double rss = (y - X * beta).squaredNorm();
  return -0.5 * n * (kLogTwoPi + std::log(sigma2)) - rss / (2.0 * sigma2);
}

}  // namespace lpe
