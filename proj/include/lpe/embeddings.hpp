#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lpe/models.hpp"
#include "lpe/stats.hpp"

namespace lpe {

/// m real numbers plus the sample count they summarize.
struct DatasetEmbedding {
  Eigen::VectorXd s;
  Eigen::Index n = 0;
};

enum class EncoderMode {
  per_sample,         // row-wise map, dataset embedding is the mean
  dataset_statistic,  // permutation-invariant function of the whole dataset
};

class Encoder {
 public:
  virtual ~Encoder() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual int output_dim() const = 0;
  [[nodiscard]] virtual EncoderMode mode() const = 0;

  /// Row-wise map; only meaningful for per_sample encoders.
  [[nodiscard]] virtual Eigen::VectorXd encode_row(
      const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    (void)row;
    throw std::logic_error(name() + ": encode_row on a dataset-statistic encoder");
  }

  /// Whole-dataset embedding; dataset-statistic encoders must override.
  [[nodiscard]] virtual DatasetEmbedding encode_dataset(const Dataset& data) const;
};

/// Mean of per-row encodings: s = (1/n) sum_i T(X_i).
inline DatasetEmbedding aggregate(const Encoder& encoder, const Dataset& data) {
  if (encoder.mode() != EncoderMode::per_sample)
    throw std::invalid_argument(encoder.name() + ": aggregate needs a per-sample encoder");
  if (data.n() < 1) throw std::invalid_argument("aggregate: empty dataset");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(encoder.output_dim());
  for (Eigen::Index i = 0; i < data.n(); ++i) acc += encoder.encode_row(data.rows.row(i));
  return {acc / static_cast<double>(data.n()), data.n()};
}

inline DatasetEmbedding Encoder::encode_dataset(const Dataset& data) const {
  return aggregate(*this, data);
}

/// Mode-dispatching entry point; treats both encoder kinds uniformly.
inline DatasetEmbedding embed(const Encoder& encoder, const Dataset& data) {
  return encoder.encode_dataset(data);
}

class Decoder {
 public:
  virtual ~Decoder() = default;
  [[nodiscard]] virtual std::string name() const = 0;

  /// Approximate per-sample log-likelihood reconstructed from the embedding.
  [[nodiscard]] virtual double per_sample_log_likelihood(
      const ParamVector& theta, const DatasetEmbedding& S) const = 0;
};

/// n * h(theta, S): the embedding-based stand-in for the full log-likelihood.
inline double surrogate_log_likelihood(const Decoder& decoder, const ParamVector& theta,
                                       const DatasetEmbedding& S) {
  return static_cast<double>(S.n) * decoder.per_sample_log_likelihood(theta, S);
}

// ---------------------------------------------------------------------------
// Concrete encoders / decoders

/// Passes rows through unchanged.
class IdentityEncoder final : public Encoder {
 public:
  explicit IdentityEncoder(int dim) : dim_(dim) {}
  [[nodiscard]] std::string name() const override { return "identity"; }
  [[nodiscard]] int output_dim() const override { return dim_; }
  [[nodiscard]] EncoderMode mode() const override { return EncoderMode::per_sample; }
  [[nodiscard]] Eigen::VectorXd encode_row(
      const Eigen::Ref<const Eigen::RowVectorXd>& row) const override {
    return row.transpose();
  }

 private:
  int dim_;
};

/// x -> (x, x^2, x^3, x^4) truncated to the first m coordinates.
class GaussianMomentEncoder final : public Encoder {
 public:
  explicit GaussianMomentEncoder(int m) : m_(m) {
    if (m < 1 || m > 4)
      throw std::invalid_argument("GaussianMomentEncoder: m must be in 1..4, got " +
                                  std::to_string(m));
  }
  [[nodiscard]] std::string name() const override {
    return "gaussian_moments_m" + std::to_string(m_);
  }
  [[nodiscard]] int output_dim() const override { return m_; }
  [[nodiscard]] EncoderMode mode() const override { return EncoderMode::per_sample; }
  [[nodiscard]] Eigen::VectorXd encode_row(
      const Eigen::Ref<const Eigen::RowVectorXd>& row) const override {
    Eigen::VectorXd out(m_);
    double p = 1.0;
    for (int j = 0; j < m_; ++j) {
      p *= row[0];
      out[j] = p;
    }
    return out;
  }

 private:
  int m_;
};

/// Reconstructs the exact Gaussian per-sample log-likelihood from the first
/// two raw moments. With a single moment it substitutes s2 := s1^2 + 1, a
/// unit-variance plug-in that is exact only when the sample variance is 1.
class GaussianAnalyticDecoder final : public Decoder {
 public:
  [[nodiscard]] std::string name() const override { return "gaussian_analytic"; }
  [[nodiscard]] double per_sample_log_likelihood(
      const ParamVector& theta, const DatasetEmbedding& S) const override {
    if (theta.size() != 2)
      throw std::invalid_argument("gaussian_analytic: expected theta = (mu, sigma)");
    if (S.s.size() < 1)
      throw std::invalid_argument("gaussian_analytic: empty embedding");
    const double mu = theta[0];
    const double sigma = theta[1];
    if (!(sigma >= kMinSigma))
      throw std::domain_error("gaussian_analytic: sigma must be >= 1e-6");
    const double s1 = S.s[0];
    const double s2 = S.s.size() >= 2 ? S.s[1] : s1 * s1 + 1.0;
    return -std::log(sigma) - 0.5 * kLogTwoPi -
           (s2 - 2.0 * mu * s1 + mu * mu) / (2.0 * sigma * sigma);
  }
};

/// Empirical quantiles at levels (j - 0.5)/m, interpolated between order
/// statistics at midpoint plotting positions. Permutation-invariant by
/// construction; requires m <= n.
class CauchyQuantileEncoder final : public Encoder {
 public:
  explicit CauchyQuantileEncoder(int m) : m_(m) {
    if (m < 1) throw std::invalid_argument("CauchyQuantileEncoder: m must be >= 1");
  }
  [[nodiscard]] std::string name() const override {
    return "cauchy_quantiles_m" + std::to_string(m_);
  }
  [[nodiscard]] int output_dim() const override { return m_; }
  [[nodiscard]] EncoderMode mode() const override {
    return EncoderMode::dataset_statistic;
  }
  [[nodiscard]] DatasetEmbedding encode_dataset(const Dataset& data) const override {
    if (data.n() < m_)
      throw std::invalid_argument(name() + ": m exceeds sample count " +
                                  std::to_string(data.n()));
    std::vector<double> sorted(data.rows.col(0).data(),
                               data.rows.col(0).data() + data.n());
    std::sort(sorted.begin(), sorted.end());
    Eigen::VectorXd s(m_);
    for (int j = 0; j < m_; ++j) {
      const double level = (static_cast<double>(j) + 0.5) / static_cast<double>(m_);
      s[j] = quantile_midpoint(sorted, level);
    }
    return {std::move(s), data.n()};
  }

 private:
  int m_;
};

/// Equal-weight plug-in of the Cauchy log-density at the stored quantiles.
class CauchyQuantileDecoder final : public Decoder {
 public:
  [[nodiscard]] std::string name() const override { return "cauchy_quantile_plugin"; }
  [[nodiscard]] double per_sample_log_likelihood(
      const ParamVector& theta, const DatasetEmbedding& S) const override {
    if (theta.size() != 1)
      throw std::invalid_argument("cauchy_quantile_plugin: expected scalar theta");
    double acc = 0.0;
    for (Eigen::Index j = 0; j < S.s.size(); ++j)
      acc += cauchy_log_density(S.s[j], theta[0]);
    return acc / static_cast<double>(S.s.size());
  }
};

/// Adapters for ad-hoc encoders/decoders (tests, perturbations, references).
class CallableDecoder final : public Decoder {
 public:
  using Fn = std::function<double(const ParamVector&, const DatasetEmbedding&)>;
  CallableDecoder(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  [[nodiscard]] std::string name() const override { return name_; }
  [[nodiscard]] double per_sample_log_likelihood(
      const ParamVector& theta, const DatasetEmbedding& S) const override {
    return fn_(theta, S);
  }

 private:
  std::string name_;
  Fn fn_;
};

class CallableRowEncoder final : public Encoder {
 public:
  using Fn = std::function<Eigen::VectorXd(const Eigen::Ref<const Eigen::RowVectorXd>&)>;
  CallableRowEncoder(std::string name, int dim, Fn fn)
      : name_(std::move(name)), dim_(dim), fn_(std::move(fn)) {}
  [[nodiscard]] std::string name() const override { return name_; }
  [[nodiscard]] int output_dim() const override { return dim_; }
  [[nodiscard]] EncoderMode mode() const override { return EncoderMode::per_sample; }
  [[nodiscard]] Eigen::VectorXd encode_row(
      const Eigen::Ref<const Eigen::RowVectorXd>& row) const override {
    return fn_(row);
  }

 private:
  std::string name_;
  int dim_;
  Fn fn_;
};

}  // namespace lpe
