#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lpe/csv.hpp"
#include "lpe/embeddings.hpp"
#include "lpe/metrics.hpp"
#include "lpe/models.hpp"
#include "lpe/rng.hpp"

namespace lpe {

enum class Activation { tanh, relu };

inline std::string to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "relu";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation: " + s);
}

struct MlpLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

/// Plain feedforward stack; the activation follows every layer but the last.
struct MlpWeights {
  std::vector<MlpLayer> layers;
  Activation activation = Activation::tanh;

  [[nodiscard]] int input_dim() const { return static_cast<int>(layers.front().W.cols()); }
  [[nodiscard]] int output_dim() const { return static_cast<int>(layers.back().W.rows()); }
};

namespace detail {

inline void apply_activation(Eigen::Ref<Eigen::MatrixXd> h, Activation act) {
  if (act == Activation::tanh)
    h = h.array().tanh();
  else
    h = h.array().max(0.0);
}

/// Derivative expressed through the post-activation value.
inline Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& h, Activation act) {
  if (act == Activation::tanh) return (1.0 - h.array().square()).matrix();
  return (h.array() > 0.0).cast<double>().matrix();
}

inline void check_chain(const MlpWeights& w, const char* what) {
  if (w.layers.empty()) throw std::invalid_argument(std::string(what) + ": no layers");
  for (std::size_t l = 0; l + 1 < w.layers.size(); ++l)
    if (w.layers[l + 1].W.cols() != w.layers[l].W.rows())
      throw std::invalid_argument(std::string(what) + ": layer " + std::to_string(l + 1) +
                                  " input dim does not chain");
  for (std::size_t l = 0; l < w.layers.size(); ++l)
    if (w.layers[l].b.size() != w.layers[l].W.rows())
      throw std::invalid_argument(std::string(what) + ": layer " + std::to_string(l) +
                                  " bias size mismatch");
}

}  // namespace detail

inline Eigen::VectorXd mlp_forward(const MlpWeights& w, const Eigen::VectorXd& x) {
  detail::check_chain(w, "mlp_forward");
  if (x.size() != w.layers.front().W.cols())
    throw std::invalid_argument("mlp_forward: input size " + std::to_string(x.size()) +
                                " != expected " +
                                std::to_string(w.layers.front().W.cols()));
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    h = (w.layers[l].W * h + w.layers[l].b).eval();
    if (l + 1 < w.layers.size()) detail::apply_activation(h, w.activation);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Cached passes (rows batched as matrices; row i of `io[l]` is sample i)

struct MlpBatchCache {
  std::vector<Eigen::MatrixXd> io;  // io[0] = input, io[l+1] = output of layer l
};

inline Eigen::MatrixXd mlp_forward_batch(const MlpWeights& w, const Eigen::MatrixXd& X,
                                         MlpBatchCache* cache) {
  detail::check_chain(w, "mlp_forward_batch");
  if (X.cols() != w.layers.front().W.cols())
    throw std::invalid_argument("mlp_forward_batch: input width mismatch");
  Eigen::MatrixXd h = X;
  if (cache) {
    cache->io.clear();
    cache->io.push_back(h);
  }
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    h = (h * w.layers[l].W.transpose()).rowwise() + w.layers[l].b.transpose();
    if (l + 1 < w.layers.size()) detail::apply_activation(h, w.activation);
    if (cache) cache->io.push_back(h);
  }
  return h;
}

struct MlpGradients {
  std::vector<MlpLayer> layers;  // same shapes as the weights
};

inline MlpGradients zero_gradients(const MlpWeights& w) {
  MlpGradients g;
  g.layers.reserve(w.layers.size());
  for (const auto& layer : w.layers)
    g.layers.push_back({Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                        Eigen::VectorXd::Zero(layer.b.size())});
  return g;
}

/// Accumulates parameter gradients for a batched pass and returns the
/// gradient with respect to the input rows.
inline Eigen::MatrixXd mlp_backward_batch(const MlpWeights& w,
                                          const MlpBatchCache& cache,
                                          const Eigen::MatrixXd& d_out,
                                          MlpGradients& grads) {
  Eigen::MatrixXd d = d_out;
  for (std::size_t l = w.layers.size(); l-- > 0;) {
    if (l + 1 < w.layers.size())
      d = d.cwiseProduct(detail::activation_grad(cache.io[l + 1], w.activation));
    grads.layers[l].W += d.transpose() * cache.io[l];
    grads.layers[l].b += d.colwise().sum().transpose();
    d = (d * w.layers[l].W).eval();
  }
  return d;
}

// ---------------------------------------------------------------------------
// Encoder / decoder pair

/// Encoder maps data rows to R^m; decoder consumes [theta; z] and returns the
/// per-sample log-likelihood estimate.
struct EncoderDecoderPair {
  MlpWeights encoder;
  MlpWeights decoder;
};

struct PairGradients {
  MlpGradients encoder;
  MlpGradients decoder;
};

inline MlpWeights make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                           Activation act, Rng& rng) {
  MlpWeights w;
  w.activation = act;
  std::vector<int> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    MlpLayer layer;
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    layer.W.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) layer.W(r, c) = rng.uniform(-bound, bound);
    layer.b = Eigen::VectorXd::Zero(fan_out);
    w.layers.push_back(std::move(layer));
  }
  return w;
}

/// Default architecture: encoder d -> 64 -> 64 -> m, decoder
/// (p + m) -> 128 -> 64 -> 1.
inline EncoderDecoderPair make_default_pair(const ModelFamily& family, int m,
                                            Activation act, Rng& rng,
                                            const std::vector<int>& encoder_hidden = {64, 64},
                                            const std::vector<int>& decoder_hidden = {128, 64}) {
  EncoderDecoderPair pair;
  pair.encoder = make_mlp(family.data_dim(), encoder_hidden, m, act, rng);
  pair.decoder = make_mlp(family.param_dim() + m, decoder_hidden, 1, act, rng);
  return pair;
}

enum class Objective { pointwise, lr_pair };

inline std::string to_string(Objective o) {
  return o == Objective::pointwise ? "pointwise" : "lr_pair";
}

namespace detail {

struct PairForward {
  MlpBatchCache encoder_cache;
  Eigen::MatrixXd z;       // n x m per-row encodings
  Eigen::VectorXd s;       // mean embedding
  Eigen::Index n = 0;
};

inline PairForward encode_dataset(const EncoderDecoderPair& pair, const Dataset& data) {
  PairForward fwd;
  fwd.n = data.n();
  fwd.z = mlp_forward_batch(pair.encoder, data.rows, &fwd.encoder_cache);
  fwd.s = fwd.z.colwise().mean().transpose();
  return fwd;
}

inline Eigen::VectorXd decoder_input(const ParamVector& theta, const Eigen::VectorXd& s) {
  Eigen::VectorXd u(theta.size() + s.size());
  u << theta, s;
  return u;
}

}  // namespace detail

/// ((1/n) L_n(theta) - h(theta, S))^2 with S the mean of encoder outputs.
inline double pointwise_loss(const EncoderDecoderPair& pair, const ModelFamily& family,
                             const ParamVector& theta, const Dataset& data) {
  const auto fwd = detail::encode_dataset(pair, data);
  const double q =
      mlp_forward(pair.decoder, detail::decoder_input(theta, fwd.s))[0];
  const double t = log_likelihood(family, data, theta) / static_cast<double>(fwd.n);
  return (t - q) * (t - q);
}

/// ((L_n(theta) - L_n(theta')) - (surrogate difference))^2.
inline double lr_pair_loss(const EncoderDecoderPair& pair, const ModelFamily& family,
                           const ParamVector& theta, const ParamVector& theta_prime,
                           const Dataset& data) {
  const auto fwd = detail::encode_dataset(pair, data);
  const double n = static_cast<double>(fwd.n);
  const double q1 = mlp_forward(pair.decoder, detail::decoder_input(theta, fwd.s))[0];
  const double q2 =
      mlp_forward(pair.decoder, detail::decoder_input(theta_prime, fwd.s))[0];
  const double target =
      log_likelihood(family, data, theta) - log_likelihood(family, data, theta_prime);
  const double pred = n * (q1 - q2);
  return (target - pred) * (target - pred);
}

struct BackpropResult {
  double loss = 0.0;
  PairGradients gradients;
};

/// Gradients of the mean loss over a batch of parameter draws sharing one
/// dataset. The encoder pass is shared; each draw adds a decoder pass and a
/// contribution to the embedding gradient, which then flows through the mean
/// aggregation with weight 1/n per row.
inline BackpropResult backprop_batch(const EncoderDecoderPair& pair,
                                     Objective objective, const ModelFamily& family,
                                     std::span<const ParamVector> thetas,
                                     std::span<const ParamVector> thetas_prime,
                                     const Dataset& data) {
  if (thetas.empty()) throw std::invalid_argument("backprop_batch: empty batch");
  if (objective == Objective::lr_pair && thetas_prime.size() != thetas.size())
    throw std::invalid_argument("backprop_batch: lr_pair needs one theta_prime per theta");

  BackpropResult out;
  out.gradients.encoder = zero_gradients(pair.encoder);
  out.gradients.decoder = zero_gradients(pair.decoder);

  auto fwd = detail::encode_dataset(pair, data);
  const double n = static_cast<double>(fwd.n);
  const int m = pair.encoder.output_dim();
  const double inv_b = 1.0 / static_cast<double>(thetas.size());

  Eigen::VectorXd d_s = Eigen::VectorXd::Zero(m);

  for (std::size_t b = 0; b < thetas.size(); ++b) {
    if (objective == Objective::pointwise) {
      MlpBatchCache dec_cache;
      const Eigen::VectorXd u = detail::decoder_input(thetas[b], fwd.s);
      const double q = mlp_forward_batch(pair.decoder, u.transpose(), &dec_cache)(0, 0);
      const double t = log_likelihood(family, data, thetas[b]) / n;
      out.loss += (t - q) * (t - q) * inv_b;
      Eigen::MatrixXd d_q(1, 1);
      d_q(0, 0) = -2.0 * (t - q) * inv_b;
      const Eigen::MatrixXd d_u =
          mlp_backward_batch(pair.decoder, dec_cache, d_q, out.gradients.decoder);
      d_s += d_u.row(0).tail(m).transpose();
    } else {
      MlpBatchCache cache1, cache2;
      const Eigen::VectorXd u1 = detail::decoder_input(thetas[b], fwd.s);
      const Eigen::VectorXd u2 = detail::decoder_input(thetas_prime[b], fwd.s);
      const double q1 = mlp_forward_batch(pair.decoder, u1.transpose(), &cache1)(0, 0);
      const double q2 = mlp_forward_batch(pair.decoder, u2.transpose(), &cache2)(0, 0);
      const double target = log_likelihood(family, data, thetas[b]) -
                            log_likelihood(family, data, thetas_prime[b]);
      const double pred = n * (q1 - q2);
      out.loss += (target - pred) * (target - pred) * inv_b;
      const double d_pred = -2.0 * (target - pred) * inv_b;
      Eigen::MatrixXd d_q1(1, 1), d_q2(1, 1);
      d_q1(0, 0) = d_pred * n;
      d_q2(0, 0) = -d_pred * n;
      const Eigen::MatrixXd d_u1 =
          mlp_backward_batch(pair.decoder, cache1, d_q1, out.gradients.decoder);
      const Eigen::MatrixXd d_u2 =
          mlp_backward_batch(pair.decoder, cache2, d_q2, out.gradients.decoder);
      d_s += d_u1.row(0).tail(m).transpose() + d_u2.row(0).tail(m).transpose();
    }
  }

  // Mean aggregation: every row receives dS / n.
  Eigen::MatrixXd d_z(fwd.z.rows(), fwd.z.cols());
  d_z = (Eigen::VectorXd::Constant(fwd.z.rows(), 1.0 / n) * d_s.transpose());
  mlp_backward_batch(pair.encoder, fwd.encoder_cache, d_z, out.gradients.encoder);
  return out;
}

/// Gradients of the selected loss with respect to every weight and bias for
/// one (theta[, theta']) case.
inline BackpropResult backprop(const EncoderDecoderPair& pair, Objective objective,
                               const ModelFamily& family, const ParamVector& theta,
                               const std::optional<ParamVector>& theta_prime,
                               const Dataset& data) {
  const ParamVector thetas[1] = {theta};
  if (objective == Objective::lr_pair) {
    if (!theta_prime)
      throw std::invalid_argument("backprop: lr_pair objective needs theta_prime");
    const ParamVector primes[1] = {*theta_prime};
    return backprop_batch(pair, objective, family, thetas, primes, data);
  }
  return backprop_batch(pair, objective, family, thetas, {}, data);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const EncoderDecoderPair& pair, AdamConfig cfg) : cfg_(cfg) {
    m_.encoder = zero_gradients(pair.encoder);
    m_.decoder = zero_gradients(pair.decoder);
    v_.encoder = zero_gradients(pair.encoder);
    v_.decoder = zero_gradients(pair.decoder);
  }

  void step(EncoderDecoderPair& pair, const PairGradients& grads) {
    ++t_;
    update_mlp(pair.encoder, grads.encoder, m_.encoder, v_.encoder);
    update_mlp(pair.decoder, grads.decoder, m_.decoder, v_.decoder);
  }

 private:
  void update_mlp(MlpWeights& w, const MlpGradients& g, MlpGradients& m,
                  MlpGradients& v) {
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
      update_tensor(w.layers[l].W, g.layers[l].W, m.layers[l].W, v.layers[l].W, bc1, bc2);
      update_tensor(w.layers[l].b, g.layers[l].b, m.layers[l].b, v.layers[l].b, bc1, bc2);
    }
  }

  template <typename T>
  void update_tensor(T& w, const T& g, T& m, T& v, double bc1, double bc2) {
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = (cfg_.beta2 * v.array() + (1.0 - cfg_.beta2) * g.array().square()).matrix();
    w.array() -=
        cfg_.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
  }

  AdamConfig cfg_;
  PairGradients m_;
  PairGradients v_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Adapters so learned pairs plug into the metrics module

class NeuralEncoder final : public Encoder {
 public:
  explicit NeuralEncoder(MlpWeights weights) : weights_(std::move(weights)) {}
  [[nodiscard]] std::string name() const override { return "neural_encoder"; }
  [[nodiscard]] int output_dim() const override { return weights_.output_dim(); }
  [[nodiscard]] EncoderMode mode() const override { return EncoderMode::per_sample; }
  [[nodiscard]] Eigen::VectorXd encode_row(
      const Eigen::Ref<const Eigen::RowVectorXd>& row) const override {
    return mlp_forward(weights_, row.transpose());
  }
  [[nodiscard]] DatasetEmbedding encode_dataset(const Dataset& data) const override {
    // Batched forward; bit-identical to the row loop up to Eigen's fixed
    // reduction order, which colwise().mean() keeps deterministic.
    const Eigen::MatrixXd z = mlp_forward_batch(weights_, data.rows, nullptr);
    return {z.colwise().mean().transpose(), data.n()};
  }
  [[nodiscard]] const MlpWeights& weights() const { return weights_; }

 private:
  MlpWeights weights_;
};

class NeuralDecoder final : public Decoder {
 public:
  explicit NeuralDecoder(MlpWeights weights) : weights_(std::move(weights)) {}
  [[nodiscard]] std::string name() const override { return "neural_decoder"; }
  [[nodiscard]] double per_sample_log_likelihood(
      const ParamVector& theta, const DatasetEmbedding& S) const override {
    return mlp_forward(weights_, detail::decoder_input(theta, S.s))[0];
  }
  [[nodiscard]] const MlpWeights& weights() const { return weights_; }

 private:
  MlpWeights weights_;
};

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  Objective objective = Objective::pointwise;
  int iterations = 1000;
  AdamConfig adam;
  Eigen::Index n = 100;  // dataset size per draw
  std::vector<ParamVector> theta_pool;
  std::uint64_t seed = 0;
  int checkpoint_every = 100;
  int embedding_dim = 2;
  int theta_batch = 1;  // parameter draws per step, sharing the dataset
  Activation activation = Activation::tanh;
  std::vector<int> encoder_hidden = {64, 64};
  std::vector<int> decoder_hidden = {128, 64};
};

struct TrainLogEntry {
  int iteration = 0;
  double loss = 0.0;          // mean loss since the previous checkpoint
  double eps_heldout = 0.0;   // pointwise error on the held-out dataset
  double delta_heldout = 0.0; // ratio distortion on the held-out dataset
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int iteration, TrainLog partial)
      : std::runtime_error("training diverged (loss is not finite) at iteration " +
                           std::to_string(iteration)),
        iteration(iteration),
        partial_log(std::move(partial)) {}

  int iteration;
  TrainLog partial_log;
};

struct TrainResult {
  EncoderDecoderPair pair;
  TrainLog log;
};

/// Per-checkpoint observer; receives a frozen snapshot of the weights.
using TrainObserver = std::function<void(int iteration, const EncoderDecoderPair&)>;

/// One (theta, fresh dataset) draw and one Adam step per iteration.
/// Deterministic in (config, seed); checkpoints evaluate the pointwise error
/// and ratio distortion on a held-out dataset over `eval_grid`.
inline TrainResult train(const TrainConfig& config, const ModelFamily& family,
                         const ParamVector& theta0, const ThetaGrid& eval_grid,
                         const TrainObserver& observer = nullptr) {
  if (config.iterations < 1)
    throw std::invalid_argument("train: iterations must be >= 1");
  if (config.theta_pool.empty())
    throw std::invalid_argument("train: theta_pool must be nonempty");

  Rng master(config.seed);
  Rng init_rng = master.substream(0);
  Rng data_rng = master.substream(2);

  EncoderDecoderPair pair =
      make_default_pair(family, config.embedding_dim, config.activation, init_rng,
                        config.encoder_hidden, config.decoder_hidden);
  AdamOptimizer opt(pair, config.adam);

  const Dataset heldout =
      sample(family, theta0, config.n, master.substream(1).next_u64());

  TrainResult result;
  double window_loss = 0.0;
  int window_count = 0;

  auto checkpoint = [&](int iteration) {
    NeuralEncoder enc(pair.encoder);
    NeuralDecoder dec(pair.decoder);
    const GridEval ev = evaluate_grid(family, heldout, enc, dec, eval_grid);
    TrainLogEntry entry;
    entry.iteration = iteration;
    entry.loss = window_count > 0 ? window_loss / window_count : 0.0;
    entry.eps_heldout = pointwise_error(ev, eval_grid).epsilon;
    entry.delta_heldout = ratio_distortion(ev, eval_grid).delta;
    result.log.entries.push_back(entry);
    window_loss = 0.0;
    window_count = 0;
    if (observer) observer(iteration, pair);
  };

  const int batch_size = std::max(1, config.theta_batch);
  std::vector<ParamVector> thetas(batch_size), primes;
  if (config.objective == Objective::lr_pair) primes.resize(batch_size);

  for (int it = 1; it <= config.iterations; ++it) {
    for (int b = 0; b < batch_size; ++b) {
      thetas[b] = config.theta_pool[data_rng.uniform_index(config.theta_pool.size())];
      if (config.objective == Objective::lr_pair)
        primes[b] = config.theta_pool[data_rng.uniform_index(config.theta_pool.size())];
    }

    Dataset batch;
    batch.rows = family.sample_rows(theta0, config.n, data_rng);

    const BackpropResult bp =
        backprop_batch(pair, config.objective, family, thetas, primes, batch);
    if (!std::isfinite(bp.loss)) throw TrainingDiverged(it, std::move(result.log));
    opt.step(pair, bp.gradients);

    window_loss += bp.loss;
    ++window_count;
    if (it % config.checkpoint_every == 0 || it == config.iterations) checkpoint(it);
  }

  result.pair = std::move(pair);
  return result;
}

// ---------------------------------------------------------------------------
// Calibration

struct LinearCalibration {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
};

/// Least-squares fit of `true_vals` on `surrogate_vals`, plus Pearson r.
inline LinearCalibration calibrate_linear(std::span<const double> true_vals,
                                          std::span<const double> surrogate_vals) {
  if (true_vals.size() != surrogate_vals.size() || true_vals.size() < 3)
    throw std::invalid_argument("calibrate_linear: need >= 3 paired points");
  const double mx = mean(surrogate_vals);
  const double my = mean(true_vals);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < true_vals.size(); ++i) {
    const double dx = surrogate_vals[i] - mx;
    sxx += dx * dx;
    sxy += dx * (true_vals[i] - my);
  }
  if (sxx == 0.0)
    throw std::invalid_argument("calibrate_linear: zero-variance surrogate input");
  LinearCalibration out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.r = pearson_r(true_vals, surrogate_vals);
  return out;
}

// ---------------------------------------------------------------------------
// Weight persistence

inline nlohmann::json mlp_to_json(const MlpWeights& w) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : w.layers) {
    std::vector<double> values(layer.W.size());
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.W.cols(); ++c)
        values[static_cast<std::size_t>(r * layer.W.cols() + c)] = layer.W(r, c);
    layers.push_back({{"out", layer.W.rows()},
                      {"in", layer.W.cols()},
                      {"weights", values},
                      {"bias", std::vector<double>(layer.b.data(),
                                                   layer.b.data() + layer.b.size())}});
  }
  return {{"activation", to_string(w.activation)}, {"layers", layers}};
}

inline MlpWeights mlp_from_json(const nlohmann::json& j, const std::string& which) {
  MlpWeights w;
  if (!j.contains("activation") || !j.contains("layers") || !j["layers"].is_array())
    throw std::invalid_argument(which + ": missing activation or layers");
  w.activation = activation_from_string(j["activation"].get<std::string>());
  int index = 0;
  for (const auto& lj : j["layers"]) {
    try {
      const auto out = lj.at("out").get<Eigen::Index>();
      const auto in = lj.at("in").get<Eigen::Index>();
      const auto values = lj.at("weights").get<std::vector<double>>();
      const auto bias = lj.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(values.size()) != out * in ||
          static_cast<Eigen::Index>(bias.size()) != out)
        throw std::invalid_argument("shape does not match value count");
      MlpLayer layer;
      layer.W.resize(out, in);
      for (Eigen::Index r = 0; r < out; ++r)
        for (Eigen::Index c = 0; c < in; ++c)
          layer.W(r, c) = values[static_cast<std::size_t>(r * in + c)];
      layer.b = Eigen::Map<const Eigen::VectorXd>(bias.data(), out);
      w.layers.push_back(std::move(layer));
    } catch (const std::exception& e) {
      throw std::invalid_argument(which + " layer " + std::to_string(index) + ": " +
                                  e.what());
    }
    ++index;
  }
  detail::check_chain(w, which.c_str());
  return w;
}

inline void save_weights(const EncoderDecoderPair& pair,
                         const std::filesystem::path& path) {
  nlohmann::json j{{"encoder", mlp_to_json(pair.encoder)},
                   {"decoder", mlp_to_json(pair.decoder)}};
  write_file_atomic(path, j.dump(2) + "\n");
}

inline EncoderDecoderPair load_weights(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("load_weights: " + path.string() +
                                " is not valid JSON: " + e.what());
  }
  if (!j.contains("encoder") || !j.contains("decoder"))
    throw std::invalid_argument("load_weights: missing encoder or decoder section");
  EncoderDecoderPair pair;
  pair.encoder = mlp_from_json(j["encoder"], "encoder");
  pair.decoder = mlp_from_json(j["decoder"], "decoder");
  return pair;
}

}  // namespace lpe
