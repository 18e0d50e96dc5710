#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "msse/emotion.hpp"
#include "msse/error.hpp"
#include "msse/rng.hpp"

namespace msse {

enum class MlpVariant : std::uint8_t { Base = 0, Deep = 1, Custom = 2 };

inline std::string_view to_string(MlpVariant v) {
  switch (v) {
    case MlpVariant::Base: return "base";
    case MlpVariant::Deep: return "deep";
    case MlpVariant::Custom: return "custom";
  }
  return "?";
}

inline constexpr std::array<std::size_t, 3> kDeepHidden = {4096, 1024, 256};
inline constexpr double kDeepDropout = 0.2;

struct MLPConfig {
  MlpVariant variant = MlpVariant::Deep;
  std::size_t input_dim = 300;
  std::size_t output_dim = kEmotionDims;
  std::vector<std::size_t> hidden;  // widths of the ReLU layers
  std::vector<double> dropout;      // rate applied after each hidden layer, 0 = none
  std::size_t patience = 30;
  std::size_t max_epochs = 1000;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;

  /// Linear map input -> 26.
  static MLPConfig base(std::size_t input_dim = 300) {
    MLPConfig c;
    c.variant = MlpVariant::Base;
    c.input_dim = input_dim;
    return c;
  }

  /// input -> 4096 -> dropout -> 1024 -> dropout -> 256 -> 26.
  static MLPConfig deep(std::size_t input_dim = 300) {
    MLPConfig c;
    c.variant = MlpVariant::Deep;
    c.input_dim = input_dim;
    c.hidden.assign(kDeepHidden.begin(), kDeepHidden.end());
    c.dropout = {kDeepDropout, kDeepDropout, 0.0};
    return c;
  }

  /// Arbitrary hidden widths; used for scaled-down copies of Deep in tests.
  static MLPConfig custom(std::size_t input_dim, std::vector<std::size_t> hidden, std::vector<double> dropout) {
    MLPConfig c;
    c.variant = MlpVariant::Custom;
    c.input_dim = input_dim;
    c.hidden = std::move(hidden);
    c.dropout = std::move(dropout);
    return c;
  }

  /// Switches variant, resetting the layer layout and keeping training knobs.
  void set_variant(MlpVariant v) {
    variant = v;
    if (v == MlpVariant::Base) {
      hidden.clear();
      dropout.clear();
    } else if (v == MlpVariant::Deep) {
      hidden.assign(kDeepHidden.begin(), kDeepHidden.end());
      dropout = {kDeepDropout, kDeepDropout, 0.0};
    }
  }

  void validate() const {
    if (input_dim == 0) throw Error("mlp input dim must be >= 1");
    if (output_dim != kEmotionDims) throw Error("mlp output dim must be 26");
    if (dropout.size() != hidden.size()) throw Error("mlp needs one dropout rate per hidden layer");
    for (double p : dropout) {
      if (!(p >= 0.0 && p < 1.0)) throw Error("dropout must be in [0,1)");
    }
    for (auto h : hidden) {
      if (h == 0) throw Error("hidden width must be >= 1");
    }
    if (variant == MlpVariant::Base && !hidden.empty()) throw Error("base variant has no hidden layers");
    if (variant == MlpVariant::Deep &&
        !std::equal(hidden.begin(), hidden.end(), kDeepHidden.begin(), kDeepHidden.end())) {
      throw Error("deep variant hidden layers must be 4096, 1024, 256");
    }
    if (batch_size == 0) throw Error("batch size must be >= 1");
    if (max_epochs == 0) throw Error("max epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  }
};

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using ColVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// Loss

inline constexpr double kFvuVarianceFloor = 1e-12;

/// Mean over output dimensions of SS_res / SS_tot, with columns as samples.
/// A dimension whose target variance is below 1e-12 contributes its MSE
/// instead. When grad is non-null it receives d loss / d pred.
template <typename Real>
Real fvu_loss(const Matrix<Real>& pred, const Matrix<Real>& target, Matrix<Real>* grad = nullptr) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw Error("fvu_loss: shape mismatch");
  const Eigen::Index n = target.cols();
  const Eigen::Index dims = target.rows();
  if (n < 2) throw Error("fvu_loss: batch size must be >= 2");
  if (grad) grad->resize(pred.rows(), pred.cols());
  Real total = 0;
  for (Eigen::Index j = 0; j < dims; ++j) {
    const Real mean = target.row(j).mean();
    const Real ss_tot = (target.row(j).array() - mean).square().sum();
    const auto diff = (pred.row(j) - target.row(j)).eval();
    const Real ss_res = diff.squaredNorm();
    const bool constant = ss_tot / Real(n) < Real(kFvuVarianceFloor);
    const Real denom = constant ? Real(n) : ss_tot;
    total += ss_res / denom;
    if (grad) grad->row(j) = diff * (Real(2) / (denom * Real(dims)));
  }
  return total / Real(dims);
}

// ---------------------------------------------------------------------------
// Model

template <typename Real>
struct DenseLayer {
  Matrix<Real> weight;  // out x in
  ColVector<Real> bias;
  bool relu = false;
  double dropout = 0.0;
};

template <typename Real>
struct LayerGrad {
  Matrix<Real> weight;
  ColVector<Real> bias;
};

/// Activations recorded by a training-mode forward pass.
template <typename Real>
struct ForwardCache {
  std::vector<Matrix<Real>> inputs;  // input to each layer
  std::vector<Matrix<Real>> pre;     // affine output of each layer
  std::vector<Matrix<Real>> masks;   // scaled dropout mask, empty when unused
};

template <typename Real>
class Mlp {
 public:
  Mlp() = default;

  /// He-uniform weights for ReLU layers, Glorot-uniform for the output layer,
  /// zero biases.
  explicit Mlp(const MLPConfig& cfg) : config_(cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, "mlp-init"));
    std::size_t in = cfg.input_dim;
    for (std::size_t l = 0; l <= cfg.hidden.size(); ++l) {
      const bool last = l == cfg.hidden.size();
      const std::size_t out = last ? cfg.output_dim : cfg.hidden[l];
      DenseLayer<Real> layer;
      layer.relu = !last;
      layer.dropout = last ? 0.0 : cfg.dropout[l];
      const double limit = last ? std::sqrt(6.0 / double(in + out)) : std::sqrt(6.0 / double(in));
      layer.weight.resize(out, in);
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
          layer.weight(r, c) = static_cast<Real>(rng.uniform(-limit, limit));
        }
      }
      layer.bias = ColVector<Real>::Zero(out);
      layers_.push_back(std::move(layer));
      in = out;
    }
  }

  const MLPConfig& config() const { return config_; }
  std::vector<DenseLayer<Real>>& layers() { return layers_; }
  const std::vector<DenseLayer<Real>>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  bool finite() const {
    for (const auto& l : layers_) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  /// Eval-mode forward on a batch (columns are samples); no dropout.
  Matrix<Real> forward(const Matrix<Real>& x) const {
    check_input(x.rows());
    Matrix<Real> a = x;
    for (const auto& l : layers_) {
      Matrix<Real> z = (l.weight * a).colwise() + l.bias;
      a = l.relu ? Matrix<Real>(z.cwiseMax(Real(0))) : std::move(z);
    }
    return a;
  }

  /// Train-mode forward with inverted dropout: kept units are scaled by
  /// 1/(1-p). Records what backward() needs when cache is non-null.
  Matrix<Real> forward_train(const Matrix<Real>& x, Rng& rng, ForwardCache<Real>* cache = nullptr) const {
    check_input(x.rows());
    if (cache) *cache = {};
    Matrix<Real> a = x;
    for (const auto& l : layers_) {
      if (cache) cache->inputs.push_back(a);
      Matrix<Real> z = (l.weight * a).colwise() + l.bias;
      a = l.relu ? Matrix<Real>(z.cwiseMax(Real(0))) : z;
      Matrix<Real> mask;
      if (l.dropout > 0.0) {
        mask.resize(a.rows(), a.cols());
        const Real scale = Real(1.0 / (1.0 - l.dropout));
        for (Eigen::Index i = 0; i < mask.size(); ++i) {
          mask.data()[i] = rng.uniform() < l.dropout ? Real(0) : scale;
        }
        a = a.cwiseProduct(mask);
      }
      if (cache) {
        cache->pre.push_back(std::move(z));
        cache->masks.push_back(std::move(mask));
      }
    }
    return a;
  }

  /// Backpropagates d loss / d output through a recorded forward pass.
  std::vector<LayerGrad<Real>> backward(const ForwardCache<Real>& cache, const Matrix<Real>& grad_out) const {
    std::vector<LayerGrad<Real>> grads(layers_.size());
    Matrix<Real> g = grad_out;
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& l = layers_[li];
      if (cache.masks[li].size() > 0) g = g.cwiseProduct(cache.masks[li]);
      if (l.relu) g = g.cwiseProduct((cache.pre[li].array() > Real(0)).template cast<Real>().matrix());
      grads[li].weight.noalias() = g * cache.inputs[li].transpose();
      grads[li].bias = g.rowwise().sum();
      if (li > 0) g = l.weight.transpose() * g;
    }
    return grads;
  }

 private:
  void check_input(Eigen::Index rows) const {
    if (static_cast<std::size_t>(rows) != config_.input_dim) {
      throw Error("mlp input has dimension " + std::to_string(rows) + ", expected " +
                  std::to_string(config_.input_dim));
    }
  }

  MLPConfig config_;
  std::vector<DenseLayer<Real>> layers_;
};

using MLPModel = Mlp<float>;

/// Eval-mode prediction for one input vector.
template <typename Real>
RawScores predict(const Mlp<Real>& m, std::span<const Real> x) {
  Matrix<Real> in = Eigen::Map<const Matrix<Real>>(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  const Matrix<Real> out = m.forward(in);
  RawScores r{};
  for (std::size_t j = 0; j < kEmotionDims; ++j) r[j] = static_cast<double>(out(static_cast<Eigen::Index>(j), 0));
  return r;
}

// ---------------------------------------------------------------------------
// Training

/// Stops after `patience` consecutive epochs without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when this epoch is the new best.
  bool observe(std::size_t epoch, double loss) {
    if (loss < best_) {
      best_ = loss;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return stale_ >= patience_; }
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
};

struct TrainReport {
  std::size_t epochs_run = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;  // 1-based
  std::vector<double> train_loss;
  std::vector<double> val_loss;
};

template <typename Real>
struct Dataset {
  Matrix<Real> x;  // input_dim x n
  Matrix<Real> y;  // 26 x n

  Eigen::Index size() const { return x.cols(); }
};

template <typename Real>
class Adam {
 public:
  Adam(const Mlp<Real>& m, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& l : m.layers()) {
      m_.push_back({Matrix<Real>::Zero(l.weight.rows(), l.weight.cols()), ColVector<Real>::Zero(l.bias.size())});
      v_.push_back({Matrix<Real>::Zero(l.weight.rows(), l.weight.cols()), ColVector<Real>::Zero(l.bias.size())});
    }
  }

  void step(Mlp<Real>& model, const std::vector<LayerGrad<Real>>& grads) {
    ++t_;
    const Real b1 = Real(beta1_), b2 = Real(beta2_);
    const Real c1 = Real(1.0 - std::pow(beta1_, double(t_)));
    const Real c2 = Real(1.0 - std::pow(beta2_, double(t_)));
    const Real lr = Real(lr_), eps = Real(eps_);
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = b1 * m + (Real(1) - b1) * g;
      v = b2 * v + (Real(1) - b2) * g.cwiseProduct(g);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    auto& layers = model.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      update(layers[i].weight, m_[i].weight, v_[i].weight, grads[i].weight);
      update(layers[i].bias, m_[i].bias, v_[i].bias, grads[i].bias);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<LayerGrad<Real>> m_, v_;
};

namespace detail {

/// Minibatch boundaries; a trailing batch of one sample is merged into the
/// previous batch because the loss needs at least two.
inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch) out.emplace_back(b, std::min(n, b + batch));
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

}  // namespace detail

template <typename Real>
struct TrainedMlp {
  Mlp<Real> model;
  TrainReport report;
};

/// Adam minimisation of the FVU loss; validation loss is evaluated in eval
/// mode after every epoch and the best-validation parameters are returned.
template <typename Real>
TrainedMlp<Real> train_mlp(const MLPConfig& cfg, const Dataset<Real>& train, const Dataset<Real>& val) {
  cfg.validate();
  if (train.size() < 2) throw Error("training set needs at least 2 samples");
  if (val.size() < 2) throw Error("validation set needs at least 2 samples");
  for (const auto* d : {&train, &val}) {
    if (static_cast<std::size_t>(d->x.rows()) != cfg.input_dim || d->y.rows() != Eigen::Index(cfg.output_dim) ||
        d->x.cols() != d->y.cols()) {
      throw Error("dataset dimensions do not match the mlp config");
    }
  }

  TrainedMlp<Real> out{Mlp<Real>(cfg), {}};
  Mlp<Real> model = out.model;
  Adam<Real> adam(model, cfg.learning_rate);
  Rng rng(derive_seed(cfg.seed, "mlp-train"));
  EarlyStopping stop(cfg.patience);

  const auto n = static_cast<std::size_t>(train.size());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto ranges = detail::batch_ranges(n, cfg.batch_size);
  ForwardCache<Real> cache;
  Matrix<Real> xb, yb, grad;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    double train_loss = 0.0;
    for (auto [b, e] : ranges) {
      const auto m = static_cast<Eigen::Index>(e - b);
      xb.resize(train.x.rows(), m);
      yb.resize(train.y.rows(), m);
      for (Eigen::Index k = 0; k < m; ++k) {
        xb.col(k) = train.x.col(order[b + k]);
        yb.col(k) = train.y.col(order[b + k]);
      }
      const Matrix<Real> pred = model.forward_train(xb, rng, &cache);
      const Real loss = fvu_loss<Real>(pred, yb, &grad);
      if (!std::isfinite(double(loss))) {
        throw Error("non-finite training loss at epoch " + std::to_string(epoch));
      }
      train_loss += double(loss) * double(m);
      adam.step(model, model.backward(cache, grad));
    }
    train_loss /= double(n);
    const double val_loss = double(fvu_loss<Real>(model.forward(val.x), val.y));
    if (!std::isfinite(val_loss)) throw Error("non-finite validation loss at epoch " + std::to_string(epoch));
    out.report.train_loss.push_back(train_loss);
    out.report.val_loss.push_back(val_loss);
    out.report.epochs_run = epoch;
    if (stop.observe(epoch, val_loss)) out.model = model;
    if (stop.should_stop()) break;
  }
  out.report.best_val_loss = stop.best();
  out.report.best_epoch = stop.best_epoch();
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint: "EMLP" magic, version byte, config echo, then per layer its
// shape and row-major weights followed by the bias. All integers and floats
// are little-endian; parameters are stored as 32-bit floats.

inline constexpr char kCheckpointMagic[4] = {'E', 'M', 'L', 'P'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), sizeof(T))) throw Error("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

template <typename Real>
void save_model(const Mlp<Real>& m, std::ostream& out) {
  using detail::put_le;
  const auto& c = m.config();
  out.write(kCheckpointMagic, 4);
  put_le<std::uint8_t>(out, kCheckpointVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(c.variant));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.input_dim));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.output_dim));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.hidden.size()));
  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.hidden[i]));
    put_le<double>(out, c.dropout[i]);
  }
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.patience));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.max_epochs));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.batch_size));
  put_le<double>(out, c.learning_rate);
  put_le<std::uint64_t>(out, c.seed);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.layers().size()));
  for (const auto& l : m.layers()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.cols()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index k = 0; k < l.weight.cols(); ++k) put_le<float>(out, static_cast<float>(l.weight(r, k)));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_le<float>(out, static_cast<float>(l.bias(r)));
  }
}

template <typename Real = float>
Mlp<Real> load_model(std::istream& in) {
  using detail::get_le;
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kCheckpointMagic)) {
    throw Error("checkpoint: bad magic header");
  }
  if (const auto v = get_le<std::uint8_t>(in); v != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(v));
  }
  MLPConfig c;
  const auto variant = get_le<std::uint8_t>(in);
  if (variant > 2) throw Error("checkpoint: bad variant");
  c.variant = static_cast<MlpVariant>(variant);
  c.input_dim = get_le<std::uint32_t>(in);
  c.output_dim = get_le<std::uint32_t>(in);
  const auto nh = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nh; ++i) {
    c.hidden.push_back(get_le<std::uint32_t>(in));
    c.dropout.push_back(get_le<double>(in));
  }
  c.patience = get_le<std::uint32_t>(in);
  c.max_epochs = get_le<std::uint32_t>(in);
  c.batch_size = get_le<std::uint32_t>(in);
  c.learning_rate = get_le<double>(in);
  c.seed = get_le<std::uint64_t>(in);
  Mlp<Real> m(c);
  if (get_le<std::uint32_t>(in) != m.layers().size()) throw Error("checkpoint: layer count mismatch");
  for (auto& l : m.layers()) {
    const auto rows = get_le<std::uint32_t>(in);
    const auto cols = get_le<std::uint32_t>(in);
    if (rows != l.weight.rows() || cols != l.weight.cols()) throw Error("checkpoint: layer shape mismatch");
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index k = 0; k < l.weight.cols(); ++k) l.weight(r, k) = static_cast<Real>(get_le<float>(in));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = static_cast<Real>(get_le<float>(in));
  }
  if (!m.finite()) throw Error("checkpoint: non-finite parameters");
  return m;
}

template <typename Real>
void save_model_file(const Mlp<Real>& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file " + path.string());
  save_model(m, out);
  if (!out) throw Error("write failure on " + path.string());
}

template <typename Real = float>
Mlp<Real> load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file " + path.string());
  return load_model<Real>(in);
}

}  // namespace msse
