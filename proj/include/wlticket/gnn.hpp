#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wlticket/errors.hpp"
#include "wlticket/graph.hpp"
#include "wlticket/mask_set.hpp"
#include "wlticket/tensor.hpp"

namespace wlticket {

enum class Activation { relu, leaky_relu, softsign };
enum class Variant { gin, gcn };

inline constexpr double kLeakyAlpha = 0.01;

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::softsign: return "softsign";
  }
  return "?";
}

inline std::string_view to_string(Variant v) { return v == Variant::gin ? "gin" : "gcn"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu" || s == "leaky") return Activation::leaky_relu;
  if (s == "softsign") return Activation::softsign;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

inline Variant parse_variant(std::string_view s) {
  if (s == "gin") return Variant::gin;
  if (s == "gcn") return Variant::gcn;
  throw ConfigError("unknown variant '" + std::string(s) + "'");
}

inline double activate(Activation a, double x) noexcept {
  switch (a) {
    case Activation::relu: return x > 0 ? x : 0.0;
    case Activation::leaky_relu: return x > 0 ? x : kLeakyAlpha * x;
    case Activation::softsign: return x / (1.0 + std::abs(x));
  }
  return x;
}

/// Derivative at pre-activation x. ReLU uses 0 at x == 0.
inline double activate_grad(Activation a, double x) noexcept {
  switch (a) {
    case Activation::relu: return x > 0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return x > 0 ? 1.0 : kLeakyAlpha;
    case Activation::softsign: {
      const double d = 1.0 + std::abs(x);
      return 1.0 / (d * d);
    }
  }
  return 1.0;
}

inline Matrix apply(Activation a, const Matrix& z) {
  Matrix out = z;
  for (double& v : out.values()) v = activate(a, v);
  return out;
}

/// One bias-free dense layer with a fixed binary mask. Masked weights are
/// stored as exact zeros.
class MlpLayer {
 public:
  MlpLayer(Matrix weights, Matrix mask) : weights_(std::move(weights)), mask_(std::move(mask)) {
    detail::require_same_shape(weights_, mask_, "MlpLayer");
    for (double m : mask_.values())
      if (m != 0.0 && m != 1.0) throw DomainError("MlpLayer: mask entries must be 0 or 1");
    enforce_mask();
  }
  explicit MlpLayer(Matrix weights) : MlpLayer(weights, Matrix(weights.rows(), weights.cols(), 1.0)) {}

  std::size_t in() const noexcept { return weights_.rows(); }
  std::size_t out() const noexcept { return weights_.cols(); }
  const Matrix& weights() const noexcept { return weights_; }
  const Matrix& mask() const noexcept { return mask_; }

  /// Mutable weight storage for optimizers; call enforce_mask() after writing.
  Matrix& weights_mut() noexcept { return weights_; }

  void enforce_mask() noexcept {
    auto w = weights_.values();
    auto m = mask_.values();
    for (std::size_t i = 0; i < w.size(); ++i)
      if (m[i] == 0.0) w[i] = 0.0;
  }

  friend bool operator==(const MlpLayer&, const MlpLayer&) = default;

 private:
  Matrix weights_;
  Matrix mask_;
};

struct MpLayer {
  Variant variant = Variant::gin;
  double epsilon = 0.0;
  bool train_epsilon = true;
  std::vector<MlpLayer> mlp;

  std::size_t in() const { return mlp.front().in(); }
  std::size_t out() const { return mlp.back().out(); }

  friend bool operator==(const MpLayer&, const MpLayer&) = default;
};

struct ModelSpec {
  std::size_t input_dim = 0;
  std::size_t num_classes = 2;
  std::size_t mp_layers = 2;
  std::size_t mlp_depth = 2;
  std::size_t hidden = 0;  // 0 means input_dim
  Variant variant = Variant::gin;
  Activation activation = Activation::relu;
  bool train_epsilon = true;
  double epsilon_init = 0.0;

  std::size_t width() const noexcept { return hidden == 0 ? input_dim : hidden; }

  void validate() const {
    if (input_dim == 0) throw ConfigError("model: input_dim must be positive");
    if (num_classes == 0) throw ConfigError("model: num_classes must be positive");
    if (mp_layers == 0) throw ConfigError("model: mp_layers must be positive");
    if (mlp_depth == 0) throw ConfigError("model: mlp_depth must be positive");
  }

  MaskShape mask_shape() const {
    MaskShape s;
    for (std::size_t k = 0; k < mp_layers; ++k) {
      auto& layer = s.emplace_back();
      for (std::size_t j = 0; j < mlp_depth; ++j) {
        const std::size_t in = (k == 0 && j == 0) ? input_dim : width();
        layer.emplace_back(in, width());
      }
    }
    return s;
  }
};

/// Aggregation operator of one message-passing layer, n x n.
inline Matrix aggregation_matrix(const Graph& g, Variant variant, double epsilon) {
  const std::size_t n = g.node_count();
  Matrix agg(n, n, 0.0);
  if (variant == Variant::gin) {
    for (std::size_t v = 0; v < n; ++v) {
      agg(v, v) = 1.0 + epsilon;
      for (std::size_t u : g.neighbors(v)) agg(v, u) += 1.0;
    }
    return agg;
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t v = 0; v < n; ++v) inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));
  for (std::size_t v = 0; v < n; ++v) {
    agg(v, v) = inv_sqrt[v] * inv_sqrt[v];
    for (std::size_t u : g.neighbors(v)) agg(v, u) += inv_sqrt[v] * inv_sqrt[u];
  }
  return agg;
}

struct MlpCache {
  Matrix input;  // rows are nodes
  Matrix z;      // pre-activation
};

struct LayerCache {
  Matrix agg;
  std::vector<MlpCache> mlp;
};

struct ForwardPass {
  std::vector<Matrix> h;  // H^(0) = X, then one per MP layer
  std::vector<LayerCache> layers;
  Matrix readout;  // 1 x readout_dim
  Matrix logits;   // 1 x C
};

struct Gradients {
  std::vector<std::vector<Matrix>> weights;  // [mp][mlp], masked entries exactly 0
  std::vector<double> epsilon;               // one per MP layer; 0 for GCN or frozen
  Matrix classifier;
  Matrix bias;
  std::vector<Matrix> first_dz;  // dL/dZ of the first MLP layer, per MP layer
  double loss = 0.0;

  void scale_by(double s) {
    for (auto& mp : weights)
      for (auto& w : mp) w = scale(w, s);
    for (double& e : epsilon) e *= s;
    classifier = scale(classifier, s);
    bias = scale(bias, s);
    loss *= s;
  }

  /// Accumulates parameter gradients and loss; first_dz is per-graph and not summed.
  void accumulate(const Gradients& o) {
    for (std::size_t k = 0; k < weights.size(); ++k)
      for (std::size_t j = 0; j < weights[k].size(); ++j) add_in_place(weights[k][j], o.weights[k][j]);
    for (std::size_t k = 0; k < epsilon.size(); ++k) epsilon[k] += o.epsilon[k];
    add_in_place(classifier, o.classifier);
    add_in_place(bias, o.bias);
    loss += o.loss;
  }
};

class GnnModel {
 public:
  GnnModel() = default;
  GnnModel(Activation activation, std::vector<MpLayer> layers, Matrix classifier, Matrix bias)
      : activation_(activation), layers_(std::move(layers)), classifier_(std::move(classifier)),
        bias_(std::move(bias)) {
    if (layers_.empty()) throw DomainError("GnnModel: at least one MP layer required");
    std::size_t prev = layers_.front().in();
    for (const auto& l : layers_) {
      if (l.mlp.empty()) throw DomainError("GnnModel: empty MLP");
      for (const auto& m : l.mlp) {
        if (m.in() != prev) throw DomainError("GnnModel: MLP widths do not chain");
        prev = m.out();
      }
    }
    if (classifier_.rows() != readout_dim()) throw DomainError("GnnModel: classifier rows != readout dim");
    if (bias_.rows() != 1 || bias_.cols() != classifier_.cols()) throw DomainError("GnnModel: bias shape");
  }

  /// Random initialization: each weight matrix ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)),
  /// drawn from its own child stream so shapes do not shift other parameters.
  static GnnModel init(const ModelSpec& spec, const Rng& rng) {
    spec.validate();
    const auto shape = spec.mask_shape();
    std::vector<MpLayer> layers;
    for (std::size_t k = 0; k < shape.size(); ++k) {
      MpLayer l;
      l.variant = spec.variant;
      l.epsilon = spec.variant == Variant::gin ? spec.epsilon_init : 0.0;
      l.train_epsilon = spec.variant == Variant::gin && spec.train_epsilon;
      for (std::size_t j = 0; j < shape[k].size(); ++j) {
        auto [in, out] = shape[k][j];
        Rng child = rng.split(1000 * (k + 1) + j);
        l.mlp.emplace_back(uniform_init(in, out, in, child));
      }
      layers.push_back(std::move(l));
    }
    std::size_t rd = spec.input_dim;
    for (const auto& l : layers) rd += l.out();
    Rng cr = rng.split(1);
    Matrix classifier = uniform_init(rd, spec.num_classes, rd, cr);
    Matrix bias = uniform_init(1, spec.num_classes, rd, cr);
    return GnnModel(spec.activation, std::move(layers), std::move(classifier), std::move(bias));
  }

  /// Copy with new masks; weights at newly masked coordinates become 0.
  GnnModel with_masks(const MaskSet& masks) const {
    if (masks.shape() != mask_shape()) throw DomainError("with_masks: mask shape does not match model");
    GnnModel out = *this;
    for (std::size_t k = 0; k < layers_.size(); ++k)
      for (std::size_t j = 0; j < layers_[k].mlp.size(); ++j)
        out.layers_[k].mlp[j] = MlpLayer(layers_[k].mlp[j].weights(), masks.layers[k][j]);
    return out;
  }

  MaskSet masks() const {
    MaskSet m;
    for (const auto& l : layers_) {
      auto& dst = m.layers.emplace_back();
      for (const auto& w : l.mlp) dst.push_back(w.mask());
    }
    return m;
  }

  MaskShape mask_shape() const {
    MaskShape s;
    for (const auto& l : layers_) {
      auto& dst = s.emplace_back();
      for (const auto& w : l.mlp) dst.emplace_back(w.in(), w.out());
    }
    return s;
  }

  Activation activation() const noexcept { return activation_; }
  const std::vector<MpLayer>& layers() const noexcept { return layers_; }
  std::vector<MpLayer>& layers_mut() noexcept { return layers_; }
  const Matrix& classifier() const noexcept { return classifier_; }
  const Matrix& bias() const noexcept { return bias_; }
  Matrix& classifier_mut() noexcept { return classifier_; }
  Matrix& bias_mut() noexcept { return bias_; }
  std::size_t input_dim() const { return layers_.front().in(); }
  std::size_t num_classes() const noexcept { return classifier_.cols(); }

  std::size_t readout_dim() const {
    std::size_t d = input_dim();
    for (const auto& l : layers_) d += l.out();
    return d;
  }

  ForwardPass forward(const Graph& g) const {
    if (g.feature_dim() != input_dim()) throw DomainError("forward: graph feature_dim != model input_dim");
    ForwardPass fp;
    fp.h.push_back(g.features());
    for (const auto& layer : layers_) {
      LayerCache lc;
      lc.agg = aggregation_matrix(g, layer.variant, layer.epsilon);
      Matrix x = matmul(lc.agg, fp.h.back());
      for (const auto& mlp : layer.mlp) {
        Matrix z = matmul(x, mlp.weights());
        Matrix a = apply(activation_, z);
        lc.mlp.push_back({std::move(x), std::move(z)});
        x = std::move(a);
      }
      fp.h.push_back(std::move(x));
      fp.layers.push_back(std::move(lc));
    }
    fp.readout = Matrix(1, readout_dim(), 0.0);
    std::size_t off = 0;
    for (const auto& h : fp.h) {
      const Matrix s = column_sums(h);
      for (std::size_t c = 0; c < s.cols(); ++c) fp.readout(0, off + c) = s(0, c);
      off += h.cols();
    }
    fp.logits = add(matmul(fp.readout, classifier_), bias_);
    return fp;
  }

  /// Reverse-mode gradients of softmax cross-entropy for one graph.
  Gradients backward(const ForwardPass& fp, std::size_t target) const {
    const std::size_t c = num_classes();
    if (target >= c) throw DomainError("backward: target out of range");
    Gradients gr;
    // Softmax cross-entropy.
    double mx = fp.logits(0, 0);
    for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, fp.logits(0, i));
    double denom = 0.0;
    for (std::size_t i = 0; i < c; ++i) denom += std::exp(fp.logits(0, i) - mx);
    Matrix dlogits(1, c, 0.0);
    for (std::size_t i = 0; i < c; ++i) dlogits(0, i) = std::exp(fp.logits(0, i) - mx) / denom;
    gr.loss = -(fp.logits(0, target) - mx - std::log(denom));
    dlogits(0, target) -= 1.0;

    gr.classifier = matmul_tn(fp.readout, dlogits);
    gr.bias = dlogits;
    const Matrix dread = matmul_nt(dlogits, classifier_);

    const std::size_t K = layers_.size();
    gr.weights.resize(K);
    gr.epsilon.assign(K, 0.0);
    gr.first_dz.resize(K);

    std::vector<std::size_t> offsets(K + 1, 0);
    for (std::size_t k = 0; k < K; ++k) offsets[k + 1] = offsets[k] + fp.h[k].cols();

    // dH^(K) starts as the broadcast readout gradient of that segment.
    auto readout_grad = [&](std::size_t k) {
      const Matrix& h = fp.h[k];
      Matrix d(h.rows(), h.cols(), 0.0);
      for (std::size_t v = 0; v < h.rows(); ++v)
        for (std::size_t j = 0; j < h.cols(); ++j) d(v, j) = dread(0, offsets[k] + j);
      return d;
    };

    Matrix dh = readout_grad(K);
    for (std::size_t kk = K; kk-- > 0;) {
      const MpLayer& layer = layers_[kk];
      const LayerCache& lc = fp.layers[kk];
      const std::size_t depth = layer.mlp.size();
      gr.weights[kk].resize(depth);
      Matrix da = std::move(dh);
      for (std::size_t j = depth; j-- > 0;) {
        const MlpCache& mc = lc.mlp[j];
        Matrix dz = da;
        {
          auto dv = dz.values();
          auto zv = mc.z.values();
          for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= activate_grad(activation_, zv[i]);
        }
        gr.weights[kk][j] = hadamard(matmul_tn(mc.input, dz), layer.mlp[j].mask());
        da = matmul_nt(dz, layer.mlp[j].weights());
        if (j == 0) gr.first_dz[kk] = std::move(dz);
      }
      // da now holds dL/dU for U = Agg * H^(k-1).
      const Matrix& hprev = fp.h[kk];
      if (layer.variant == Variant::gin && layer.train_epsilon) gr.epsilon[kk] = frobenius_inner(hprev, da);
      if (kk > 0) {
        dh = matmul_tn(lc.agg, da);
        add_in_place(dh, readout_grad(kk));
      }
    }
    return gr;
  }

  double loss(const Graph& g, std::size_t target) const {
    const ForwardPass fp = forward(g);
    const std::size_t c = num_classes();
    double mx = fp.logits(0, 0);
    for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, fp.logits(0, i));
    double denom = 0.0;
    for (std::size_t i = 0; i < c; ++i) denom += std::exp(fp.logits(0, i) - mx);
    return -(fp.logits(0, target) - mx - std::log(denom));
  }

  /// Argmax of logits; ties go to the lower class index.
  std::size_t predict(const Graph& g) const {
    const Matrix logits = forward(g).logits;
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.cols(); ++i)
      if (logits(0, i) > logits(0, best)) best = i;
    return best;
  }

  friend bool operator==(const GnnModel&, const GnnModel&) = default;

 private:
  Activation activation_ = Activation::relu;
  std::vector<MpLayer> layers_;
  Matrix classifier_;
  Matrix bias_;
};

/// Zero gradients shaped like the model's parameters.
inline Gradients zero_gradients(const GnnModel& m) {
  Gradients g;
  for (const auto& l : m.layers()) {
    auto& dst = g.weights.emplace_back();
    for (const auto& w : l.mlp) dst.emplace_back(w.in(), w.out(), 0.0);
  }
  g.epsilon.assign(m.layers().size(), 0.0);
  g.classifier = Matrix(m.classifier().rows(), m.classifier().cols(), 0.0);
  g.bias = Matrix(1, m.num_classes(), 0.0);
  return g;
}

}  // namespace wlticket
