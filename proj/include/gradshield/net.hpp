#pragma once

#include "gradshield/common.hpp"
#include "gradshield/linalg.hpp"
#include "gradshield/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace gradshield {

// Tag values are the on-disk encoding, do not reorder.
enum class Activation : std::uint8_t {
  kRelu = 0,
  kLinear = 1,
  kSigmoid = 2,
  kSoftmax = 3,
};

enum class LossKind { kCrossEntropy, kMse };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kLinear: return "linear";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftmax: return "softmax";
  }
  return "?";
}

struct LayerSpec {
  Index in_dim = 0;
  Index out_dim = 0;
  Activation activation = Activation::kLinear;
};

// in/out dims must chain; softmax only as the final layer.
inline void validate_layer_chain(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw ShapeError("model: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in_dim < 1 || l.out_dim < 1) {
      throw ShapeError("layer " + std::to_string(i) + ": bad dims " +
                       shape_str(l.in_dim, l.out_dim));
    }
    if (i + 1 < layers.size()) {
      if (l.out_dim != layers[i + 1].in_dim) {
        throw ShapeError("layer " + std::to_string(i) + " out_dim " +
                         std::to_string(l.out_dim) + " != layer " +
                         std::to_string(i + 1) + " in_dim " +
                         std::to_string(layers[i + 1].in_dim));
      }
      if (l.activation == Activation::kSoftmax) {
        throw ShapeError("softmax is only permitted as the final layer");
      }
    }
  }
}

// Fully connected feed-forward network. Weights are (in_dim x out_dim),
// biases are row vectors; a batch is one sample per row.
template <class S>
struct MlpModel {
  std::vector<LayerSpec> layers;
  std::vector<Mat<S>> weights;
  std::vector<RowVec<S>> biases;

  Index input_dim() const { return layers.front().in_dim; }
  Index output_dim() const { return layers.back().out_dim; }
  std::size_t layer_count() const { return layers.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      n += static_cast<std::size_t>(weights[i].size() + biases[i].size());
    }
    return n;
  }

  template <class T>
  MlpModel<T> cast() const {
    MlpModel<T> out;
    out.layers = layers;
    out.weights.reserve(weights.size());
    out.biases.reserve(biases.size());
    for (const auto& w : weights) out.weights.push_back(w.template cast<T>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<T>());
    return out;
  }
};

// Glorot-uniform weights, zero biases.
template <class S>
MlpModel<S> make_mlp(std::vector<LayerSpec> layers, Rng& rng) {
  validate_layer_chain(layers);
  MlpModel<S> m;
  m.layers = std::move(layers);
  m.weights.reserve(m.layers.size());
  m.biases.reserve(m.layers.size());
  for (const auto& l : m.layers) {
    m.weights.push_back(glorot_init<S>(l.in_dim, l.out_dim, rng));
    m.biases.push_back(RowVec<S>::Zero(l.out_dim));
  }
  return m;
}

namespace detail {

// Row-stabilized softmax (max subtraction before exp).
template <class S>
Mat<S> softmax_rows(Mat<S> z) {
  const auto row_max = z.rowwise().maxCoeff().eval();
  z.colwise() -= row_max;
  Mat<S> e = z.array().exp();
  const auto row_sum = e.rowwise().sum().eval();
  e.array().colwise() /= row_sum.array();
  return e;
}

template <class S>
Mat<S> apply_activation(Activation act, Mat<S>&& z) {
  switch (act) {
    case Activation::kRelu:
      return z.cwiseMax(S(0));
    case Activation::kLinear:
      return std::move(z);
    case Activation::kSigmoid:
      return (S(1) / (S(1) + (-z.array()).exp())).matrix();
    case Activation::kSoftmax:
      return softmax_rows(std::move(z));
  }
  return std::move(z);
}

// Chain rule through an activation given its output `a` and upstream `da`.
template <class S>
Mat<S> activation_backward(Activation act, const Mat<S>& a, const Mat<S>& da) {
  switch (act) {
    case Activation::kRelu:
      return (da.array() * (a.array() > S(0)).template cast<S>()).matrix();
    case Activation::kLinear:
      return da;
    case Activation::kSigmoid:
      return (da.array() * a.array() * (S(1) - a.array())).matrix();
    case Activation::kSoftmax: {
      // Full Jacobian: dz = a .* (da - rowsum(da .* a)).
      const auto dot = (da.array() * a.array()).rowwise().sum().eval();
      Mat<S> dz = da;
      dz.array().colwise() -= dot.array();
      dz.array() *= a.array();
      return dz;
    }
  }
  return da;
}

}  // namespace detail

// Per-layer outputs; activations[0] is the input, activations[i+1] the output
// of layer i. Kept so backprop can reuse a single forward pass.
template <class S>
struct ForwardCache {
  std::vector<Mat<S>> activations;
  const Mat<S>& output() const { return activations.back(); }
};

template <class S>
ForwardCache<S> forward_cached(const MlpModel<S>& model, const Mat<S>& x) {
  if (x.cols() != model.input_dim()) {
    throw ShapeError("forward: input is " + shape_str(x) + ", model expects " +
                     std::to_string(model.input_dim()) + " columns");
  }
  ForwardCache<S> cache;
  cache.activations.reserve(model.layer_count() + 1);
  cache.activations.push_back(x);
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    Mat<S> z = cache.activations.back() * model.weights[i];
    z.rowwise() += model.biases[i];
    cache.activations.push_back(
        detail::apply_activation(model.layers[i].activation, std::move(z)));
  }
  return cache;
}

template <class S>
Mat<S> forward(const MlpModel<S>& model, const Mat<S>& x) {
  return forward_cached(model, x).output();
}

// Cross-entropy clamps predictions to [1e-12, 1] before the log so a
// confident mistake stays finite.
template <class S>
S loss(LossKind kind, const Mat<S>& prediction, const Mat<S>& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols()) {
    throw ShapeError("loss: prediction " + shape_str(prediction) +
                     " vs target " + shape_str(target));
  }
  const S n = static_cast<S>(prediction.rows());
  switch (kind) {
    case LossKind::kCrossEntropy: {
      const auto clamped =
          prediction.array().max(S(1e-12)).min(S(1)).log();
      return -(target.array() * clamped).sum() / n;
    }
    case LossKind::kMse:
      return (prediction - target).squaredNorm() /
             (n * static_cast<S>(prediction.cols()));
  }
  return S(0);
}

template <class S>
struct Gradients {
  std::vector<Mat<S>> weight_grads;
  std::vector<RowVec<S>> bias_grads;
  Mat<S> input_grad;
};

namespace detail {

// Shared delta propagation for backward()/input_gradient(). The loss is the
// mean batch loss; deltas are with respect to pre-activations.
template <class S>
Gradients<S> backprop(const MlpModel<S>& model, const ForwardCache<S>& cache,
                      const Mat<S>& target, LossKind kind, bool want_params) {
  const Mat<S>& output = cache.output();
  if (output.rows() != target.rows() || output.cols() != target.cols()) {
    throw ShapeError("backward: output " + shape_str(output) + " vs target " +
                     shape_str(target));
  }
  const S n = static_cast<S>(output.rows());
  const std::size_t last = model.layer_count() - 1;

  Mat<S> delta;  // dL/dz of the current layer
  if (kind == LossKind::kCrossEntropy &&
      model.layers[last].activation == Activation::kSoftmax) {
    delta = (output - target) / n;
  } else {
    Mat<S> d_out;
    if (kind == LossKind::kCrossEntropy) {
      d_out = (-target.array() / (output.array().max(S(1e-12)).min(S(1)) * n))
                  .matrix();
    } else {
      d_out = (output - target) * (S(2) / (n * static_cast<S>(output.cols())));
    }
    delta = activation_backward(model.layers[last].activation, output, d_out);
  }

  Gradients<S> grads;
  if (want_params) {
    grads.weight_grads.resize(model.layer_count());
    grads.bias_grads.resize(model.layer_count());
  }
  for (std::size_t i = model.layer_count(); i-- > 0;) {
    if (want_params) {
      grads.weight_grads[i] = cache.activations[i].transpose() * delta;
      grads.bias_grads[i] = delta.colwise().sum();
    }
    Mat<S> d_prev = delta * model.weights[i].transpose();
    if (i == 0) {
      grads.input_grad = std::move(d_prev);
    } else {
      delta = activation_backward(model.layers[i - 1].activation,
                                  cache.activations[i], d_prev);
    }
  }
  return grads;
}

}  // namespace detail

// Gradients of the mean batch loss with respect to every weight, every bias,
// and the input batch itself.
template <class S>
Gradients<S> backward(const MlpModel<S>& model, const Mat<S>& x,
                      const Mat<S>& target, LossKind kind) {
  return detail::backprop(model, forward_cached(model, x), target, kind, true);
}

// Input gradient only; skips the parameter-gradient products.
template <class S>
Mat<S> input_gradient(const MlpModel<S>& model, const Mat<S>& x,
                      const Mat<S>& target, LossKind kind) {
  return detail::backprop(model, forward_cached(model, x), target, kind, false)
      .input_grad;
}

struct TrainConfig {
  Index epochs = 100;
  Index batch_size = 200;
  double learning_rate = 0.001;
  LossKind loss = LossKind::kCrossEntropy;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
    if (!(adam_beta1 > 0 && adam_beta1 < 1) ||
        !(adam_beta2 > 0 && adam_beta2 < 1)) {
      throw ConfigError("train: betas must lie in (0, 1)");
    }
  }
};

template <class S>
struct AdamState {
  std::vector<Mat<S>> m_weights, v_weights;
  std::vector<RowVec<S>> m_biases, v_biases;
  std::int64_t t = 0;

  static AdamState zeros_like(const MlpModel<S>& model) {
    AdamState st;
    for (std::size_t i = 0; i < model.layer_count(); ++i) {
      st.m_weights.push_back(Mat<S>::Zero(model.weights[i].rows(), model.weights[i].cols()));
      st.v_weights.push_back(Mat<S>::Zero(model.weights[i].rows(), model.weights[i].cols()));
      st.m_biases.push_back(RowVec<S>::Zero(model.biases[i].size()));
      st.v_biases.push_back(RowVec<S>::Zero(model.biases[i].size()));
    }
    return st;
  }
};

namespace detail {

template <class S, class P, class G>
void adam_update(P& param, G& m, G& v, const G& grad, S lr, S beta1, S beta2,
                 S eps, S bc1, S bc2) {
  m = beta1 * m + (S(1) - beta1) * grad;
  v = (beta2 * v.array() + (S(1) - beta2) * grad.array().square()).matrix();
  param.array() -=
      lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace detail

// One Adam step with bias-corrected moment estimates.
template <class S>
void adam_step(MlpModel<S>& model, const Gradients<S>& grads,
               AdamState<S>& state, const TrainConfig& cfg) {
  cfg.validate();
  if (grads.weight_grads.size() != model.layer_count()) {
    throw ShapeError("adam_step: gradient/model layer count mismatch");
  }
  state.t += 1;
  const S beta1 = static_cast<S>(cfg.adam_beta1);
  const S beta2 = static_cast<S>(cfg.adam_beta2);
  const S lr = static_cast<S>(cfg.learning_rate);
  const S eps = static_cast<S>(cfg.adam_epsilon);
  const S bc1 = S(1) - static_cast<S>(std::pow(cfg.adam_beta1, static_cast<double>(state.t)));
  const S bc2 = S(1) - static_cast<S>(std::pow(cfg.adam_beta2, static_cast<double>(state.t)));
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    detail::adam_update(model.weights[i], state.m_weights[i], state.v_weights[i],
                        grads.weight_grads[i], lr, beta1, beta2, eps, bc1, bc2);
    detail::adam_update(model.biases[i], state.m_biases[i], state.v_biases[i],
                        grads.bias_grads[i], lr, beta1, beta2, eps, bc1, bc2);
  }
}

struct TrainResult {
  std::vector<double> epoch_losses;  // mean training loss per epoch
  double seconds = 0;                // optimization loop only
};

// Mini-batch Adam over (inputs, targets). Shuffles each epoch with a
// generator seeded from cfg.seed; the remainder batch is trained on. The
// clock runs around the optimization loop only.
template <class S>
TrainResult train(MlpModel<S>& model, const Mat<S>& inputs,
                  const Mat<S>& targets, const TrainConfig& cfg) {
  cfg.validate();
  const Index n = inputs.rows();
  if (n == 0) throw DataError("train: empty dataset");
  if (inputs.rows() != targets.rows()) {
    throw ShapeError("train: inputs " + shape_str(inputs) + " vs targets " +
                     shape_str(targets));
  }
  if (cfg.batch_size > n) {
    throw ConfigError("train: batch_size " + std::to_string(cfg.batch_size) +
                      " exceeds dataset size " + std::to_string(n));
  }

  Rng shuffle_rng(cfg.seed);
  AdamState<S> state = AdamState<S>::zeros_like(model);
  TrainResult result;
  result.epoch_losses.reserve(static_cast<std::size_t>(cfg.epochs));

  const auto t0 = std::chrono::steady_clock::now();
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<Index> order = shuffled_indices(n, shuffle_rng);
    double epoch_loss = 0;
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index rows = std::min(cfg.batch_size, n - start);
      const std::vector<Index> batch_idx(order.begin() + start,
                                         order.begin() + start + rows);
      const Mat<S> xb = take_rows(inputs, batch_idx);
      const Mat<S> yb = take_rows(targets, batch_idx);

      ForwardCache<S> cache = forward_cached(model, xb);
      const S batch_loss = loss(cfg.loss, cache.output(), yb);
      if (!std::isfinite(static_cast<double>(batch_loss))) {
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch offset " +
                           std::to_string(start));
      }
      epoch_loss += static_cast<double>(batch_loss) * static_cast<double>(rows);

      Gradients<S> grads = detail::backprop(model, cache, yb, cfg.loss, true);
      adam_step(model, grads, state, cfg);
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }
  const auto t1 = std::chrono::steady_clock::now();
  result.seconds = std::chrono::duration<double>(t1 - t0).count();
  return result;
}

// argmax over class probabilities.
template <class S>
Labels classify(const MlpModel<S>& model, const Mat<S>& x) {
  return argmax_rows(forward(model, x));
}

template <class S>
double accuracy(const MlpModel<S>& model, const Mat<S>& x, const Labels& truth) {
  const Labels pred = classify(model, x);
  return static_cast<double>((pred.array() == truth.array()).count()) /
         static_cast<double>(truth.size());
}

}  // namespace gradshield
