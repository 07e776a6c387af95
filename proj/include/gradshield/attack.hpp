#pragma once

#include "gradshield/common.hpp"
#include "gradshield/dataset.hpp"
#include "gradshield/net.hpp"

#include <string>

namespace gradshield {

struct AttackConfig {
  double eta = 0.25;                  // l-infinity bound, pixel-intensity units
  bool clip_to_unit_interval = false; // off by default: the update rule has no clamp

  void validate() const {
    if (!(eta >= 0)) throw ConfigError("attack: eta must be >= 0");
  }
};

// Fast Gradient Sign: x~ = x + eta * sign(d/dx cross-entropy(model(x), y)).
//
// The gradient of each sample is computed independently, row by row. Batched
// GEMM is not bitwise-stable across row partition sizes, and this routine's
// contract is that any batching of the input produces identical bytes; the
// sign of a per-sample gradient does not depend on batch-mean scaling, and
// per-row evaluation makes the bytes independent of grouping too.
// Labels y are the true one-hot labels, not model predictions.
template <class S>
Mat<S> fgs_generate(const MlpModel<S>& model, const Mat<S>& x, const Mat<S>& y,
                    const AttackConfig& cfg) {
  cfg.validate();
  if (model.layers.back().activation != Activation::kSoftmax) {
    throw ShapeError("fgs_generate: model is not a softmax classifier");
  }
  if (x.cols() != model.input_dim()) {
    throw ShapeError("fgs_generate: input " + shape_str(x) + ", model expects " +
                     std::to_string(model.input_dim()) + " columns");
  }
  if (y.rows() != x.rows() || y.cols() != model.output_dim()) {
    throw ShapeError("fgs_generate: labels " + shape_str(y) + " do not match input " +
                     shape_str(x) + " and " + std::to_string(model.output_dim()) +
                     " classes");
  }

  const S eta = static_cast<S>(cfg.eta);
  Mat<S> out(x.rows(), x.cols());
  if (eta == S(0)) {
    out = x;
  } else {
    for (Index r = 0; r < x.rows(); ++r) {
      const Mat<S> grad = input_gradient(
          model, Mat<S>(x.row(r)), Mat<S>(y.row(r)), LossKind::kCrossEntropy);
      if (!grad.allFinite()) {
        throw NumericError("fgs_generate: non-finite input gradient at row " +
                           std::to_string(r));
      }
      out.row(r) = x.row(r) + eta * sign(grad);
    }
  }
  if (cfg.clip_to_unit_interval) {
    out = out.cwiseMax(S(0)).cwiseMin(S(1));
  }
  return out;
}

// Memory-bounded wrapper: processes the set in row blocks of batch_size.
// Output is identical to a single-shot call on the full set.
template <class S>
Mat<S> attack_batched(const MlpModel<S>& model, const Mat<S>& x, const Mat<S>& y,
                      const AttackConfig& cfg, Index batch_size) {
  if (batch_size < 1) throw ConfigError("attack_batched: batch_size must be >= 1");
  Mat<S> out(x.rows(), x.cols());
  for (Index start = 0; start < x.rows(); start += batch_size) {
    const Index rows = std::min(batch_size, x.rows() - start);
    out.middleRows(start, rows) =
        fgs_generate(model, Mat<S>(x.middleRows(start, rows)),
                     Mat<S>(y.middleRows(start, rows)), cfg);
  }
  return out;
}

inline MatF attack_batched(const MlpModel<float>& model, const LabeledDataset& ds,
                           const AttackConfig& cfg, Index batch_size) {
  return attack_batched(model, ds.images, ds.labels_onehot, cfg, batch_size);
}

}  // namespace gradshield
