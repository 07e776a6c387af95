#pragma once

#include "gradshield/common.hpp"
#include "gradshield/rng.hpp"

#include <cmath>

namespace gradshield {

// Checked dense product. Eigen evaluates the expression; the check exists so
// callers get a shape-naming error instead of an assert.
template <class S>
Mat<S> matmul(const Mat<S>& a, const Mat<S>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: dimension mismatch " + shape_str(a) + " * " +
                     shape_str(b));
  }
  return a * b;
}

// Elementwise sign with sign(0) = 0. Returned as an expression.
template <class Derived>
auto sign(const Eigen::MatrixBase<Derived>& a) {
  using S = typename Derived::Scalar;
  return a.unaryExpr([](S v) { return v > S(0) ? S(1) : (v < S(0) ? S(-1) : S(0)); });
}

// Per-row index of the maximal entry; ties go to the lowest index.
template <class Derived>
Labels argmax_rows(const Eigen::MatrixBase<Derived>& a) {
  Labels out(a.rows());
  for (Index r = 0; r < a.rows(); ++r) {
    Index best = 0;
    auto best_val = a(r, 0);
    for (Index c = 1; c < a.cols(); ++c) {
      if (a(r, c) > best_val) {
        best_val = a(r, c);
        best = c;
      }
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

// Glorot/Xavier uniform: entries ~ U(-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))).
// Filled in row-major order so a seed pins the exact matrix.
template <class S>
Mat<S> glorot_init(Index rows, Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) {
    throw ShapeError("glorot_init: dimensions must be positive, got " +
                     shape_str(rows, cols));
  }
  const S limit = std::sqrt(S(6) / static_cast<S>(rows + cols));
  Mat<S> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform(-limit, limit);
  }
  return m;
}

template <class S>
Mat<S> transpose(const Mat<S>& a) {
  return a.transpose();
}

// Row gather: out.row(i) = a.row(idx[i]).
template <class S>
Mat<S> take_rows(const Mat<S>& a, const std::vector<Index>& idx) {
  Mat<S> out(static_cast<Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Index>(i)) = a.row(idx[i]);
  }
  return out;
}

inline Labels take_rows(const Labels& a, const std::vector<Index>& idx) {
  Labels out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out[static_cast<Index>(i)] = a[idx[i]];
  }
  return out;
}

}  // namespace gradshield
