#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gradshield {

using Index = Eigen::Index;

// Row-major throughout, one sample per row. Everything numeric is templated
// on the scalar: the shipped pipeline instantiates float (training
// throughput, f32 file formats), gradient-verification code instantiates
// double.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic, Eigen::RowMajor>;

using MatF = Mat<float>;
using MatD = Mat<double>;

// Class labels / row indices.
using Labels = Eigen::VectorXi;

// Dimension mismatches detected at module boundaries.
class ShapeError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// File and format problems (missing files, bad magic, truncation, checksums).
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite losses or gradients.
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid run configuration (CLI/config-file level).
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <class Derived>
std::string shape_str(const Eigen::MatrixBase<Derived>& m) {
  return shape_str(m.rows(), m.cols());
}

}  // namespace gradshield
