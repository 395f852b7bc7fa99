#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bemopt/core/error.hpp"
#include "bemopt/core/matrix.hpp"

namespace bemopt::ad {

using Shape = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
// SIMD-aligned storage: Eigen picks its vectorized loop split from the buffer
// address, so unaligned buffers would make sums depend on where malloc lands.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

// Dense tensor of rank <= 2, stored row-major. Rank 0 is a scalar, rank 1 a
// row vector.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    check_rank();
  }
  Tensor(Shape shape, std::span<const double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    check_rank();
    if (data_.size() != shape_size(shape_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_string(shape_));
  }
  Tensor(Shape shape, std::initializer_list<double> data)
      : Tensor(std::move(shape), std::span<const double>(data.begin(), data.size())) {}

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor from_matrix(const Matrix& m) { return Tensor({m.rows(), m.cols()}, m.data()); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_, 0.0); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  bool empty() const { return shape_.empty() && data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  Buffer& values() { return data_; }
  const Buffer& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  MatrixMap map() { return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())); }
  ConstMatrixMap map() const {
    return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
  }

  Matrix to_matrix() const { return Matrix(rows(), cols(), std::vector<double>(data_.begin(), data_.end())); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor&) const = default;

 private:
  void check_rank() const {
    if (shape_.size() > 2) throw ShapeError("tensors of rank > 2 are not supported: " + shape_string(shape_));
  }

  Shape shape_;
  Buffer data_;
};

// A named trainable tensor. Frozen parameters (requires_grad = false) receive
// no gradient.
struct Parameter {
  std::string name;
  Tensor value;
  bool requires_grad = true;
};

}  // namespace bemopt::ad
