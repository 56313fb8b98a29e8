#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "advs/error.hpp"

namespace advs {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major n-dimensional array.
///
/// Storage is a flat Eigen column array so that elementwise work can use
/// Eigen expressions directly; `matrix()` reinterprets the buffer as a
/// row-major matrix without copying.
template <typename Scalar>
class BasicTensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_ = Array::Zero(shape_size(shape_));
  }

  BasicTensor(Shape shape, Array data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (shape_size(shape_) != data_.size()) {
      throw ShapeError("tensor of shape " + shape_string(shape_) + " cannot hold " +
                       std::to_string(data_.size()) + " values");
    }
  }

  BasicTensor(Shape shape, std::initializer_list<Scalar> values)
      : BasicTensor(std::move(shape), from_list(values)) {}

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }

  static BasicTensor constant(Shape shape, Scalar value) {
    BasicTensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }

  Array& data() { return data_; }
  const Array& data() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Element of a rank-3 tensor, (channel, row, column).
  Scalar& at(Index c, Index y, Index x) { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
  Scalar at(Index c, Index y, Index x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  Eigen::Map<RowMatrix<Scalar>> matrix(Index rows, Index cols) {
    check_view(rows, cols);
    return {data_.data(), rows, cols};
  }
  Eigen::Map<const RowMatrix<Scalar>> matrix(Index rows, Index cols) const {
    check_view(rows, cols);
    return {data_.data(), rows, cols};
  }

  /// Same values under a different shape with equal element count.
  BasicTensor reshaped(Shape shape) const { return BasicTensor(std::move(shape), data_); }

  bool requires_grad = false;
  /// Populated by a backward pass when `requires_grad` is set; same extent as data.
  std::optional<Array> grad;

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
  }

 private:
  static void validate_shape(const Shape& shape) {
    for (Index extent : shape) {
      if (extent <= 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
    }
  }

  static Array from_list(std::initializer_list<Scalar> values) {
    Array a(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar v : values) a[i++] = v;
    return a;
  }

  void check_view(Index rows, Index cols) const {
    if (rows * cols != data_.size()) {
      throw ShapeError("cannot view " + std::to_string(data_.size()) + " values as " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  Shape shape_;
  Array data_;
};

using Tensor = BasicTensor<double>;

}  // namespace advs
