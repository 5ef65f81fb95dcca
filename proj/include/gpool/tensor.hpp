#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gpool {

/// Dense row-major array of doubles with explicit shape metadata.
///
/// A rank-0 tensor (empty shape) holds a single scalar. Every extent of a
/// non-scalar shape is positive, and size() is always the product of the
/// extents. Operations never broadcast implicitly; see the autodiff bias
/// helpers for the one documented exception.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const;

  /// Matrix extents; only valid for rank-2 tensors.
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const double& at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  /// Value of a single-element tensor.
  double item() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double factor);

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::string shape_string(const Tensor::Shape& shape);

/// Throws DimensionError unless both shapes are identical.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);

/// Squared L2 norm over all entries (squared Frobenius norm for matrices).
double squared_norm(const Tensor& t);

/// Largest absolute entry-wise difference; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace gpool
