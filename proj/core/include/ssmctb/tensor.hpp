#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ssmctb {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. The last axis is the channel axis
/// wherever a tensor carries spatial data (h x w x c, h x w x r x c).
class Tensor {
 public:
  /// Rank-0 scalar holding 0.
  Tensor();
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  /// Rank-2 tensor from nested rows; every row must have the same length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<const double> data() const { return data_; }
  std::span<double> mutable_data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);

  /// Value of a single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t flat_index(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
double sigmoid(double x);

// Matrices.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// Row sums are taken in ascending order of the terms, so each row's result
/// does not depend on the order of its columns.
Tensor softmax_rows(const Tensor& a);
/// a * b where every inner-product sum is taken in ascending order of its
/// terms: permuting the inner axis of both operands leaves the result
/// bit-identical.
Tensor matmul_order_free(const Tensor& a, const Tensor& b);
/// Sum of `terms` in ascending order; reorders `terms`.
double order_free_sum(std::vector<double>& terms);

Tensor reshape(const Tensor& a, Shape shape);

/// Mean over the listed axes; the reduced axes are removed from the shape.
/// Reducing every axis yields a rank-0 scalar.
Tensor mean_over_axes(const Tensor& a, const std::vector<std::size_t>& axes);

double sum(const Tensor& a);
double mean(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& a);

/// Zero padding with (before, after) amounts per axis.
Tensor pad_zero(const Tensor& a, const std::vector<std::pair<std::size_t, std::size_t>>& pads);

/// Average pooling of a spatial x c tensor to the given spatial extents.
/// Axis i of extent n is split into target_i contiguous intervals
/// [floor(k n / t), floor((k+1) n / t)), whose lengths differ by at most one.
Tensor adaptive_avg_pool(const Tensor& a, const Shape& target_spatial);

/// Interval bounds used by adaptive_avg_pool for one axis.
std::pair<std::size_t, std::size_t> pool_interval(std::size_t source, std::size_t target,
                                                  std::size_t index);

/// Gradient of adaptive_avg_pool: spreads each pooled cell evenly over its box.
Tensor adaptive_avg_pool_backward(const Tensor& grad, const Shape& source_shape);

/// Inverse of pad_zero: drops (before, after) cells per axis.
Tensor crop(const Tensor& a, const std::vector<std::pair<std::size_t, std::size_t>>& pads);

/// Row-major strides for a shape.
std::vector<std::size_t> strides_of(const Shape& shape);

}  // namespace ssmctb
