#include "ssmctb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "ssmctb/error.hpp"

namespace ssmctb {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

namespace {

void check_extents(const Shape& shape) {
  for (auto e : shape) {
    if (e == 0) throw ValidationError("tensor extents must be positive, got " + shape_string(shape));
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  }
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out = a;
  for (auto& v : out.mutable_data()) v = f(v);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
  check_same_shape(a, b, op);
  Tensor out = a;
  auto o = out.mutable_data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(o[i], y[i]);
  return out;
}

}  // namespace

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw ValidationError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                          shape_string(shape_));
  }
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  check_extents(shape);
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw ValidationError("matrix: no rows");
  const auto cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw ValidationError("matrix: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::flat_index(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) throw ValidationError("index rank does not match tensor rank");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw ValidationError("index out of range on axis " + std::to_string(axis));
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[flat_index(index)]; }
double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[flat_index(index)]; }

double Tensor::item() const {
  if (data_.size() != 1) throw ValidationError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const { return reshape(*this, std::move(shape)); }

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}
Tensor scale(const Tensor& a, double factor) {
  return map(a, [factor](double x) { return x * factor; });
}
Tensor relu(const Tensor& a) {
  return map(a, [](double x) { return x > 0.0 ? x : 0.0; });
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& a) {
  return map(a, [](double x) { return sigmoid(x); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ValidationError("matmul expects rank-2 operands, got " + shape_string(a.shape()) + " and " +
                          shape_string(b.shape()));
  }
  const auto m = a.extent(0), p = a.extent(1), q = b.extent(1);
  if (b.extent(0) != p) {
    throw ValidationError("matmul inner extents differ: " + shape_string(a.shape()) + " * " +
                          shape_string(b.shape()));
  }
  Tensor out = Tensor::zeros({m, q});
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = o.data() + i * q;
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = x[i * p + k];
      const double* brow = y.data() + k * q;
      for (std::size_t j = 0; j < q; ++j) row[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ValidationError("transpose expects rank 2, got " + shape_string(a.shape()));
  const auto m = a.extent(0), n = a.extent(1);
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  if (a.rank() != 2) throw ValidationError("softmax_rows expects rank 2, got " + shape_string(a.shape()));
  const auto m = a.extent(0), n = a.extent(1);
  Tensor out = a;
  auto o = out.mutable_data();
  std::vector<double> terms;
  for (std::size_t i = 0; i < m; ++i) {
    double* row = o.data() + i * n;
    const double top = *std::max_element(row, row + n);
    for (std::size_t j = 0; j < n; ++j) row[j] = std::exp(row[j] - top);
    terms.assign(row, row + n);
    const double total = order_free_sum(terms);
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
  return out;
}

double order_free_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

Tensor matmul_order_free(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw ValidationError("matmul_order_free: incompatible operands " + shape_string(a.shape()) + " * " +
                          shape_string(b.shape()));
  }
  const auto m = a.extent(0), p = a.extent(1), q = b.extent(1);
  Tensor out = Tensor::zeros({m, q});
  std::vector<double> terms(p);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      for (std::size_t k = 0; k < p; ++k) terms[k] = a[i * p + k] * b[k * q + j];
      out[i * q + j] = order_free_sum(terms);
    }
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ValidationError("reshape " + shape_string(a.shape()) + " -> " + shape_string(shape) +
                          " changes element count");
  }
  return Tensor(std::move(shape), a.values());
}

Tensor mean_over_axes(const Tensor& a, const std::vector<std::size_t>& axes) {
  std::vector<bool> reduced(a.rank(), false);
  for (auto ax : axes) {
    if (ax >= a.rank()) throw ValidationError("mean_over_axes: axis out of range");
    reduced[ax] = true;
  }
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (reduced[i]) count *= a.extent(i);
    else out_shape.push_back(a.extent(i));
  }
  Tensor out = Tensor::zeros(out_shape);
  const auto in_strides = strides_of(a.shape());
  const auto out_strides = strides_of(out_shape);
  for (std::size_t flat = 0; flat < a.size(); ++flat) {
    std::size_t target = 0;
    std::size_t rem = flat;
    std::size_t k = 0;
    for (std::size_t i = 0; i < a.rank(); ++i) {
      const auto idx = rem / in_strides[i];
      rem %= in_strides[i];
      if (!reduced[i]) target += idx * out_strides[k++];
    }
    out[target] += a[flat];
  }
  for (auto& v : out.mutable_data()) v /= static_cast<double>(count);
  return out;
}

double sum(const Tensor& a) { return std::accumulate(a.data().begin(), a.data().end(), 0.0); }

double mean(const Tensor& a) { return sum(a) / static_cast<double>(a.size()); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

bool all_finite(const Tensor& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

Tensor pad_zero(const Tensor& a, const std::vector<std::pair<std::size_t, std::size_t>>& pads) {
  if (pads.size() != a.rank()) throw ValidationError("pad_zero: one (before, after) pair per axis required");
  Shape out_shape = a.shape();
  for (std::size_t i = 0; i < a.rank(); ++i) out_shape[i] += pads[i].first + pads[i].second;
  Tensor out = Tensor::zeros(out_shape);
  const auto in_strides = strides_of(a.shape());
  const auto out_strides = strides_of(out_shape);
  for (std::size_t flat = 0; flat < a.size(); ++flat) {
    std::size_t target = 0;
    std::size_t rem = flat;
    for (std::size_t i = 0; i < a.rank(); ++i) {
      target += (rem / in_strides[i] + pads[i].first) * out_strides[i];
      rem %= in_strides[i];
    }
    out[target] = a[flat];
  }
  return out;
}

std::pair<std::size_t, std::size_t> pool_interval(std::size_t source, std::size_t target, std::size_t index) {
  return {index * source / target, (index + 1) * source / target};
}

namespace {

// Visits every pooled cell with the flat offsets (channel 0) of all source
// positions inside its box.
template <typename F>
void for_each_pool_cell(const Shape& source, const Shape& target_spatial, F visit) {
  const std::size_t dims = target_spatial.size();
  if (source.size() != dims + 1) {
    throw ValidationError("adaptive_avg_pool: expected spatial rank " + std::to_string(source.size() - 1) +
                          " target, got " + shape_string(target_spatial));
  }
  for (std::size_t i = 0; i < dims; ++i) {
    if (target_spatial[i] == 0 || target_spatial[i] > source[i]) {
      throw ValidationError("adaptive_avg_pool: target " + shape_string(target_spatial) + " exceeds source " +
                            shape_string(source));
    }
  }
  const auto in_strides = strides_of(source);
  const std::size_t cells = shape_size(target_spatial);
  std::vector<std::pair<std::size_t, std::size_t>> box(dims);
  std::vector<std::size_t> pos(dims, 0);
  std::vector<std::size_t> offsets;
  for (std::size_t c_flat = 0; c_flat < cells; ++c_flat) {
    std::size_t rem = c_flat;
    for (std::size_t i = dims; i-- > 0;) {
      box[i] = pool_interval(source[i], target_spatial[i], rem % target_spatial[i]);
      rem /= target_spatial[i];
    }
    for (std::size_t i = 0; i < dims; ++i) pos[i] = box[i].first;
    offsets.clear();
    while (true) {
      std::size_t base = 0;
      for (std::size_t i = 0; i < dims; ++i) base += pos[i] * in_strides[i];
      offsets.push_back(base);
      bool done = true;
      for (std::size_t ax = dims; ax > 0; --ax) {
        if (++pos[ax - 1] < box[ax - 1].second) {
          done = false;
          break;
        }
        pos[ax - 1] = box[ax - 1].first;
      }
      if (done) break;
    }
    visit(c_flat, offsets);
  }
}

}  // namespace

Tensor adaptive_avg_pool(const Tensor& a, const Shape& target_spatial) {
  Shape out_shape = target_spatial;
  out_shape.push_back(a.shape().back());
  const std::size_t channels = out_shape.back();
  Tensor out = Tensor::zeros(out_shape);
  for_each_pool_cell(a.shape(), target_spatial, [&](std::size_t cell, const std::vector<std::size_t>& offsets) {
    double* dst = out.mutable_data().data() + cell * channels;
    for (auto base : offsets)
      for (std::size_t ch = 0; ch < channels; ++ch) dst[ch] += a[base + ch];
    for (std::size_t ch = 0; ch < channels; ++ch) dst[ch] /= static_cast<double>(offsets.size());
  });
  return out;
}

Tensor adaptive_avg_pool_backward(const Tensor& grad, const Shape& source_shape) {
  Shape target(grad.shape().begin(), grad.shape().end() - 1);
  const std::size_t channels = source_shape.back();
  Tensor out = Tensor::zeros(source_shape);
  for_each_pool_cell(source_shape, target, [&](std::size_t cell, const std::vector<std::size_t>& offsets) {
    const double* g = grad.data().data() + cell * channels;
    const double inv = 1.0 / static_cast<double>(offsets.size());
    for (auto base : offsets)
      for (std::size_t ch = 0; ch < channels; ++ch) out[base + ch] += g[ch] * inv;
  });
  return out;
}

Tensor crop(const Tensor& a, const std::vector<std::pair<std::size_t, std::size_t>>& pads) {
  if (pads.size() != a.rank()) throw ValidationError("crop: one (before, after) pair per axis required");
  Shape out_shape = a.shape();
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (pads[i].first + pads[i].second >= out_shape[i]) throw ValidationError("crop removes whole axis");
    out_shape[i] -= pads[i].first + pads[i].second;
  }
  Tensor out = Tensor::zeros(out_shape);
  const auto in_strides = strides_of(a.shape());
  const auto out_strides = strides_of(out_shape);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t source = 0;
    std::size_t rem = flat;
    for (std::size_t i = 0; i < a.rank(); ++i) {
      source += (rem / out_strides[i] + pads[i].first) * in_strides[i];
      rem %= out_strides[i];
    }
    out[flat] = a[source];
  }
  return out;
}

}  // namespace ssmctb
