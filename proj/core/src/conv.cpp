#include "ssmctb/conv.hpp"

#include <cmath>

#include "ssmctb/error.hpp"

namespace ssmctb::conv {
namespace {

struct Layout {
  std::size_t dims = 0;
  Shape in_spatial;
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::size_t out_positions = 0;
};

Layout check_layout(const Tensor& x, const Tensor& w, const TapGeometry& geo) {
  Layout l;
  if (x.rank() < 2) throw ValidationError("convolution input needs spatial axes and a channel axis");
  l.dims = x.rank() - 1;
  l.in_spatial.assign(x.shape().begin(), x.shape().end() - 1);
  l.c_in = x.shape().back();
  if (w.rank() != 3 || w.extent(0) != geo.taps.size() || w.extent(1) != l.c_in) {
    throw ValidationError("convolution weights " + shape_string(w.shape()) + " do not match " +
                          std::to_string(geo.taps.size()) + " taps and " + std::to_string(l.c_in) +
                          " input channels");
  }
  l.c_out = w.extent(2);
  if (geo.out_spatial.size() != l.dims) throw ValidationError("convolution output rank mismatch");
  for (const auto& tap : geo.taps) {
    if (tap.size() != l.dims) throw ValidationError("tap offset rank mismatch");
  }
  if (geo.stride == 0) throw ValidationError("stride must be positive");
  l.out_positions = shape_size(geo.out_spatial);
  return l;
}

// Calls visit(out_position, tap, in_position) for every in-bounds pair.
template <typename F>
void for_each_contribution(const Layout& l, const TapGeometry& geo, F visit) {
  const auto out_strides = strides_of(geo.out_spatial);
  const auto in_strides = strides_of(l.in_spatial);
  std::vector<long> base(l.dims);
  for (std::size_t p = 0; p < l.out_positions; ++p) {
    std::size_t rem = p;
    for (std::size_t a = 0; a < l.dims; ++a) {
      base[a] = static_cast<long>((rem / out_strides[a]) * geo.stride);
      rem %= out_strides[a];
    }
    for (std::size_t t = 0; t < geo.taps.size(); ++t) {
      std::size_t q = 0;
      bool inside = true;
      for (std::size_t a = 0; a < l.dims; ++a) {
        const long c = base[a] + geo.taps[t][a];
        if (c < 0 || c >= static_cast<long>(l.in_spatial[a])) {
          inside = false;
          break;
        }
        q += static_cast<std::size_t>(c) * in_strides[a];
      }
      if (inside) visit(p, t, q);
    }
  }
}

}  // namespace

Tensor tap_conv_forward(const Tensor& x, const Tensor& w, const TapGeometry& geo) {
  const Layout l = check_layout(x, w, geo);
  Shape out_shape = geo.out_spatial;
  out_shape.push_back(l.c_out);
  Tensor out = Tensor::zeros(out_shape);
  double* o = out.mutable_data().data();
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  const std::size_t cin = l.c_in, cout = l.c_out;
  for_each_contribution(l, geo, [&](std::size_t p, std::size_t t, std::size_t q) {
    double* dst = o + p * cout;
    const double* src = xd + q * cin;
    const double* wt = wd + t * cin * cout;
    for (std::size_t m = 0; m < cin; ++m) {
      const double xv = src[m];
      const double* wr = wt + m * cout;
      for (std::size_t j = 0; j < cout; ++j) dst[j] += wr[j] * xv;
    }
  });
  return out;
}

void tap_conv_backward(const Tensor& x, const Tensor& w, const TapGeometry& geo, const Tensor& grad_out,
                       Tensor* grad_x, Tensor* grad_w) {
  const Layout l = check_layout(x, w, geo);
  const std::size_t cin = l.c_in, cout = l.c_out;
  if (grad_out.size() != l.out_positions * cout) throw ValidationError("convolution gradient shape mismatch");
  const double* g = grad_out.data().data();
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  double* gx = grad_x ? grad_x->mutable_data().data() : nullptr;
  double* gw = grad_w ? grad_w->mutable_data().data() : nullptr;
  for_each_contribution(l, geo, [&](std::size_t p, std::size_t t, std::size_t q) {
    const double* gp = g + p * cout;
    const double* wt = wd + t * cin * cout;
    if (gx) {
      double* dst = gx + q * cin;
      for (std::size_t m = 0; m < cin; ++m) {
        const double* wr = wt + m * cout;
        double acc = 0.0;
        for (std::size_t j = 0; j < cout; ++j) acc += wr[j] * gp[j];
        dst[m] += acc;
      }
    }
    if (gw) {
      const double* src = xd + q * cin;
      double* gwt = gw + t * cin * cout;
      for (std::size_t m = 0; m < cin; ++m) {
        const double xv = src[m];
        double* gr = gwt + m * cout;
        for (std::size_t j = 0; j < cout; ++j) gr[j] += xv * gp[j];
      }
    }
  });
}

std::vector<Offset> dense_taps(std::size_t dims, std::size_t kernel, std::size_t pad) {
  std::vector<Offset> taps;
  std::size_t total = 1;
  for (std::size_t a = 0; a < dims; ++a) total *= kernel;
  for (std::size_t flat = 0; flat < total; ++flat) {
    Offset o(dims);
    std::size_t rem = flat;
    for (std::size_t a = dims; a-- > 0;) {
      o[a] = static_cast<int>(rem % kernel) - static_cast<int>(pad);
      rem /= kernel;
    }
    taps.push_back(std::move(o));
  }
  return taps;
}

Shape conv_output_spatial(const Shape& in_spatial, std::size_t kernel, std::size_t stride, std::size_t pad) {
  Shape out;
  for (auto n : in_spatial) {
    if (n + 2 * pad < kernel) throw ValidationError("convolution kernel larger than padded input");
    out.push_back((n + 2 * pad - kernel) / stride + 1);
  }
  return out;
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  if (factor == 0) throw ValidationError("upsample factor must be positive");
  const std::size_t dims = x.rank() - 1;
  const std::size_t c = x.shape().back();
  Shape out_shape = x.shape();
  for (std::size_t a = 0; a < dims; ++a) out_shape[a] *= factor;
  Tensor out = Tensor::zeros(out_shape);
  const auto in_strides = strides_of(x.shape());
  const auto out_strides = strides_of(out_shape);
  const std::size_t positions = out.size() / c;
  for (std::size_t p = 0; p < positions; ++p) {
    std::size_t rem = p * c;
    std::size_t src = 0;
    for (std::size_t a = 0; a < dims; ++a) {
      src += (rem / out_strides[a] / factor) * in_strides[a];
      rem %= out_strides[a];
    }
    for (std::size_t ch = 0; ch < c; ++ch) out[p * c + ch] = x[src + ch];
  }
  return out;
}

Tensor upsample_nearest_backward(const Tensor& grad, const Shape& source_shape, std::size_t factor) {
  const std::size_t dims = source_shape.size() - 1;
  const std::size_t c = source_shape.back();
  Tensor out = Tensor::zeros(source_shape);
  const auto in_strides = strides_of(source_shape);
  const auto out_strides = strides_of(grad.shape());
  const std::size_t positions = grad.size() / c;
  for (std::size_t p = 0; p < positions; ++p) {
    std::size_t rem = p * c;
    std::size_t src = 0;
    for (std::size_t a = 0; a < dims; ++a) {
      src += (rem / out_strides[a] / factor) * in_strides[a];
      rem %= out_strides[a];
    }
    for (std::size_t ch = 0; ch < c; ++ch) out[src + ch] += grad[p * c + ch];
  }
  return out;
}

Tensor mean_filter3(const Tensor& map) {
  const std::size_t dims = map.rank();
  Tensor out = Tensor::zeros(map.shape());
  const auto strides = strides_of(map.shape());
  const auto taps = dense_taps(dims, 3, 1);
  std::vector<long> pos(dims);
  for (std::size_t p = 0; p < map.size(); ++p) {
    std::size_t rem = p;
    for (std::size_t a = 0; a < dims; ++a) {
      pos[a] = static_cast<long>(rem / strides[a]);
      rem %= strides[a];
    }
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& tap : taps) {
      std::size_t q = 0;
      bool inside = true;
      for (std::size_t a = 0; a < dims; ++a) {
        const long c = pos[a] + tap[a];
        if (c < 0 || c >= static_cast<long>(map.extent(a))) {
          inside = false;
          break;
        }
        q += static_cast<std::size_t>(c) * strides[a];
      }
      if (inside) {
        acc += map[q];
        ++count;
      }
    }
    out[p] = acc / static_cast<double>(count);
  }
  return out;
}

}  // namespace ssmctb::conv

namespace ssmctb::ad {

Var tap_conv(Var x, Var w, const conv::TapGeometry& geo) {
  if (x.tape() != w.tape()) throw ValidationError("operands live on different tapes");
  Tensor out = conv::tap_conv_forward(x.value(), w.value(), geo);
  return x.tape()->record(std::move(out), {x, w}, [x, w, geo](const Tensor& g, Tape& t) {
    Tensor* gx = t.needs_grad(x.id()) ? &t.grad_buffer(x.id()) : nullptr;
    Tensor* gw = t.needs_grad(w.id()) ? &t.grad_buffer(w.id()) : nullptr;
    conv::tap_conv_backward(x.value(), w.value(), geo, g, gx, gw);
  });
}

Var conv(Var x, Var w, Var bias, std::size_t kernel, std::size_t stride, std::size_t pad) {
  const std::size_t dims = x.shape().size() - 1;
  conv::TapGeometry geo;
  geo.taps = conv::dense_taps(dims, kernel, pad);
  geo.stride = stride;
  geo.out_spatial = conv::conv_output_spatial(Shape(x.shape().begin(), x.shape().end() - 1), kernel, stride, pad);
  return add_bias(tap_conv(x, w, geo), bias);
}

Var upsample_nearest(Var x, std::size_t factor) {
  return x.tape()->record(conv::upsample_nearest(x.value(), factor), {x}, [x, factor](const Tensor& g, Tape& t) {
    t.accumulate(x.id(), conv::upsample_nearest_backward(g, x.shape(), factor));
  });
}

}  // namespace ssmctb::ad
