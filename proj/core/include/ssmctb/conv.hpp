#pragma once

#include <vector>

#include "ssmctb/autodiff.hpp"
#include "ssmctb/tensor.hpp"

namespace ssmctb::conv {

/// Spatial displacement of one kernel tap, one entry per spatial axis.
using Offset = std::vector<int>;

/// Sparse-tap convolution over channel-last tensors (spatial..., c_in):
///
///   out[p, j] = sum_t sum_m w[t, m, j] * x[stride * p + taps[t], m]
///
/// with x read as zero outside its extents. Dense k^dims kernels and the
/// masked corner kernels are both expressed as tap lists.
struct TapGeometry {
  std::vector<Offset> taps;
  std::size_t stride = 1;
  Shape out_spatial;
};

Tensor tap_conv_forward(const Tensor& x, const Tensor& w, const TapGeometry& geo);

/// Accumulates input and weight gradients; either output may be null.
void tap_conv_backward(const Tensor& x, const Tensor& w, const TapGeometry& geo, const Tensor& grad_out,
                       Tensor* grad_x, Tensor* grad_w);

/// All taps of a dense kernel of extent `kernel` per axis, offsets
/// -pad .. kernel-1-pad, row-major.
std::vector<Offset> dense_taps(std::size_t dims, std::size_t kernel, std::size_t pad);

/// floor((n + 2 pad - kernel) / stride) + 1 per axis.
Shape conv_output_spatial(const Shape& in_spatial, std::size_t kernel, std::size_t stride, std::size_t pad);

Tensor upsample_nearest(const Tensor& x, std::size_t factor);
Tensor upsample_nearest_backward(const Tensor& grad, const Shape& source_shape, std::size_t factor);

/// 3^dims mean filter over a spatial tensor (no channel axis); each output
/// is the mean of the in-bounds cells of its window.
Tensor mean_filter3(const Tensor& map);

}  // namespace ssmctb::conv

namespace ssmctb::ad {

Var tap_conv(Var x, Var w, const conv::TapGeometry& geo);

/// Dense convolution with bias: weights (kernel^dims, c_in, c_out), bias (c_out).
Var conv(Var x, Var w, Var bias, std::size_t kernel, std::size_t stride, std::size_t pad);

Var upsample_nearest(Var x, std::size_t factor);

}  // namespace ssmctb::ad
