#pragma once

#include <span>
#include <string>
#include <vector>

#include "ssmctb/autodiff.hpp"
#include "ssmctb/conv.hpp"
#include "ssmctb/parameter_store.hpp"
#include "ssmctb/rng.hpp"
#include "ssmctb/tensor.hpp"

namespace ssmctb::masked {

/// Masked dilated convolution geometry. The receptive field has extent
/// k = 2k' + 2d + 1 per axis; only its 2^dims corner cubes of extent k' carry
/// weights, and the centre cell is always hidden.
struct MaskedConvConfig {
  std::size_t dims = 2;
  std::size_t channels = 1;
  std::size_t sub_kernel = 1;  // k'
  std::size_t dilation = 3;    // d

  std::size_t receptive_field() const { return 2 * sub_kernel + 2 * dilation + 1; }
  std::size_t sub_kernel_count() const { return std::size_t{1} << dims; }
  std::size_t cells_per_sub_kernel() const;
  /// Zero padding per side that keeps the output extents equal to the input.
  std::size_t padding() const { return sub_kernel + dilation; }
  void validate() const;
};

struct ReceptiveOffset {
  std::size_t sub_kernel = 0;
  /// Row-major cell index inside the sub-kernel.
  std::size_t cell = 0;
  conv::Offset offset;
};

/// Every weighted cell relative to the kernel centre, ordered by sub-kernel
/// then cell. Sub-kernel i places its corner on the negative side of axis a
/// when bit (dims-1-a) of i is clear. Per-axis offsets lie in +-[d+1, d+k'].
std::vector<ReceptiveOffset> receptive_offsets(const MaskedConvConfig& config);

/// weights[j][i] is sub-kernel i of output filter j, shape (k', ..., k', c).
/// There is no bias.
struct MaskedConvParams {
  std::vector<std::vector<Tensor>> weights;

  static MaskedConvParams zeros(const MaskedConvConfig& config);
  /// He-normal: stddev sqrt(2 / fan_in), fan_in = 2^dims k'^dims c.
  static MaskedConvParams random(const MaskedConvConfig& config, Rng& rng);
  static MaskedConvParams load(const ParameterStore& store, const std::string& prefix,
                               const MaskedConvConfig& config);
  void save(ParameterStore& store, const std::string& prefix) const;

  /// Dense tap weights (taps, c_in, c_out) in receptive_offsets order.
  Tensor packed(const MaskedConvConfig& config) const;
};

/// "<prefix>masked_conv.filter{j}.sub{i}"
std::string sub_kernel_path(const std::string& prefix, std::size_t filter, std::size_t sub_kernel);
Shape sub_kernel_shape(const MaskedConvConfig& config);

conv::TapGeometry geometry(const MaskedConvConfig& config, const Shape& spatial);

/// Output before the ReLU.
Tensor masked_conv_preactivation(const Tensor& x, const MaskedConvParams& params, const MaskedConvConfig& config);
/// ReLU(masked convolution); output has the same shape as x.
Tensor masked_conv_forward(const Tensor& x, const MaskedConvParams& params, const MaskedConvConfig& config);

/// Differentiable form. `sub_kernels` holds c * 2^dims variables in
/// filter-major order. Returns the post-ReLU tensor.
ad::Var masked_conv(ad::Var x, std::span<const ad::Var> sub_kernels, const MaskedConvConfig& config);
ad::Var masked_conv(ad::Tape& tape, ad::Var x, const ParameterStore& store, const std::string& prefix,
                    const MaskedConvConfig& config);
/// Same as masked_conv but without the trailing ReLU.
ad::Var masked_conv_linear(ad::Var x, std::span<const ad::Var> sub_kernels, const MaskedConvConfig& config);

}  // namespace ssmctb::masked
