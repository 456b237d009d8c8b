#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ssmctb/autodiff.hpp"
#include "ssmctb/block.hpp"
#include "ssmctb/parameter_store.hpp"

namespace ssmctb::host {

inline constexpr std::size_t kNoBlock = 0;
inline constexpr std::size_t kDecoderBlocks = 4;

/// Toy convolutional autoencoder:
///   encoder   conv s2 (c_in -> w1), conv s2 (w1 -> w2), bottleneck conv (w2 -> w2)
///   decoder   1: up x2, conv w2 -> w2    2: up x2, conv w2 -> w1
///             3: conv w1 -> w1           4: conv w1 -> c_in (linear)
/// All convs are 3^dims with ReLU except the final one. One decoder conv can
/// be replaced by an SSMCTB running at that block's input width; when the
/// block changes width, a 1^dims adapter conv follows the SSMCTB.
struct AutoencoderConfig {
  std::size_t dims = 2;
  Shape extents{32, 32};
  std::size_t in_channels = 1;
  std::size_t width1 = 16;
  std::size_t width2 = 32;
  /// 1..4, or kNoBlock. Default is the penultimate decoder block.
  std::size_t ssmctb_position = 3;
  bool width_adapter = true;
  /// Masked-conv and transformer hyperparameters; dims and channels are
  /// overwritten per insertion site.
  block::SsmctbConfig block = block::SsmctbConfig::defaults(2, 1);

  struct Stage {
    std::size_t in = 0;
    std::size_t out = 0;
    bool upsample = false;
    bool activation = true;
  };

  std::array<Stage, kDecoderBlocks> decoder_stages() const;
  Shape input_shape() const;
  /// Spatial extents seen by decoder block `position` (after its upsampling).
  Shape stage_extents(std::size_t position) const;
  /// SSMCTB configuration at the insertion site.
  block::SsmctbConfig site_config() const;
  void validate() const;
};

/// "decoder.block{p}."
std::string decoder_prefix(std::size_t position);

/// Deterministic He-normal initialization from `seed` (sub-seed "init").
ParameterStore build(const AutoencoderConfig& config, std::uint64_t seed);

struct ForwardVars {
  ad::Var output;
  /// Scalar block loss; constant zero when no SSMCTB is present.
  ad::Var block_loss;
};

ForwardVars forward(ad::Tape& tape, ad::Var x, const ParameterStore& params, const AutoencoderConfig& config);

/// Forward pass without gradient bookkeeping for parameters.
Tensor reconstruct(const ParameterStore& params, const AutoencoderConfig& config, const Tensor& x);

}  // namespace ssmctb::host
