#pragma once

#include <string>

#include "ssmctb/autodiff.hpp"
#include "ssmctb/channel_transformer.hpp"
#include "ssmctb/masked_conv.hpp"
#include "ssmctb/parameter_store.hpp"
#include "ssmctb/rng.hpp"

namespace ssmctb::block {

inline constexpr double kDefaultLambda = 0.1;
/// Smaller weight for hosts whose own loss is dwarfed by the block loss.
inline constexpr double kSmallLambda = 0.001;

struct SsmctbConfig {
  masked::MaskedConvConfig conv;
  transformer::TransformerConfig transformer;
  double lambda = kDefaultLambda;

  /// k'=1, d=3, d_t=64, H=4, L=2, pooled 1x..x1, lambda=0.1.
  static SsmctbConfig defaults(std::size_t dims, std::size_t channels);
  void validate() const;
};

struct SsmctbParams {
  masked::MaskedConvParams conv;
  transformer::TransformerParams transformer;

  static SsmctbParams random(const SsmctbConfig& config, Rng& rng);
  static SsmctbParams load(const ParameterStore& store, const std::string& prefix, const SsmctbConfig& config);
  void save(ParameterStore& store, const std::string& prefix) const;
};

struct BlockResult {
  Tensor x_hat;
  double loss = 0.0;
};

struct BlockVars {
  ad::Var x_hat;
  /// mean((x_hat - x)^2) over every element of the block input.
  ad::Var loss;
};

/// Z = ReLU(masked_conv(x)); x_hat = Z * sigmoid(gate(Z)) per channel.
BlockResult ssmctb_forward(const Tensor& x, const SsmctbParams& params, const SsmctbConfig& config);
BlockVars ssmctb_forward(ad::Tape& tape, ad::Var x, const ParameterStore& store, const std::string& prefix,
                         const SsmctbConfig& config);

/// l_host + lambda * l_block; lambda must be nonnegative.
double total_loss(double host_loss, double block_loss, double lambda);
ad::Var total_loss(ad::Var host_loss, ad::Var block_loss, double lambda);

}  // namespace ssmctb::block
