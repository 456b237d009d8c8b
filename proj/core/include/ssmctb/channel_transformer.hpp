#pragma once

#include <string>
#include <vector>

#include "ssmctb/autodiff.hpp"
#include "ssmctb/parameter_store.hpp"
#include "ssmctb/rng.hpp"
#include "ssmctb/tensor.hpp"

namespace ssmctb::transformer {

/// Channel-wise transformer: one token per activation map, L pre-norm blocks
/// with H summed attention heads, then a per-channel sigmoid gate.
struct TransformerConfig {
  std::size_t token_dim = 64;  // d_t
  std::size_t heads = 4;       // H
  std::size_t blocks = 2;      // L
  /// Spatial extents after average pooling (h', w'[, r']).
  Shape pooled{1, 1};
  /// 0 selects 2 * token_dim.
  std::size_t mlp_hidden = 0;
  double norm_epsilon = 1e-5;

  std::size_t head_dim() const { return token_dim / heads; }  // d_q = d_k
  std::size_t hidden() const { return mlp_hidden ? mlp_hidden : 2 * token_dim; }
  std::size_t pooled_cells() const { return shape_size(pooled); }  // n
  void validate() const;
};

struct HeadParams {
  Tensor q, k, v;  // d_t x d_q, d_t x d_q, d_t x d_t
};

struct BlockParams {
  Tensor norm1_scale, norm1_shift, norm2_scale, norm2_shift;
  std::vector<HeadParams> heads;
  Tensor fc1_weight, fc1_bias, fc2_weight, fc2_bias;
};

struct TransformerParams {
  Tensor proj_weight, proj_bias;  // n x d_t, d_t
  Tensor pos;                     // c x d_t
  std::vector<BlockParams> blocks;

  /// Attention, MLP, projection and positional weights all zero; norms at
  /// unit scale.
  static TransformerParams zeros(const TransformerConfig& config, std::size_t channels);
  static TransformerParams random(const TransformerConfig& config, std::size_t channels, Rng& rng);
  static TransformerParams load(const ParameterStore& store, const std::string& prefix,
                                const TransformerConfig& config, std::size_t channels);
  void save(ParameterStore& store, const std::string& prefix) const;
};

struct HeadVars {
  ad::Var q, k, v;
};

struct BlockVars {
  ad::Var norm1_scale, norm1_shift, norm2_scale, norm2_shift;
  std::vector<HeadVars> heads;
  ad::Var fc1_weight, fc1_bias, fc2_weight, fc2_bias;
};

struct TransformerVars {
  ad::Var proj_weight, proj_bias, pos;
  std::vector<BlockVars> blocks;
};

/// Binds parameter values as constants (no gradients).
TransformerVars bind_constants(ad::Tape& tape, const TransformerParams& params);
/// Binds store entries under `prefix` as named tape parameters.
TransformerVars bind_parameters(ad::Tape& tape, const ParameterStore& store, const std::string& prefix,
                                const TransformerConfig& config);

/// Pool to config.pooled, one row of n pooled values per channel, affine
/// projection to d_t, plus positional embeddings. Returns c x d_t.
ad::Var tokenize(ad::Var z, const TransformerVars& vars, const TransformerConfig& config);
/// softmax(Q K' / sqrt(d_q)) V over the c channel tokens.
ad::Var attention_head(ad::Var r, const HeadVars& head);
/// P = sum_j head_j(norm(R)) + R; R' = mlp(norm(P)) + P.
ad::Var transformer_block(ad::Var r, const BlockVars& block, double eps);
ad::Var run_blocks(ad::Var tokens, const TransformerVars& vars, const TransformerConfig& config);
/// sigmoid of the per-token mean; one weight per channel.
ad::Var channel_gate(ad::Var r_final);
/// tokenize -> blocks -> gate.
ad::Var gate_weights(ad::Var z, const TransformerVars& vars, const TransformerConfig& config);

// Value-level wrappers.
Tensor tokenize(const Tensor& z, const TransformerParams& params, const TransformerConfig& config);
Tensor attention_head(const Tensor& r, const HeadParams& head);
Tensor transformer_block(const Tensor& r, const BlockParams& block, double eps = 1e-5);
Tensor run_blocks(const Tensor& tokens, const TransformerParams& params, const TransformerConfig& config);
Tensor channel_gate(const Tensor& r_final);
Tensor gate_weights(const Tensor& z, const TransformerParams& params, const TransformerConfig& config);

std::string path(const std::string& prefix, const std::string& leaf);

}  // namespace ssmctb::transformer
