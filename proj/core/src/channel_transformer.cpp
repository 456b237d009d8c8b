#include "ssmctb/channel_transformer.hpp"

#include <cmath>

#include "ssmctb/error.hpp"

namespace ssmctb::transformer {

void TransformerConfig::validate() const {
  if (token_dim == 0 || heads == 0 || blocks == 0) {
    throw ValidationError("transformer token_dim, heads and blocks must be positive");
  }
  if (token_dim % heads != 0) {
    throw ValidationError("token_dim " + std::to_string(token_dim) + " is not divisible by heads " +
                          std::to_string(heads));
  }
  if (pooled.empty()) throw ValidationError("pooled extents must be given");
  for (auto e : pooled) {
    if (e == 0) throw ValidationError("pooled extents must be positive");
  }
}

std::string path(const std::string& prefix, const std::string& leaf) { return prefix + "transformer." + leaf; }

namespace {

std::string block_path(std::size_t l, const std::string& leaf) { return "block" + std::to_string(l) + "." + leaf; }

std::string head_path(std::size_t l, std::size_t j, const std::string& which) {
  return block_path(l, "head" + std::to_string(j) + "." + which);
}

Tensor gaussian(Shape shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.mutable_data()) v = rng.normal(0.0, stddev);
  return t;
}

// Visits (leaf path, tensor) for every parameter in a fixed order.
template <typename Params, typename F>
void visit(Params& p, F f) {
  f("proj.weight", p.proj_weight);
  f("proj.bias", p.proj_bias);
  f("pos", p.pos);
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    auto& b = p.blocks[l];
    f(block_path(l, "norm1.scale"), b.norm1_scale);
    f(block_path(l, "norm1.shift"), b.norm1_shift);
    f(block_path(l, "norm2.scale"), b.norm2_scale);
    f(block_path(l, "norm2.shift"), b.norm2_shift);
    for (std::size_t j = 0; j < b.heads.size(); ++j) {
      f(head_path(l, j, "q"), b.heads[j].q);
      f(head_path(l, j, "k"), b.heads[j].k);
      f(head_path(l, j, "v"), b.heads[j].v);
    }
    f(block_path(l, "mlp.fc1.weight"), b.fc1_weight);
    f(block_path(l, "mlp.fc1.bias"), b.fc1_bias);
    f(block_path(l, "mlp.fc2.weight"), b.fc2_weight);
    f(block_path(l, "mlp.fc2.bias"), b.fc2_bias);
  }
}

}  // namespace

TransformerParams TransformerParams::zeros(const TransformerConfig& config, std::size_t channels) {
  config.validate();
  if (channels == 0) throw ValidationError("transformer needs at least one channel");
  const auto dt = config.token_dim, dq = config.head_dim(), hid = config.hidden();
  TransformerParams p;
  p.proj_weight = Tensor::zeros({config.pooled_cells(), dt});
  p.proj_bias = Tensor::zeros({dt});
  p.pos = Tensor::zeros({channels, dt});
  for (std::size_t l = 0; l < config.blocks; ++l) {
    BlockParams b;
    b.norm1_scale = Tensor::full({dt}, 1.0);
    b.norm1_shift = Tensor::zeros({dt});
    b.norm2_scale = Tensor::full({dt}, 1.0);
    b.norm2_shift = Tensor::zeros({dt});
    for (std::size_t j = 0; j < config.heads; ++j) {
      b.heads.push_back({Tensor::zeros({dt, dq}), Tensor::zeros({dt, dq}), Tensor::zeros({dt, dt})});
    }
    b.fc1_weight = Tensor::zeros({dt, hid});
    b.fc1_bias = Tensor::zeros({hid});
    b.fc2_weight = Tensor::zeros({hid, dt});
    b.fc2_bias = Tensor::zeros({dt});
    p.blocks.push_back(std::move(b));
  }
  return p;
}

TransformerParams TransformerParams::random(const TransformerConfig& config, std::size_t channels, Rng& rng) {
  TransformerParams p = zeros(config, channels);
  const auto dt = static_cast<double>(config.token_dim);
  const auto n = static_cast<double>(config.pooled_cells());
  const auto hid = static_cast<double>(config.hidden());
  const auto h = static_cast<double>(config.heads);
  p.proj_weight = gaussian(p.proj_weight.shape(), std::sqrt(1.0 / n), rng);
  p.pos = gaussian(p.pos.shape(), 0.02, rng);
  for (auto& b : p.blocks) {
    for (auto& head : b.heads) {
      head.q = gaussian(head.q.shape(), std::sqrt(1.0 / dt), rng);
      head.k = gaussian(head.k.shape(), std::sqrt(1.0 / dt), rng);
      head.v = gaussian(head.v.shape(), std::sqrt(1.0 / (dt * h)), rng);
    }
    b.fc1_weight = gaussian(b.fc1_weight.shape(), std::sqrt(2.0 / dt), rng);
    b.fc2_weight = gaussian(b.fc2_weight.shape(), std::sqrt(1.0 / hid), rng);
  }
  return p;
}

TransformerParams TransformerParams::load(const ParameterStore& store, const std::string& prefix,
                                          const TransformerConfig& config, std::size_t channels) {
  TransformerParams p = zeros(config, channels);
  visit(p, [&](const std::string& leaf, Tensor& t) {
    const auto& stored = store.get(path(prefix, leaf));
    if (stored.shape() != t.shape()) {
      throw ValidationError(path(prefix, leaf) + " has shape " + shape_string(stored.shape()) + ", expected " +
                            shape_string(t.shape()));
    }
    t = stored;
  });
  return p;
}

void TransformerParams::save(ParameterStore& store, const std::string& prefix) const {
  visit(*this, [&](const std::string& leaf, const Tensor& t) { store.add(path(prefix, leaf), t); });
}

TransformerVars bind_constants(ad::Tape& tape, const TransformerParams& params) {
  TransformerVars v;
  v.proj_weight = tape.constant(params.proj_weight);
  v.proj_bias = tape.constant(params.proj_bias);
  v.pos = tape.constant(params.pos);
  for (const auto& b : params.blocks) {
    BlockVars bv;
    bv.norm1_scale = tape.constant(b.norm1_scale);
    bv.norm1_shift = tape.constant(b.norm1_shift);
    bv.norm2_scale = tape.constant(b.norm2_scale);
    bv.norm2_shift = tape.constant(b.norm2_shift);
    for (const auto& h : b.heads) bv.heads.push_back({tape.constant(h.q), tape.constant(h.k), tape.constant(h.v)});
    bv.fc1_weight = tape.constant(b.fc1_weight);
    bv.fc1_bias = tape.constant(b.fc1_bias);
    bv.fc2_weight = tape.constant(b.fc2_weight);
    bv.fc2_bias = tape.constant(b.fc2_bias);
    v.blocks.push_back(std::move(bv));
  }
  return v;
}

TransformerVars bind_parameters(ad::Tape& tape, const ParameterStore& store, const std::string& prefix,
                                const TransformerConfig& config) {
  auto get = [&](const std::string& leaf) { return tape.parameter(store, path(prefix, leaf)); };
  TransformerVars v;
  v.proj_weight = get("proj.weight");
  v.proj_bias = get("proj.bias");
  v.pos = get("pos");
  for (std::size_t l = 0; l < config.blocks; ++l) {
    BlockVars bv;
    bv.norm1_scale = get(block_path(l, "norm1.scale"));
    bv.norm1_shift = get(block_path(l, "norm1.shift"));
    bv.norm2_scale = get(block_path(l, "norm2.scale"));
    bv.norm2_shift = get(block_path(l, "norm2.shift"));
    for (std::size_t j = 0; j < config.heads; ++j) {
      bv.heads.push_back({get(head_path(l, j, "q")), get(head_path(l, j, "k")), get(head_path(l, j, "v"))});
    }
    bv.fc1_weight = get(block_path(l, "mlp.fc1.weight"));
    bv.fc1_bias = get(block_path(l, "mlp.fc1.bias"));
    bv.fc2_weight = get(block_path(l, "mlp.fc2.weight"));
    bv.fc2_bias = get(block_path(l, "mlp.fc2.bias"));
    v.blocks.push_back(std::move(bv));
  }
  return v;
}

ad::Var tokenize(ad::Var z, const TransformerVars& vars, const TransformerConfig& config) {
  const auto& shape = z.shape();
  if (shape.size() != config.pooled.size() + 1) {
    throw ValidationError("tokenize: activation " + shape_string(shape) + " does not match pooled extents " +
                          shape_string(config.pooled));
  }
  const std::size_t c = shape.back();
  if (vars.pos.shape() != Shape{c, config.token_dim}) {
    throw ValidationError("tokenize: positional embeddings " + shape_string(vars.pos.shape()) + " do not match " +
                          std::to_string(c) + " channels");
  }
  const std::size_t n = config.pooled_cells();
  ad::Var pooled = ad::adaptive_avg_pool(z, config.pooled);
  // (n, c) -> A in c x n, one row per channel.
  ad::Var rows = ad::transpose(ad::reshape(pooled, {n, c}));
  ad::Var tokens = ad::affine(rows, vars.proj_weight, vars.proj_bias);
  return ad::add(tokens, vars.pos);
}

ad::Var attention_head(ad::Var r, const HeadVars& head) {
  ad::Var q = ad::matmul(r, head.q);
  ad::Var k = ad::matmul(r, head.k);
  ad::Var v = ad::matmul(r, head.v);
  const double dq = static_cast<double>(head.q.shape().at(1));
  ad::Var logits = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(dq));
  // Sums over channel tokens are order-free so that permuting channels
  // permutes the output exactly.
  return ad::matmul_order_free(ad::softmax_rows(logits), v);
}

ad::Var transformer_block(ad::Var r, const BlockVars& block, double eps) {
  ad::Var normed = ad::layer_norm(r, block.norm1_scale, block.norm1_shift, eps);
  ad::Var y = attention_head(normed, block.heads.at(0));
  for (std::size_t j = 1; j < block.heads.size(); ++j) y = ad::add(y, attention_head(normed, block.heads[j]));
  ad::Var p = ad::add(y, r);
  ad::Var hidden = ad::relu(ad::affine(ad::layer_norm(p, block.norm2_scale, block.norm2_shift, eps),
                                       block.fc1_weight, block.fc1_bias));
  return ad::add(ad::affine(hidden, block.fc2_weight, block.fc2_bias), p);
}

ad::Var run_blocks(ad::Var tokens, const TransformerVars& vars, const TransformerConfig& config) {
  ad::Var r = tokens;
  for (const auto& block : vars.blocks) r = transformer_block(r, block, config.norm_epsilon);
  return r;
}

ad::Var channel_gate(ad::Var r_final) { return ad::sigmoid(ad::mean_rows(r_final)); }

ad::Var gate_weights(ad::Var z, const TransformerVars& vars, const TransformerConfig& config) {
  return channel_gate(run_blocks(tokenize(z, vars, config), vars, config));
}

Tensor tokenize(const Tensor& z, const TransformerParams& params, const TransformerConfig& config) {
  ad::Tape tape;
  return tokenize(tape.constant(z), bind_constants(tape, params), config).value();
}

Tensor attention_head(const Tensor& r, const HeadParams& head) {
  ad::Tape tape;
  HeadVars hv{tape.constant(head.q), tape.constant(head.k), tape.constant(head.v)};
  return attention_head(tape.constant(r), hv).value();
}

Tensor transformer_block(const Tensor& r, const BlockParams& block, double eps) {
  ad::Tape tape;
  TransformerParams holder;
  holder.blocks.push_back(block);
  auto vars = bind_constants(tape, holder);
  return transformer_block(tape.constant(r), vars.blocks[0], eps).value();
}

Tensor run_blocks(const Tensor& tokens, const TransformerParams& params, const TransformerConfig& config) {
  ad::Tape tape;
  return run_blocks(tape.constant(tokens), bind_constants(tape, params), config).value();
}

Tensor channel_gate(const Tensor& r_final) {
  ad::Tape tape;
  return channel_gate(tape.constant(r_final)).value();
}

Tensor gate_weights(const Tensor& z, const TransformerParams& params, const TransformerConfig& config) {
  ad::Tape tape;
  return gate_weights(tape.constant(z), bind_constants(tape, params), config).value();
}

}  // namespace ssmctb::transformer
