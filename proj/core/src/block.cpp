#include "ssmctb/block.hpp"

#include <cmath>

#include "ssmctb/error.hpp"

namespace ssmctb::block {

SsmctbConfig SsmctbConfig::defaults(std::size_t dims, std::size_t channels) {
  SsmctbConfig c;
  c.conv.dims = dims;
  c.conv.channels = channels;
  c.conv.sub_kernel = 1;
  c.conv.dilation = 3;
  c.transformer.pooled = Shape(dims, 1);
  return c;
}

void SsmctbConfig::validate() const {
  conv.validate();
  transformer.validate();
  if (transformer.pooled.size() != conv.dims) {
    throw ValidationError("pooled extents " + shape_string(transformer.pooled) + " do not match dims " +
                          std::to_string(conv.dims));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be a nonnegative number");
}

SsmctbParams SsmctbParams::random(const SsmctbConfig& config, Rng& rng) {
  config.validate();
  SsmctbParams p;
  p.conv = masked::MaskedConvParams::random(config.conv, rng);
  p.transformer = transformer::TransformerParams::random(config.transformer, config.conv.channels, rng);
  return p;
}

SsmctbParams SsmctbParams::load(const ParameterStore& store, const std::string& prefix, const SsmctbConfig& config) {
  return {masked::MaskedConvParams::load(store, prefix, config.conv),
          transformer::TransformerParams::load(store, prefix, config.transformer, config.conv.channels)};
}

void SsmctbParams::save(ParameterStore& store, const std::string& prefix) const {
  conv.save(store, prefix);
  transformer.save(store, prefix);
}

namespace {

void check_input(const Shape& shape, const SsmctbConfig& config) {
  config.validate();
  if (shape.size() != config.conv.dims + 1 || shape.back() != config.conv.channels) {
    throw ValidationError("SSMCTB input " + shape_string(shape) + " does not match dims " +
                          std::to_string(config.conv.dims) + " and " + std::to_string(config.conv.channels) +
                          " channels");
  }
  for (std::size_t a = 0; a < config.conv.dims; ++a) {
    if (shape[a] < config.transformer.pooled[a]) {
      throw ValidationError("SSMCTB input " + shape_string(shape) + " smaller than pooled extents");
    }
  }
}

BlockVars finish(ad::Var x, ad::Var z, const transformer::TransformerVars& tv, const SsmctbConfig& config) {
  ad::Var gate = transformer::gate_weights(z, tv, config.transformer);
  ad::Var x_hat = ad::mul_channels(z, gate);
  return {x_hat, ad::mse(x_hat, x)};
}

}  // namespace

BlockResult ssmctb_forward(const Tensor& x, const SsmctbParams& params, const SsmctbConfig& config) {
  check_input(x.shape(), config);
  ad::Tape tape;
  ad::Var xv = tape.constant(x);
  std::vector<ad::Var> subs;
  for (const auto& filter : params.conv.weights)
    for (const auto& sub : filter) subs.push_back(tape.constant(sub));
  ad::Var z = masked::masked_conv(xv, subs, config.conv);
  auto out = finish(xv, z, transformer::bind_constants(tape, params.transformer), config);
  return {out.x_hat.value(), out.loss.value().item()};
}

BlockVars ssmctb_forward(ad::Tape& tape, ad::Var x, const ParameterStore& store, const std::string& prefix,
                         const SsmctbConfig& config) {
  check_input(x.shape(), config);
  ad::Var z = masked::masked_conv(tape, x, store, prefix, config.conv);
  return finish(x, z, transformer::bind_parameters(tape, store, prefix, config.transformer), config);
}

double total_loss(double host_loss, double block_loss, double lambda) {
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be nonnegative");
  return host_loss + lambda * block_loss;
}

ad::Var total_loss(ad::Var host_loss, ad::Var block_loss, double lambda) {
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be nonnegative");
  return ad::add(host_loss, ad::scale(block_loss, lambda));
}

}  // namespace ssmctb::block
