#include "ssmctb/autoencoder.hpp"

#include <cmath>

#include "ssmctb/conv.hpp"
#include "ssmctb/error.hpp"
#include "ssmctb/rng.hpp"

namespace ssmctb::host {

std::array<AutoencoderConfig::Stage, kDecoderBlocks> AutoencoderConfig::decoder_stages() const {
  return {{{width2, width2, true, true},
           {width2, width1, true, true},
           {width1, width1, false, true},
           {width1, in_channels, false, false}}};
}

Shape AutoencoderConfig::input_shape() const {
  Shape s = extents;
  s.push_back(in_channels);
  return s;
}

Shape AutoencoderConfig::stage_extents(std::size_t position) const {
  if (position < 1 || position > kDecoderBlocks) throw ValidationError("decoder position must be in 1..4");
  Shape s = extents;
  const std::size_t divisor = position == 1 ? 2 : 1;
  for (auto& e : s) e /= divisor;
  return s;
}

block::SsmctbConfig AutoencoderConfig::site_config() const {
  block::SsmctbConfig c = block;
  c.conv.dims = dims;
  c.conv.channels = decoder_stages().at(ssmctb_position - 1).in;
  return c;
}

void AutoencoderConfig::validate() const {
  if (dims != 2 && dims != 3) throw ValidationError("autoencoder dims must be 2 or 3");
  if (extents.size() != dims) {
    throw ValidationError("autoencoder extents " + shape_string(extents) + " do not have " + std::to_string(dims) +
                          " axes");
  }
  for (auto e : extents) {
    if (e < 4 || e % 4 != 0) throw ValidationError("autoencoder extents must be positive multiples of 4");
  }
  if (in_channels == 0 || width1 == 0 || width2 == 0) throw ValidationError("channel widths must be positive");
  if (ssmctb_position > kDecoderBlocks) throw ValidationError("ssmctb_position must be none or 1..4");
  if (ssmctb_position != kNoBlock) {
    const auto stage = decoder_stages()[ssmctb_position - 1];
    if (stage.in != stage.out && !width_adapter) {
      throw ValidationError("decoder block " + std::to_string(ssmctb_position) + " maps " +
                            std::to_string(stage.in) + " -> " + std::to_string(stage.out) +
                            " channels; SSMCTB preserves width and the adapter is disabled");
    }
    auto site = site_config();
    site.validate();
    const auto ext = stage_extents(ssmctb_position);
    for (std::size_t a = 0; a < dims; ++a) {
      if (site.transformer.pooled[a] > ext[a]) throw ValidationError("pooled extents exceed SSMCTB input extents");
    }
  }
}

std::string decoder_prefix(std::size_t position) { return "decoder.block" + std::to_string(position) + "."; }

namespace {

std::size_t taps(std::size_t dims, std::size_t kernel) {
  std::size_t n = 1;
  for (std::size_t a = 0; a < dims; ++a) n *= kernel;
  return n;
}

void add_conv(ParameterStore& store, const std::string& prefix, std::size_t dims, std::size_t kernel,
              std::size_t cin, std::size_t cout, Rng& rng) {
  const std::size_t t = taps(dims, kernel);
  const double stddev = std::sqrt(2.0 / static_cast<double>(t * cin));
  Tensor w = Tensor::zeros({t, cin, cout});
  for (auto& v : w.mutable_data()) v = rng.normal(0.0, stddev);
  store.add(prefix + "weight", std::move(w));
  store.add(prefix + "bias", Tensor::zeros({cout}));
}

ad::Var conv_layer(ad::Tape& tape, ad::Var x, const ParameterStore& params, const std::string& prefix,
                   std::size_t kernel, std::size_t stride) {
  return ad::conv(x, tape.parameter(params, prefix + "weight"), tape.parameter(params, prefix + "bias"), kernel,
                  stride, kernel / 2);
}

}  // namespace

ParameterStore build(const AutoencoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, "init"));
  ParameterStore store;
  add_conv(store, "encoder.conv0.", config.dims, 3, config.in_channels, config.width1, rng);
  add_conv(store, "encoder.conv1.", config.dims, 3, config.width1, config.width2, rng);
  add_conv(store, "bottleneck.", config.dims, 3, config.width2, config.width2, rng);
  const auto stages = config.decoder_stages();
  for (std::size_t p = 1; p <= kDecoderBlocks; ++p) {
    const auto& stage = stages[p - 1];
    const auto prefix = decoder_prefix(p);
    if (p == config.ssmctb_position) {
      block::SsmctbParams::random(config.site_config(), rng).save(store, prefix);
      if (stage.in != stage.out) add_conv(store, prefix + "adapter.", config.dims, 1, stage.in, stage.out, rng);
    } else {
      add_conv(store, prefix + "conv.", config.dims, 3, stage.in, stage.out, rng);
    }
  }
  return store;
}

ForwardVars forward(ad::Tape& tape, ad::Var x, const ParameterStore& params, const AutoencoderConfig& config) {
  if (x.shape() != config.input_shape()) {
    throw ValidationError("autoencoder input " + shape_string(x.shape()) + " does not match configured " +
                          shape_string(config.input_shape()));
  }
  ad::Var h = ad::relu(conv_layer(tape, x, params, "encoder.conv0.", 3, 2));
  h = ad::relu(conv_layer(tape, h, params, "encoder.conv1.", 3, 2));
  h = ad::relu(conv_layer(tape, h, params, "bottleneck.", 3, 1));

  ad::Var block_loss = tape.constant(Tensor::scalar(0.0));
  const auto stages = config.decoder_stages();
  for (std::size_t p = 1; p <= kDecoderBlocks; ++p) {
    const auto& stage = stages[p - 1];
    const auto prefix = decoder_prefix(p);
    if (stage.upsample) h = ad::upsample_nearest(h, 2);
    if (p == config.ssmctb_position) {
      auto out = block::ssmctb_forward(tape, h, params, prefix, config.site_config());
      block_loss = out.loss;
      h = out.x_hat;
      if (stage.in != stage.out) h = conv_layer(tape, h, params, prefix + "adapter.", 1, 1);
    } else {
      h = conv_layer(tape, h, params, prefix + "conv.", 3, 1);
    }
    if (stage.activation) h = ad::relu(h);
  }
  return {h, block_loss};
}

Tensor reconstruct(const ParameterStore& params, const AutoencoderConfig& config, const Tensor& x) {
  ad::Tape tape;
  return forward(tape, tape.constant(x), params, config).output.value();
}

}  // namespace ssmctb::host
