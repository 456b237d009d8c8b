#include "ssmctb/masked_conv.hpp"

#include <cmath>

#include "ssmctb/error.hpp"

namespace ssmctb::masked {

std::size_t MaskedConvConfig::cells_per_sub_kernel() const {
  std::size_t n = 1;
  for (std::size_t a = 0; a < dims; ++a) n *= sub_kernel;
  return n;
}

void MaskedConvConfig::validate() const {
  if (dims != 2 && dims != 3) throw ValidationError("masked convolution dims must be 2 or 3");
  if (channels == 0) throw ValidationError("masked convolution needs at least one channel");
  if (sub_kernel == 0) throw ValidationError("sub-kernel size k' must be positive");
}

std::vector<ReceptiveOffset> receptive_offsets(const MaskedConvConfig& config) {
  config.validate();
  const auto k = static_cast<int>(config.sub_kernel);
  const auto d = static_cast<int>(config.dilation);
  std::vector<ReceptiveOffset> out;
  out.reserve(config.sub_kernel_count() * config.cells_per_sub_kernel());
  for (std::size_t i = 0; i < config.sub_kernel_count(); ++i) {
    for (std::size_t cell = 0; cell < config.cells_per_sub_kernel(); ++cell) {
      conv::Offset o(config.dims);
      std::size_t rem = cell;
      for (std::size_t a = config.dims; a-- > 0;) {
        const int u = static_cast<int>(rem % config.sub_kernel);
        rem /= config.sub_kernel;
        const bool positive = (i >> (config.dims - 1 - a)) & 1U;
        o[a] = positive ? d + 1 + u : -(d + k) + u;
      }
      out.push_back({i, cell, std::move(o)});
    }
  }
  return out;
}

Shape sub_kernel_shape(const MaskedConvConfig& config) {
  Shape s(config.dims, config.sub_kernel);
  s.push_back(config.channels);
  return s;
}

std::string sub_kernel_path(const std::string& prefix, std::size_t filter, std::size_t sub_kernel) {
  return prefix + "masked_conv.filter" + std::to_string(filter) + ".sub" + std::to_string(sub_kernel);
}

MaskedConvParams MaskedConvParams::zeros(const MaskedConvConfig& config) {
  config.validate();
  MaskedConvParams p;
  p.weights.assign(config.channels,
                   std::vector<Tensor>(config.sub_kernel_count(), Tensor::zeros(sub_kernel_shape(config))));
  return p;
}

MaskedConvParams MaskedConvParams::random(const MaskedConvConfig& config, Rng& rng) {
  MaskedConvParams p = zeros(config);
  const double fan_in =
      static_cast<double>(config.sub_kernel_count() * config.cells_per_sub_kernel() * config.channels);
  const double stddev = std::sqrt(2.0 / fan_in);
  for (auto& filter : p.weights)
    for (auto& sub : filter)
      for (auto& v : sub.mutable_data()) v = rng.normal(0.0, stddev);
  return p;
}

MaskedConvParams MaskedConvParams::load(const ParameterStore& store, const std::string& prefix,
                                        const MaskedConvConfig& config) {
  MaskedConvParams p = zeros(config);
  for (std::size_t j = 0; j < config.channels; ++j) {
    for (std::size_t i = 0; i < config.sub_kernel_count(); ++i) {
      const auto& t = store.get(sub_kernel_path(prefix, j, i));
      if (t.shape() != sub_kernel_shape(config)) {
        throw ValidationError("sub-kernel " + sub_kernel_path(prefix, j, i) + " has shape " +
                              shape_string(t.shape()));
      }
      p.weights[j][i] = t;
    }
  }
  return p;
}

void MaskedConvParams::save(ParameterStore& store, const std::string& prefix) const {
  for (std::size_t j = 0; j < weights.size(); ++j)
    for (std::size_t i = 0; i < weights[j].size(); ++i) store.add(sub_kernel_path(prefix, j, i), weights[j][i]);
}

namespace {

void check_params(const std::vector<const Tensor*>& subs, const MaskedConvConfig& config) {
  if (subs.size() != config.channels * config.sub_kernel_count()) {
    throw ValidationError("masked convolution expects " +
                          std::to_string(config.channels * config.sub_kernel_count()) + " sub-kernels, got " +
                          std::to_string(subs.size()));
  }
  const Shape expected = sub_kernel_shape(config);
  for (const auto* t : subs) {
    if (t->shape() != expected) {
      throw ValidationError("sub-kernel shape " + shape_string(t->shape()) + ", expected " +
                            shape_string(expected));
    }
  }
}

// subs in filter-major order -> (taps, c_in, c_out)
Tensor pack(const std::vector<const Tensor*>& subs, const MaskedConvConfig& config) {
  check_params(subs, config);
  const std::size_t c = config.channels;
  const std::size_t cells = config.cells_per_sub_kernel();
  const std::size_t n_sub = config.sub_kernel_count();
  Tensor w = Tensor::zeros({n_sub * cells, c, c});
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t i = 0; i < n_sub; ++i) {
      const Tensor& k = *subs[j * n_sub + i];
      for (std::size_t cell = 0; cell < cells; ++cell)
        for (std::size_t m = 0; m < c; ++m) w[((i * cells + cell) * c + m) * c + j] = k[cell * c + m];
    }
  }
  return w;
}

Tensor unpack_one(const Tensor& w, std::size_t filter, std::size_t sub, const MaskedConvConfig& config) {
  const std::size_t c = config.channels;
  const std::size_t cells = config.cells_per_sub_kernel();
  Tensor k = Tensor::zeros(sub_kernel_shape(config));
  for (std::size_t cell = 0; cell < cells; ++cell)
    for (std::size_t m = 0; m < c; ++m) k[cell * c + m] = w[((sub * cells + cell) * c + m) * c + filter];
  return k;
}

void check_input(const Shape& shape, const MaskedConvConfig& config) {
  if (shape.size() != config.dims + 1 || shape.back() != config.channels) {
    throw ValidationError("masked convolution expects " + std::to_string(config.dims) + " spatial axes and " +
                          std::to_string(config.channels) + " channels, got " + shape_string(shape));
  }
}

}  // namespace

Tensor MaskedConvParams::packed(const MaskedConvConfig& config) const {
  std::vector<const Tensor*> subs;
  for (const auto& filter : weights)
    for (const auto& sub : filter) subs.push_back(&sub);
  return pack(subs, config);
}

conv::TapGeometry geometry(const MaskedConvConfig& config, const Shape& spatial) {
  conv::TapGeometry geo;
  for (auto& ro : receptive_offsets(config)) geo.taps.push_back(std::move(ro.offset));
  geo.stride = 1;
  geo.out_spatial = spatial;
  return geo;
}

Tensor masked_conv_preactivation(const Tensor& x, const MaskedConvParams& params, const MaskedConvConfig& config) {
  check_input(x.shape(), config);
  const Shape spatial(x.shape().begin(), x.shape().end() - 1);
  return conv::tap_conv_forward(x, params.packed(config), geometry(config, spatial));
}

Tensor masked_conv_forward(const Tensor& x, const MaskedConvParams& params, const MaskedConvConfig& config) {
  return relu(masked_conv_preactivation(x, params, config));
}

ad::Var masked_conv_linear(ad::Var x, std::span<const ad::Var> sub_kernels, const MaskedConvConfig& config) {
  check_input(x.shape(), config);
  std::vector<const Tensor*> subs;
  for (const auto& v : sub_kernels) subs.push_back(&v.value());
  std::vector<ad::Var> inputs(sub_kernels.begin(), sub_kernels.end());
  ad::Var w = x.tape()->record(pack(subs, config), sub_kernels, [inputs, config](const Tensor& g, ad::Tape& t) {
    const std::size_t n_sub = config.sub_kernel_count();
    for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
      if (!t.needs_grad(inputs[idx].id())) continue;
      t.accumulate(inputs[idx].id(), unpack_one(g, idx / n_sub, idx % n_sub, config));
    }
  });
  const Shape spatial(x.shape().begin(), x.shape().end() - 1);
  return ad::tap_conv(x, w, geometry(config, spatial));
}

ad::Var masked_conv(ad::Var x, std::span<const ad::Var> sub_kernels, const MaskedConvConfig& config) {
  return ad::relu(masked_conv_linear(x, sub_kernels, config));
}

ad::Var masked_conv(ad::Tape& tape, ad::Var x, const ParameterStore& store, const std::string& prefix,
                    const MaskedConvConfig& config) {
  std::vector<ad::Var> subs;
  for (std::size_t j = 0; j < config.channels; ++j)
    for (std::size_t i = 0; i < config.sub_kernel_count(); ++i)
      subs.push_back(tape.parameter(store, sub_kernel_path(prefix, j, i)));
  return masked_conv(x, subs, config);
}

}  // namespace ssmctb::masked
