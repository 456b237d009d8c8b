#include "ssmctb/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssmctb/conv.hpp"
#include "ssmctb/error.hpp"
#include "ssmctb/rng.hpp"

namespace ssmctb::host {

void TrainConfig::validate() const {
  if (epochs == 0) throw ValidationError("epochs must be positive");
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be nonnegative");
  adam.validate();
}

TrainResult train(const std::vector<Tensor>& samples, const AutoencoderConfig& model, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  return train_from(build(model, config.seed), samples, model, config, on_epoch);
}

TrainResult train_from(ParameterStore params, const std::vector<Tensor>& samples, const AutoencoderConfig& model,
                       const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  model.validate();
  if (samples.empty()) throw ValidationError("training needs at least one sample");
  for (const auto& s : samples) {
    if (s.shape() != model.input_shape()) {
      throw ValidationError("training sample " + shape_string(s.shape()) + " does not match model input " +
                            shape_string(model.input_shape()));
    }
  }

  Rng order_rng(derive_seed(config.seed, "shuffle"));
  Adam optimizer(config.adam);
  TrainResult result;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double host_sum = 0.0, block_sum = 0.0, total_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      Gradients batch;
      for (std::size_t i = start; i < stop; ++i) {
        ad::Tape tape;
        ad::Var x = tape.constant(samples[order[i]]);
        auto out = forward(tape, x, params, model);
        ad::Var host_loss = ad::mse(out.output, x);
        ad::Var total = block::total_loss(host_loss, out.block_loss, config.lambda);
        const double t = total.value().item();
        if (!std::isfinite(t)) {
          throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", sample " +
                               std::to_string(order[i]));
        }
        host_sum += host_loss.value().item();
        block_sum += out.block_loss.value().item();
        total_sum += t;
        for (auto& [path, g] : tape.backward(total)) {
          auto [it, fresh] = batch.try_emplace(path, g);
          if (!fresh) {
            auto dst = it->second.mutable_data();
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[k];
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& [path, g] : batch) {
        for (auto& v : g.mutable_data()) v *= inv;
        if (!all_finite(g)) throw NumericalError("non-finite gradient for " + path);
      }
      optimizer.step(params, batch);
    }
    const double n = static_cast<double>(samples.size());
    EpochLog entry{epoch, host_sum / n, block_sum / n, total_sum / n};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.params = std::move(params);
  return result;
}

SampleScore score_reconstruction(const Tensor& sample, const Tensor& reconstruction) {
  if (sample.shape() != reconstruction.shape()) throw ValidationError("reconstruction shape mismatch");
  const std::size_t c = sample.shape().back();
  Shape spatial(sample.shape().begin(), sample.shape().end() - 1);
  Tensor err = Tensor::zeros(spatial);
  for (std::size_t p = 0; p < err.size(); ++p) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = reconstruction[p * c + ch] - sample[p * c + ch];
      acc += d * d;
    }
    err[p] = acc / static_cast<double>(c);
  }
  Tensor smoothed = conv::mean_filter3(err);
  const double top = *std::max_element(smoothed.data().begin(), smoothed.data().end());
  return {top, std::move(smoothed)};
}

SampleScore score(const ParameterStore& params, const AutoencoderConfig& model, const Tensor& sample) {
  if (sample.shape() != model.input_shape()) {
    throw ValidationError("sample " + shape_string(sample.shape()) + " does not match model input " +
                          shape_string(model.input_shape()));
  }
  return score_reconstruction(sample, reconstruct(params, model, sample));
}

}  // namespace ssmctb::host
