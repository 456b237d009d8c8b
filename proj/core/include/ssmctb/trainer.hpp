#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ssmctb/adam.hpp"
#include "ssmctb/autoencoder.hpp"
#include "ssmctb/parameter_store.hpp"

namespace ssmctb::host {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  AdamConfig adam;
  double lambda = block::kDefaultLambda;
  std::uint64_t seed = 7;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double host_loss = 0.0;
  double block_loss = 0.0;
  double total_loss = 0.0;
};

struct TrainResult {
  ParameterStore params;
  std::vector<EpochLog> log;
};

/// Minimizes mse(output, input) + lambda * block_loss with Adam over the
/// given normal samples. Per-sample gradients are summed then divided by the
/// batch size. Epoch losses are means over the samples seen that epoch,
/// measured before each update. Throws NumericalError on a non-finite loss.
TrainResult train(const std::vector<Tensor>& samples, const AutoencoderConfig& model, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Continues from existing parameters (used by tests and warm starts).
TrainResult train_from(ParameterStore params, const std::vector<Tensor>& samples, const AutoencoderConfig& model,
                       const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch = {});

struct SampleScore {
  double frame_score = 0.0;
  /// Smoothed per-position squared error, spatial extents only.
  Tensor pixel_map;
};

/// Per-position squared error averaged over channels, smoothed with a 3^dims
/// mean filter; the frame score is the maximum of the smoothed map.
SampleScore score_reconstruction(const Tensor& sample, const Tensor& reconstruction);
SampleScore score(const ParameterStore& params, const AutoencoderConfig& model, const Tensor& sample);

}  // namespace ssmctb::host
