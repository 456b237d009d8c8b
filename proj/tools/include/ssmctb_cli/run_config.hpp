#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "ssmctb/dataset.hpp"
#include "ssmctb/trainer.hpp"

namespace ssmctb::cli {

struct DataSection {
  data::DatasetKind kind = data::DatasetKind::images;
  /// Existing dataset directory; empty means generate from the specs below.
  std::string dir;
  /// Frames per model input for videos (channels in 2D, leading axis in 3D).
  std::size_t window = 3;
  /// Use every n-th training frame.
  std::size_t train_stride = 1;
  data::ImageGenSpec images;
  data::VideoGenSpec videos;
};

struct GradCheckSection {
  Shape extents{8, 8};
  std::size_t channels = 2;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t max_probes_per_parameter = 0;
};

/// One JSON file configures a run. Sections: seed, output_dir, data, model,
/// ssmctb, train, grad_check. Unknown keys are rejected. The single seed
/// feeds dataset generation and training; each consumer derives a named
/// sub-seed from it ("images.train", "videos.test", "init", "shuffle", ...).
struct RunConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "run";
  DataSection data;
  /// Extents and input channels are filled in from the dataset.
  host::AutoencoderConfig model;
  host::TrainConfig train;
  GradCheckSection grad_check;

  /// Propagates the seed into the generator specs and training config.
  void set_seed(std::uint64_t value);
  void set_lambda(double value);
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// "none" or 1..4.
std::size_t parse_position(const std::string& text);

}  // namespace ssmctb::cli
