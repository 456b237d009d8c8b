#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssmctb/tensor.hpp"

namespace ssmctb::data {

enum class DatasetKind { images, videos };
std::string to_string(DatasetKind kind);
DatasetKind parse_kind(const std::string& text);

enum class VideoAnomaly { speed, reversal, new_blob };
std::string to_string(VideoAnomaly kind);
VideoAnomaly parse_anomaly(const std::string& text);

struct ImageGenSpec {
  std::uint64_t seed = 7;
  std::size_t n_train = 256;
  std::size_t n_test = 128;
  std::size_t height = 32;
  std::size_t width = 32;
  double anomaly_fraction = 0.5;

  void validate() const;
  bool operator==(const ImageGenSpec&) const = default;
};

struct VideoGenSpec {
  std::uint64_t seed = 7;
  std::size_t n_train_videos = 8;
  std::size_t n_test_videos = 8;
  std::size_t frames = 64;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t blobs = 2;
  std::vector<VideoAnomaly> kinds{VideoAnomaly::speed, VideoAnomaly::reversal, VideoAnomaly::new_blob};

  void validate() const;
  bool operator==(const VideoGenSpec&) const = default;
};

/// A sequence of single-channel frames. Image collections are stored as one
/// clip whose frames are independent images.
struct Clip {
  std::string name;
  Tensor frames;  // (T, h, w), intensities in [0, 1]
  std::vector<int> labels;
  Tensor masks;   // (T, h, w), 1 on anomalous pixels
  std::optional<Tensor> track_ids;  // (T, h, w), 0 background

  std::size_t length() const { return labels.size(); }
  std::size_t height() const { return frames.extent(1); }
  std::size_t width() const { return frames.extent(2); }
  void validate() const;
  bool operator==(const Clip&) const = default;
};

struct AnomalyDataset {
  DatasetKind kind = DatasetKind::images;
  ImageGenSpec image_spec;
  VideoGenSpec video_spec;
  std::vector<Clip> train;
  std::vector<Clip> test;

  bool operator==(const AnomalyDataset&) const = default;
};

AnomalyDataset generate_images(const ImageGenSpec& spec);
AnomalyDataset generate_videos(const VideoGenSpec& spec);

/// Renders a Gaussian bump of the given amplitude and width with toroidal
/// wrap-around, as used for video blobs. Exposed for tests.
Tensor render_blob(std::size_t height, std::size_t width, double row, double col, double sigma, double amplitude);

/// Pixels where a blob of the given amplitude contributes more than this count
/// as its footprint in masks.
inline constexpr double kFootprintLevel = 0.1;

/// Model input for frame t of a clip.
/// dims 2: (h, w, window) with channel j = frame t - window + 1 + j.
/// dims 3: (window, h, w, 1). Frames before 0 repeat frame 0.
Tensor frame_input(const Clip& clip, std::size_t t, std::size_t window, std::size_t dims);

/// Dataset directory: manifest.json plus one SSTB1 file per tensor.
void save_dataset(const AnomalyDataset& dataset, const std::filesystem::path& dir);
AnomalyDataset load_dataset(const std::filesystem::path& dir);

}  // namespace ssmctb::data
