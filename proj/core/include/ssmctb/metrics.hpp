#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssmctb/tensor.hpp"

namespace ssmctb::metrics {

/// Area under the ROC curve: the probability that a random positive outscores
/// a random negative, ties counted one half. Needs both classes.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Sum over tie-grouped thresholds (descending score) of
/// (recall step) x (precision at that threshold). Needs a positive label.
double average_precision(std::span<const double> scores, std::span<const int> labels);

/// One video (or one image collection) of scored frames.
struct ScoredVideo {
  std::string name;
  std::vector<double> frame_scores;
  std::vector<int> frame_labels;
  /// Optional per-frame spatial data, all shaped (frames, h, w).
  std::optional<Tensor> pixel_maps;
  std::optional<Tensor> masks;
  /// Ground-truth anomaly track ids; 0 marks background.
  std::optional<Tensor> track_ids;

  void validate() const;
};

using ScoredFrames = std::vector<ScoredVideo>;

/// roc_auc over the concatenation of all videos.
double micro_auc(const ScoredFrames& videos);

struct MacroAuc {
  double value = 0.0;
  std::size_t used = 0;
  /// Videos left out because they carry a single class.
  std::vector<std::string> skipped;
};

/// Mean of per-video roc_auc over videos that contain both classes.
MacroAuc macro_auc(const ScoredFrames& videos);

/// Pixel-level roc_auc / AP over every pixel of every frame with a map.
double pixel_auroc(const ScoredFrames& videos);
double pixel_average_precision(const ScoredFrames& videos);

}  // namespace ssmctb::metrics
