#pragma once

#include <filesystem>

#include "ssmctb/dataset.hpp"
#include "ssmctb/metrics.hpp"

namespace ssmctb::metrics {

/// Score exchange directory: manifest.json listing, per video, SSTB1 files for
/// frame scores and frame labels, plus optional pixel maps, masks and track ids.
struct ScoreManifest {
  data::DatasetKind kind = data::DatasetKind::images;
  ScoredFrames videos;
};

void save_scores(const ScoreManifest& scores, const std::filesystem::path& dir);
ScoreManifest load_scores(const std::filesystem::path& dir);

}  // namespace ssmctb::metrics
