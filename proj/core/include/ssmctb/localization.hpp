#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ssmctb/metrics.hpp"

namespace ssmctb::metrics {

/// 4-connected component labels for one h x w binary frame. Label 0 is
/// background; components are numbered 1..count in row-major discovery order.
struct Labeling {
  std::vector<std::uint32_t> labels;
  std::uint32_t count = 0;
};
Labeling label_components(const std::vector<std::uint8_t>& mask, std::size_t height, std::size_t width);

struct LocalizationOptions {
  double alpha = 0.1;  // IOU threshold for a region match
  double beta = 0.1;   // matched-frame fraction for a track match
  /// Cap on the number of score thresholds; 0 means every distinct score.
  /// Above the cap, thresholds are evenly spaced quantiles of the distinct scores.
  std::size_t max_thresholds = 256;

  void validate() const;
};

struct CurvePoint {
  double false_positives_per_frame = 0.0;
  double detection_rate = 0.0;
};

struct LocalizationReport {
  double rbdc = 0.0;
  double tbdc = 0.0;
  std::size_t thresholds = 0;
  std::size_t regions = 0;
  std::size_t tracks = 0;
  std::vector<CurvePoint> region_curve;
  std::vector<CurvePoint> track_curve;
};

/// Area over false-positive rates in [0, 1] under r(f) = max detection rate
/// among points with false_positives_per_frame <= f (0 when none qualify).
double envelope_area(std::vector<CurvePoint> curve);

/// Sweeps thresholds t over distinct pixel scores; a pixel is detected when
/// its score exceeds t. Ground-truth regions come from track ids when present
/// (one region per id per frame, tracks must span consecutive frames),
/// otherwise from 4-connected components of each frame's mask (each its own
/// track). A detected region that overlaps no ground-truth region with
/// IOU > alpha counts as a false positive.
LocalizationReport localization(const ScoredFrames& videos, const LocalizationOptions& options = {});

double rbdc(const ScoredFrames& videos, const LocalizationOptions& options = {});
double tbdc(const ScoredFrames& videos, const LocalizationOptions& options = {});

}  // namespace ssmctb::metrics
