#include "ssmctb/localization.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "ssmctb/error.hpp"

namespace ssmctb::metrics {

Labeling label_components(const std::vector<std::uint8_t>& mask, std::size_t height, std::size_t width) {
  if (mask.size() != height * width) throw ValidationError("label_components: mask size does not match extents");
  Labeling out;
  out.labels.assign(mask.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || out.labels[start]) continue;
    const std::uint32_t id = ++out.count;
    out.labels[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t r = p / width, c = p % width;
      auto visit = [&](std::size_t q) {
        if (mask[q] && !out.labels[q]) {
          out.labels[q] = id;
          stack.push_back(q);
        }
      };
      if (r > 0) visit(p - width);
      if (r + 1 < height) visit(p + width);
      if (c > 0) visit(p - 1);
      if (c + 1 < width) visit(p + 1);
    }
  }
  return out;
}

void LocalizationOptions::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in [0, 1)");
  if (!(beta >= 0.0 && beta < 1.0)) throw ValidationError("beta must lie in [0, 1)");
  if (max_thresholds == 1) throw ValidationError("max_thresholds must be 0 or at least 2");
}

double envelope_area(std::vector<CurvePoint> curve) {
  std::sort(curve.begin(), curve.end(), [](const CurvePoint& a, const CurvePoint& b) {
    return a.false_positives_per_frame < b.false_positives_per_frame;
  });
  double area = 0.0, best = 0.0, from = 0.0;
  for (const auto& pt : curve) {
    const double f = pt.false_positives_per_frame;
    if (f >= 1.0) break;
    if (f > from) {
      area += best * (f - from);
      from = f;
    }
    best = std::max(best, pt.detection_rate);
  }
  return area + best * (1.0 - from);
}

namespace {

// Ground truth of one video, flattened per frame.
struct FrameTruth {
  std::vector<std::uint32_t> labels;   // 0 or 1 + index into regions
  std::vector<std::size_t> region_track;  // global track index per region
  std::vector<std::size_t> region_area;
};

struct VideoTruth {
  const ScoredVideo* video = nullptr;
  std::size_t height = 0, width = 0;
  std::vector<FrameTruth> frames;
};

struct Truth {
  std::vector<VideoTruth> videos;
  std::vector<std::size_t> track_length;
  std::size_t regions = 0;
  std::size_t frames = 0;
};

void add_region_pixels(FrameTruth& ft, std::size_t region) { ft.region_area.at(region) += 1; }

Truth collect_truth(const ScoredFrames& videos) {
  Truth truth;
  for (const auto& v : videos) {
    v.validate();
    if (!v.pixel_maps) throw ValidationError("video " + v.name + ": localization needs pixel maps");
    if (!v.track_ids && !v.masks) throw ValidationError("video " + v.name + ": localization needs masks or track ids");
    const auto& shape = v.pixel_maps->shape();
    const std::size_t frames = shape[0], h = shape[1], w = shape[2];
    const std::size_t plane = h * w;
    if (v.track_ids && v.track_ids->shape() != shape) {
      throw ValidationError("video " + v.name + ": track ids do not match pixel maps");
    }
    if (v.masks && v.masks->shape() != shape) throw ValidationError("video " + v.name + ": masks do not match pixel maps");

    VideoTruth vt{&v, h, w, std::vector<FrameTruth>(frames)};
    if (v.track_ids) {
      // Track id -> (global track index, last frame seen).
      std::map<long long, std::pair<std::size_t, std::size_t>> tracks;
      for (std::size_t f = 0; f < frames; ++f) {
        auto& ft = vt.frames[f];
        ft.labels.assign(plane, 0);
        std::map<long long, std::size_t> local;
        for (std::size_t p = 0; p < plane; ++p) {
          const double raw = (*v.track_ids)[f * plane + p];
          if (raw != std::floor(raw) || raw < 0.0) {
            throw ValidationError("video " + v.name + ": track ids must be nonnegative integers");
          }
          const auto id = static_cast<long long>(raw);
          if (id == 0) continue;
          auto [it, fresh] = local.try_emplace(id, ft.region_area.size());
          if (fresh) {
            auto [tt, new_track] = tracks.try_emplace(id, std::pair{truth.track_length.size(), f});
            if (new_track) {
              truth.track_length.push_back(0);
            } else if (tt->second.second + 1 != f) {
              throw ValidationError("video " + v.name + ": track " + std::to_string(id) +
                                    " skips frames; tracks must span consecutive frames");
            }
            tt->second.second = f;
            truth.track_length[tt->second.first] += 1;
            ft.region_track.push_back(tt->second.first);
            ft.region_area.push_back(0);
          }
          ft.labels[p] = static_cast<std::uint32_t>(it->second + 1);
          add_region_pixels(ft, it->second);
        }
        truth.regions += ft.region_area.size();
      }
    } else {
      for (std::size_t f = 0; f < frames; ++f) {
        auto& ft = vt.frames[f];
        std::vector<std::uint8_t> bits(plane);
        for (std::size_t p = 0; p < plane; ++p) bits[p] = (*v.masks)[f * plane + p] > 0.5 ? 1 : 0;
        auto cc = label_components(bits, h, w);
        ft.labels = std::move(cc.labels);
        ft.region_area.assign(cc.count, 0);
        for (std::uint32_t r = 0; r < cc.count; ++r) {
          ft.region_track.push_back(truth.track_length.size());
          truth.track_length.push_back(1);
        }
        for (auto l : ft.labels) {
          if (l) add_region_pixels(ft, l - 1);
        }
        truth.regions += cc.count;
      }
    }
    truth.frames += frames;
    truth.videos.push_back(std::move(vt));
  }
  if (truth.frames == 0) throw ValidationError("localization needs at least one frame");
  if (truth.regions == 0) throw ValidationError("localization needs at least one ground-truth region");
  return truth;
}

std::vector<double> select_thresholds(const ScoredFrames& videos, std::size_t cap) {
  std::vector<double> values;
  for (const auto& v : videos) {
    for (double s : v.pixel_maps->data()) {
      if (!std::isfinite(s)) throw ValidationError("video " + v.name + ": non-finite pixel score");
      values.push_back(s);
    }
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (cap == 0 || values.size() <= cap) return values;
  std::vector<double> picked;
  picked.reserve(cap);
  const double span = static_cast<double>(values.size() - 1);
  for (std::size_t i = 0; i < cap; ++i) {
    const auto at = static_cast<std::size_t>(std::llround(span * static_cast<double>(i) / static_cast<double>(cap - 1)));
    if (picked.empty() || picked.back() != values[at]) picked.push_back(values[at]);
  }
  return picked;
}

struct SweepCounts {
  std::size_t matched_regions = 0;
  std::size_t false_positives = 0;
  std::vector<std::size_t> track_hits;
};

SweepCounts sweep(const Truth& truth, double threshold, double alpha) {
  SweepCounts counts;
  counts.track_hits.assign(truth.track_length.size(), 0);
  std::vector<std::uint8_t> bits;
  std::unordered_map<std::uint64_t, std::size_t> overlap;
  for (const auto& vt : truth.videos) {
    const std::size_t plane = vt.height * vt.width;
    const auto scores = vt.video->pixel_maps->data();
    bits.resize(plane);
    for (std::size_t f = 0; f < vt.frames.size(); ++f) {
      const auto& ft = vt.frames[f];
      for (std::size_t p = 0; p < plane; ++p) bits[p] = scores[f * plane + p] > threshold ? 1 : 0;
      const auto det = label_components(bits, vt.height, vt.width);
      if (det.count == 0) continue;
      std::vector<std::size_t> det_area(det.count, 0);
      overlap.clear();
      const std::uint64_t stride = ft.region_area.size() + 1;
      for (std::size_t p = 0; p < plane; ++p) {
        const auto d = det.labels[p];
        if (!d) continue;
        det_area[d - 1] += 1;
        if (const auto g = ft.labels[p]) overlap[(d - 1) * stride + (g - 1)] += 1;
      }
      std::vector<std::uint8_t> det_hit(det.count, 0), gt_hit(ft.region_area.size(), 0);
      for (const auto& [key, inter] : overlap) {
        const std::size_t d = key / stride, g = key % stride;
        const double uni = static_cast<double>(det_area[d] + ft.region_area[g] - inter);
        if (static_cast<double>(inter) / uni > alpha) {
          det_hit[d] = 1;
          gt_hit[g] = 1;
        }
      }
      for (std::size_t g = 0; g < gt_hit.size(); ++g) {
        if (!gt_hit[g]) continue;
        counts.matched_regions += 1;
        counts.track_hits[ft.region_track[g]] += 1;
      }
      counts.false_positives += static_cast<std::size_t>(std::count(det_hit.begin(), det_hit.end(), 0));
    }
  }
  return counts;
}

}  // namespace

LocalizationReport localization(const ScoredFrames& videos, const LocalizationOptions& options) {
  options.validate();
  const Truth truth = collect_truth(videos);
  const auto thresholds = select_thresholds(videos, options.max_thresholds);

  LocalizationReport report;
  report.thresholds = thresholds.size();
  report.regions = truth.regions;
  report.tracks = truth.track_length.size();
  const double frames = static_cast<double>(truth.frames);
  for (double t : thresholds) {
    const auto counts = sweep(truth, t, options.alpha);
    const double fp = static_cast<double>(counts.false_positives) / frames;
    std::size_t tracks_hit = 0;
    for (std::size_t k = 0; k < counts.track_hits.size(); ++k) {
      const double fraction = static_cast<double>(counts.track_hits[k]) / static_cast<double>(truth.track_length[k]);
      if (fraction > options.beta) ++tracks_hit;
    }
    report.region_curve.push_back({fp, static_cast<double>(counts.matched_regions) / static_cast<double>(truth.regions)});
    report.track_curve.push_back({fp, static_cast<double>(tracks_hit) / static_cast<double>(report.tracks)});
  }
  report.rbdc = envelope_area(report.region_curve);
  report.tbdc = envelope_area(report.track_curve);
  return report;
}

double rbdc(const ScoredFrames& videos, const LocalizationOptions& options) {
  return localization(videos, options).rbdc;
}

double tbdc(const ScoredFrames& videos, const LocalizationOptions& options) {
  return localization(videos, options).tbdc;
}

}  // namespace ssmctb::metrics
