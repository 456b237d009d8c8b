// Random instance builders shared by unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles/oracles.hpp"
#include "ssmctb/metrics.hpp"
#include "ssmctb/rng.hpp"

namespace fixtures {

using ssmctb::Rng;
using ssmctb::Shape;
using ssmctb::Tensor;

inline Tensor random_tensor(const Shape& shape, Rng& rng, double sd = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (auto& v : t.mutable_data()) v = rng.normal(0.0, sd);
  return t;
}

inline std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

/// Scores on a coarse grid so that ties occur.
inline std::vector<double> quantized_scores(std::size_t n, Rng& rng, double step) {
  std::vector<double> s(n);
  for (auto& v : s) v = std::round(rng.uniform() / step) * step;
  return s;
}

/// Labels with at least one of each class.
inline std::vector<int> mixed_labels(std::size_t n, Rng& rng) {
  std::vector<int> l(n);
  do {
    for (auto& v : l) v = static_cast<int>(rng.below(2));
  } while (std::count(l.begin(), l.end(), 1) == 0 || std::count(l.begin(), l.end(), 0) == 0);
  return l;
}

/// Toy localization volume: up to `max_frames` frames of small extents, up to
/// three drifting rectangular tracks, noisy quantized scores, and spurious
/// high-scoring patches.
inline oracle::ToyVolume random_toy_volume(Rng& rng, std::size_t max_frames = 5) {
  for (;;) {
    oracle::ToyVolume v;
    v.frames = between(rng, 1, max_frames);
    v.height = between(rng, 5, 8);
    v.width = between(rng, 5, 8);
    const std::size_t plane = v.height * v.width;
    v.track.assign(v.frames * plane, 0);
    const std::size_t tracks = between(rng, 1, 3);
    for (std::size_t id = 1; id <= tracks; ++id) {
      const std::size_t start = between(rng, 0, v.frames - 1);
      const std::size_t stop = between(rng, start, v.frames - 1);
      const std::size_t rh = between(rng, 1, 3), rw = between(rng, 1, 3);
      long r = static_cast<long>(rng.below(v.height - rh + 1)), c = static_cast<long>(rng.below(v.width - rw + 1));
      for (std::size_t f = start; f <= stop; ++f) {
        for (std::size_t i = 0; i < rh; ++i) {
          for (std::size_t j = 0; j < rw; ++j) {
            auto& cell = v.track[f * plane + (static_cast<std::size_t>(r) + i) * v.width + static_cast<std::size_t>(c) + j];
            if (cell == 0) cell = static_cast<int>(id);
          }
        }
        r = std::clamp<long>(r + static_cast<long>(rng.below(3)) - 1, 0, static_cast<long>(v.height - rh));
        c = std::clamp<long>(c + static_cast<long>(rng.below(3)) - 1, 0, static_cast<long>(v.width - rw));
      }
    }
    // Reject volumes where overlap erased a track from an interior frame.
    bool consecutive = true;
    for (int id = 1; id <= static_cast<int>(tracks); ++id) {
      long first = -1, last = -1, count = 0;
      for (std::size_t f = 0; f < v.frames; ++f) {
        const bool present = std::find(v.track.begin() + static_cast<long>(f * plane),
                                        v.track.begin() + static_cast<long>((f + 1) * plane), id) !=
                             v.track.begin() + static_cast<long>((f + 1) * plane);
        if (!present) continue;
        if (first < 0) first = static_cast<long>(f);
        last = static_cast<long>(f);
        ++count;
      }
      if (count > 0 && last - first + 1 != count) consecutive = false;
    }
    if (!consecutive || std::count_if(v.track.begin(), v.track.end(), [](int t) { return t != 0; }) == 0) continue;

    v.scores.resize(v.frames * plane);
    for (std::size_t p = 0; p < v.scores.size(); ++p) {
      double s = rng.uniform(0.0, 0.5);
      if (v.track[p] != 0 && rng.uniform() < 0.8) s += rng.uniform(0.2, 0.6);
      v.scores[p] = s;
    }
    const std::size_t spurious = rng.below(3);
    for (std::size_t k = 0; k < spurious; ++k) {
      const std::size_t f = rng.below(v.frames), r = rng.below(v.height - 1), c = rng.below(v.width - 1);
      for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) v.scores[f * plane + (r + i) * v.width + c + j] += 0.5;
      }
    }
    for (auto& s : v.scores) s = std::round(s * 20.0) / 20.0;
    return v;
  }
}

inline ssmctb::metrics::ScoredVideo to_scored(const oracle::ToyVolume& v, const std::string& name) {
  ssmctb::metrics::ScoredVideo out;
  out.name = name;
  const Shape shape{v.frames, v.height, v.width};
  const std::size_t plane = v.height * v.width;
  out.pixel_maps = Tensor(shape, v.scores);
  std::vector<double> tracks(v.track.begin(), v.track.end()), masks(v.track.size());
  for (std::size_t p = 0; p < masks.size(); ++p) masks[p] = v.track[p] != 0 ? 1.0 : 0.0;
  out.track_ids = Tensor(shape, tracks);
  out.masks = Tensor(shape, masks);
  for (std::size_t f = 0; f < v.frames; ++f) {
    double top = 0.0;
    int label = 0;
    for (std::size_t p = 0; p < plane; ++p) {
      top = std::max(top, v.scores[f * plane + p]);
      label = std::max(label, v.track[f * plane + p] != 0 ? 1 : 0);
    }
    out.frame_scores.push_back(top);
    out.frame_labels.push_back(label);
  }
  return out;
}

}  // namespace fixtures
