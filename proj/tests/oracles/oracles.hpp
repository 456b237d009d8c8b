// Reference implementations used only by tests. Each one is written from the
// definition, by a different route than the library, and favours clarity
// over speed.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "ssmctb/masked_conv.hpp"
#include "ssmctb/tensor.hpp"

namespace oracle {

using ssmctb::Shape;
using ssmctb::Tensor;

inline Tensor triple_loop_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.extent(0), p = a.extent(1), q = b.extent(1);
  Tensor out = Tensor::zeros({m, q});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k) acc += a.at({i, k}) * b.at({k, j});
      out.at({i, j}) = acc;
    }
  }
  return out;
}

// Odometer over a box of extents.
inline bool next_index(std::vector<std::size_t>& idx, const Shape& extents) {
  for (std::size_t a = idx.size(); a-- > 0;) {
    if (++idx[a] < extents[a]) return true;
    idx[a] = 0;
  }
  return false;
}

inline std::size_t flat(const std::vector<std::size_t>& idx, const Shape& extents) {
  std::size_t f = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) f = f * extents[a] + idx[a];
  return f;
}

/// Full k^dims kernel for filter j, zero everywhere except the corner
/// sub-kernels. Layout: (k, ..., k, c_in).
inline Tensor dense_masked_kernel(const ssmctb::masked::MaskedConvParams& params,
                                  const ssmctb::masked::MaskedConvConfig& cfg, std::size_t filter) {
  const std::size_t dims = cfg.dims, kp = cfg.sub_kernel, d = cfg.dilation, c = cfg.channels;
  const std::size_t k = 2 * kp + 2 * d + 1;
  Shape kshape(dims, k);
  kshape.push_back(c);
  Tensor kernel = Tensor::zeros(kshape);
  const Shape cell_extent(dims, kp);
  for (std::size_t i = 0; i < (std::size_t{1} << dims); ++i) {
    const Tensor& sub = params.weights.at(filter).at(i);
    std::vector<std::size_t> cell(dims, 0);
    do {
      std::vector<std::size_t> u(dims);
      for (std::size_t a = 0; a < dims; ++a) {
        const bool positive = (i >> (dims - 1 - a)) & 1U;
        u[a] = positive ? kp + 2 * d + 1 + cell[a] : cell[a];
      }
      for (std::size_t m = 0; m < c; ++m) {
        kernel[flat(u, Shape(dims, k)) * c + m] = sub[flat(cell, cell_extent) * c + m];
      }
    } while (next_index(cell, cell_extent));
  }
  return kernel;
}

/// Direct "same" convolution of x (spatial..., c) with the zero-masked dense
/// kernels, no bias, no activation.
inline Tensor dense_masked_conv(const Tensor& x, const ssmctb::masked::MaskedConvParams& params,
                                const ssmctb::masked::MaskedConvConfig& cfg) {
  const std::size_t dims = cfg.dims, c = cfg.channels;
  const std::size_t k = 2 * cfg.sub_kernel + 2 * cfg.dilation + 1;
  const long half = static_cast<long>(cfg.sub_kernel + cfg.dilation);
  Shape spatial(x.shape().begin(), x.shape().end() - 1);
  std::vector<Tensor> kernels;
  for (std::size_t j = 0; j < c; ++j) kernels.push_back(dense_masked_kernel(params, cfg, j));
  Tensor out = Tensor::zeros(x.shape());
  std::vector<std::size_t> p(dims, 0);
  do {
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      std::vector<std::size_t> u(dims, 0);
      do {
        bool inside = true;
        std::vector<std::size_t> q(dims);
        for (std::size_t a = 0; a < dims; ++a) {
          const long pos = static_cast<long>(p[a]) + static_cast<long>(u[a]) - half;
          inside = inside && pos >= 0 && pos < static_cast<long>(spatial[a]);
          q[a] = inside ? static_cast<std::size_t>(pos) : 0;
        }
        if (!inside) continue;
        for (std::size_t m = 0; m < c; ++m) {
          acc += kernels[j][flat(u, Shape(dims, k)) * c + m] * x[flat(q, spatial) * c + m];
        }
      } while (next_index(u, Shape(dims, k)));
      out[flat(p, spatial) * c + j] = acc;
    }
  } while (next_index(p, spatial));
  return out;
}

/// P(random positive outscores random negative), ties worth one half.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Mean over positives of precision among all items scoring at least as high.
inline double rank_precision_ap(const std::vector<double>& scores, const std::vector<int>& labels) {
  double total = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    ++positives;
    double above = 0.0, hits = 0.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (scores[j] >= scores[i]) {
        above += 1.0;
        hits += labels[j];
      }
    }
    total += hits / above;
  }
  return total / static_cast<double>(positives);
}

/// One toy video for the localization sweep: T frames of h x w.
struct ToyVolume {
  std::size_t frames = 0, height = 0, width = 0;
  std::vector<double> scores;  // T*h*w
  std::vector<int> track;      // T*h*w, 0 background
};


// Breadth-first 4-connected components of the pixels of one frame above tau.
inline std::vector<std::set<std::size_t>> bfs_components(const ToyVolume& v, std::size_t f, double tau) {
  const std::size_t h = v.height, w = v.width;
  std::vector<bool> seen(h * w, false);
  std::vector<std::set<std::size_t>> comps;
  for (std::size_t s = 0; s < h * w; ++s) {
    if (seen[s] || !(v.scores[f * h * w + s] > tau)) continue;
    std::set<std::size_t> comp;
    std::deque<std::size_t> queue{s};
    seen[s] = true;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      comp.insert(p);
      const long r = static_cast<long>(p / w), c = static_cast<long>(p % w);
      const long nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& n : nbr) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= static_cast<long>(h) || n[1] >= static_cast<long>(w)) continue;
        const auto q = static_cast<std::size_t>(n[0]) * w + static_cast<std::size_t>(n[1]);
        if (!seen[q] && v.scores[f * h * w + q] > tau) {
          seen[q] = true;
          queue.push_back(q);
        }
      }
    }
    comps.push_back(std::move(comp));
  }
  return comps;
}

inline double iou(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  std::size_t inter = 0;
  for (auto p : a) inter += b.count(p);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

struct SweepResult {
  double rbdc = 0.0, tbdc = 0.0;
};

// Integral over [0, 1] of r(f) = max{rate_i : fp_i <= f}, evaluated on the
// elementary intervals between sorted breakpoints.
inline double envelope_integral(const std::vector<std::pair<double, double>>& points) {
  std::vector<double> cuts{0.0, 1.0};
  for (const auto& [fp, _] : points) {
    if (fp > 0.0 && fp < 1.0) cuts.push_back(fp);
  }
  std::sort(cuts.begin(), cuts.end());
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double r = 0.0;
    for (const auto& [fp, rate] : points) {
      if (fp <= cuts[i]) r = std::max(r, rate);
    }
    area += r * (cuts[i + 1] - cuts[i]);
  }
  return area;
}

/// Brute-force RBDC/TBDC over every distinct score value of every volume.
inline SweepResult exhaustive_sweep(const std::vector<ToyVolume>& videos, double alpha, double beta) {
  std::set<double> taus;
  std::size_t total_frames = 0;
  // Ground-truth regions keyed by (video, track id, frame).
  std::map<std::tuple<std::size_t, int, std::size_t>, std::set<std::size_t>> regions;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const auto& vol = videos[v];
    total_frames += vol.frames;
    taus.insert(vol.scores.begin(), vol.scores.end());
    const std::size_t plane = vol.height * vol.width;
    for (std::size_t f = 0; f < vol.frames; ++f) {
      for (std::size_t p = 0; p < plane; ++p) {
        if (int id = vol.track[f * plane + p]) regions[{v, id, f}].insert(p);
      }
    }
  }
  std::map<std::pair<std::size_t, int>, std::size_t> track_len;
  for (const auto& [key, _] : regions) track_len[{std::get<0>(key), std::get<1>(key)}] += 1;

  std::vector<std::pair<double, double>> rcurve, tcurve;
  for (double tau : taus) {
    std::size_t fp = 0, hit_regions = 0;
    std::map<std::pair<std::size_t, int>, std::size_t> track_hits;
    for (std::size_t v = 0; v < videos.size(); ++v) {
      for (std::size_t f = 0; f < videos[v].frames; ++f) {
        const auto dets = bfs_components(videos[v], f, tau);
        for (const auto& det : dets) {
          bool matches = false;
          for (const auto& [key, gt] : regions) {
            if (std::get<0>(key) == v && std::get<2>(key) == f && iou(det, gt) > alpha) matches = true;
          }
          if (!matches) ++fp;
        }
        for (const auto& [key, gt] : regions) {
          if (std::get<0>(key) != v || std::get<2>(key) != f) continue;
          bool found = false;
          for (const auto& det : dets) found = found || iou(det, gt) > alpha;
          if (found) {
            ++hit_regions;
            track_hits[{v, std::get<1>(key)}] += 1;
          }
        }
      }
    }
    std::size_t hit_tracks = 0;
    for (const auto& [track, len] : track_len) {
      if (static_cast<double>(track_hits[track]) / static_cast<double>(len) > beta) ++hit_tracks;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(total_frames);
    rcurve.emplace_back(fpr, static_cast<double>(hit_regions) / static_cast<double>(regions.size()));
    tcurve.emplace_back(fpr, static_cast<double>(hit_tracks) / static_cast<double>(track_len.size()));
  }
  return {envelope_integral(rcurve), envelope_integral(tcurve)};
}

}  // namespace oracle
