#include "ssmctb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssmctb/error.hpp"

namespace ssmctb::metrics {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels, const char* op) {
  if (scores.size() != labels.size()) {
    throw ValidationError(std::string(op) + ": " + std::to_string(scores.size()) + " scores but " +
                          std::to_string(labels.size()) + " labels");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError(std::string(op) + ": labels must be 0 or 1");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw ValidationError(std::string(op) + ": NaN score");
  }
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "roc_auc");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw ValidationError("roc_auc needs at least one positive and one negative label");
  }
  // Mann-Whitney U with mid-ranks for tied blocks.
  const auto idx = order_by_score(scores, false);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] == 1) rank_sum += mid_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives), n = static_cast<double>(negatives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "average_precision");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) throw ValidationError("average_precision needs at least one positive label");
  const auto idx = order_by_score(scores, true);
  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::size_t group_tp = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      group_tp += static_cast<std::size_t>(labels[idx[j]]);
      ++j;
    }
    tp += group_tp;
    if (group_tp > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(j);
      ap += precision * static_cast<double>(group_tp) / static_cast<double>(positives);
    }
    i = j;
  }
  return ap;
}

void ScoredVideo::validate() const {
  if (frame_scores.size() != frame_labels.size()) {
    throw ValidationError("video " + name + ": score and label counts differ");
  }
  const std::size_t frames = frame_scores.size();
  auto check_volume = [&](const std::optional<Tensor>& t, const char* what) {
    if (!t) return;
    if (t->rank() != 3 || t->extent(0) != frames) {
      throw ValidationError("video " + name + ": " + what + " must be (frames, h, w), got " +
                            shape_string(t->shape()));
    }
  };
  check_volume(pixel_maps, "pixel maps");
  check_volume(masks, "masks");
  check_volume(track_ids, "track ids");
  if (pixel_maps && masks && pixel_maps->shape() != masks->shape()) {
    throw ValidationError("video " + name + ": pixel maps and masks differ in shape");
  }
  if (track_ids && masks && track_ids->shape() != masks->shape()) {
    throw ValidationError("video " + name + ": track ids and masks differ in shape");
  }
}

double micro_auc(const ScoredFrames& videos) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& v : videos) {
    v.validate();
    scores.insert(scores.end(), v.frame_scores.begin(), v.frame_scores.end());
    labels.insert(labels.end(), v.frame_labels.begin(), v.frame_labels.end());
  }
  return roc_auc(scores, labels);
}

MacroAuc macro_auc(const ScoredFrames& videos) {
  MacroAuc out;
  double total = 0.0;
  for (const auto& v : videos) {
    v.validate();
    const auto pos = std::count(v.frame_labels.begin(), v.frame_labels.end(), 1);
    if (pos == 0 || static_cast<std::size_t>(pos) == v.frame_labels.size()) {
      out.skipped.push_back(v.name);
      continue;
    }
    total += roc_auc(v.frame_scores, v.frame_labels);
    ++out.used;
  }
  if (out.used == 0) throw ValidationError("macro_auc: no video contains both classes");
  out.value = total / static_cast<double>(out.used);
  return out;
}

namespace {

void collect_pixels(const ScoredFrames& videos, std::vector<double>& scores, std::vector<int>& labels) {
  for (const auto& v : videos) {
    v.validate();
    if (!v.pixel_maps || !v.masks) continue;
    for (std::size_t i = 0; i < v.pixel_maps->size(); ++i) {
      scores.push_back((*v.pixel_maps)[i]);
      labels.push_back((*v.masks)[i] > 0.5 ? 1 : 0);
    }
  }
  if (scores.empty()) throw ValidationError("no pixel maps with masks to evaluate");
}

}  // namespace

double pixel_auroc(const ScoredFrames& videos) {
  std::vector<double> scores;
  std::vector<int> labels;
  collect_pixels(videos, scores, labels);
  return roc_auc(scores, labels);
}

double pixel_average_precision(const ScoredFrames& videos) {
  std::vector<double> scores;
  std::vector<int> labels;
  collect_pixels(videos, scores, labels);
  return average_precision(scores, labels);
}

}  // namespace ssmctb::metrics
