#include "ssmctb_cli/pipeline.hpp"

#include "ssmctb/error.hpp"
#include "ssmctb/grad_check.hpp"
#include "ssmctb/rng.hpp"

namespace ssmctb::cli {

using nlohmann::json;

data::AnomalyDataset dataset_for(const RunConfig& config) {
  if (!config.data.dir.empty()) {
    auto ds = data::load_dataset(config.data.dir);
    if (ds.kind != config.data.kind) {
      throw ValidationError("dataset in " + config.data.dir + " holds " + data::to_string(ds.kind) + ", config expects " +
                            data::to_string(config.data.kind));
    }
    return ds;
  }
  return config.data.kind == data::DatasetKind::images ? data::generate_images(config.data.images)
                                                       : data::generate_videos(config.data.videos);
}

std::size_t input_window(const RunConfig& config, const data::AnomalyDataset& dataset) {
  return dataset.kind == data::DatasetKind::images ? 1 : config.data.window;
}

host::AutoencoderConfig model_for(const RunConfig& config, const data::AnomalyDataset& dataset) {
  if (dataset.test.empty() || dataset.train.empty()) throw ValidationError("dataset needs train and test clips");
  const auto& clip = dataset.train.front();
  const std::size_t window = input_window(config, dataset);
  host::AutoencoderConfig m = config.model;
  if (m.dims == 2) {
    m.extents = {clip.height(), clip.width()};
    m.in_channels = window;
  } else {
    if (dataset.kind == data::DatasetKind::images) throw ValidationError("3D models need a video dataset");
    m.extents = {window, clip.height(), clip.width()};
    m.in_channels = 1;
  }
  m.validate();
  return m;
}

std::vector<Tensor> training_inputs(const RunConfig& config, const data::AnomalyDataset& dataset) {
  const std::size_t window = input_window(config, dataset);
  std::vector<Tensor> out;
  for (const auto& clip : dataset.train) {
    for (std::size_t t = 0; t < clip.length(); t += config.data.train_stride) {
      out.push_back(data::frame_input(clip, t, window, config.model.dims));
    }
  }
  return out;
}

host::TrainResult train_run(const RunConfig& config, const data::AnomalyDataset& dataset,
                            const std::function<void(const host::EpochLog&)>& on_epoch) {
  return host::train(training_inputs(config, dataset), model_for(config, dataset), config.train, on_epoch);
}

metrics::ScoreManifest score_run(const ParameterStore& params, const RunConfig& config,
                                 const data::AnomalyDataset& dataset) {
  const auto model = model_for(config, dataset);
  const std::size_t window = input_window(config, dataset);
  metrics::ScoreManifest out;
  out.kind = dataset.kind;
  for (const auto& clip : dataset.test) {
    const std::size_t plane = clip.height() * clip.width();
    metrics::ScoredVideo v;
    v.name = clip.name;
    v.frame_labels = clip.labels;
    std::vector<double> maps;
    maps.reserve(clip.length() * plane);
    for (std::size_t t = 0; t < clip.length(); ++t) {
      const auto s = host::score(params, model, data::frame_input(clip, t, window, model.dims));
      v.frame_scores.push_back(s.frame_score);
      // 3D maps are (window, h, w); the last slice is frame t.
      const auto map = s.pixel_map.data();
      maps.insert(maps.end(), map.end() - static_cast<std::ptrdiff_t>(plane), map.end());
    }
    v.pixel_maps = Tensor({clip.length(), clip.height(), clip.width()}, std::move(maps));
    v.masks = clip.masks;
    v.track_ids = clip.track_ids;
    out.videos.push_back(std::move(v));
  }
  return out;
}

std::vector<std::string> metric_keys(data::DatasetKind kind) {
  if (kind == data::DatasetKind::images) return {"auroc", "ap", "pixel_auroc", "pixel_ap"};
  return {"micro_auc", "macro_auc", "rbdc", "tbdc"};
}

json evaluate(const metrics::ScoreManifest& scores, const metrics::LocalizationOptions& options) {
  json report{{"kind", data::to_string(scores.kind)}};
  const auto& videos = scores.videos;
  if (scores.kind == data::DatasetKind::images) {
    std::vector<double> s;
    std::vector<int> l;
    for (const auto& v : videos) {
      s.insert(s.end(), v.frame_scores.begin(), v.frame_scores.end());
      l.insert(l.end(), v.frame_labels.begin(), v.frame_labels.end());
    }
    report["auroc"] = metrics::roc_auc(s, l);
    report["ap"] = metrics::average_precision(s, l);
    bool spatial = !videos.empty();
    for (const auto& v : videos) spatial = spatial && v.pixel_maps && v.masks;
    if (spatial) {
      report["pixel_auroc"] = metrics::pixel_auroc(videos);
      report["pixel_ap"] = metrics::pixel_average_precision(videos);
    }
    return report;
  }
  report["micro_auc"] = metrics::micro_auc(videos);
  const auto macro = metrics::macro_auc(videos);
  report["macro_auc"] = macro.value;
  report["macro_skipped"] = macro.skipped;
  bool spatial = !videos.empty();
  for (const auto& v : videos) spatial = spatial && v.pixel_maps && (v.masks || v.track_ids);
  if (spatial) {
    const auto loc = metrics::localization(videos, options);
    report["rbdc"] = loc.rbdc;
    report["tbdc"] = loc.tbdc;
  }
  return report;
}

json run_grad_check(const RunConfig& config, bool& passed) {
  const auto& g = config.grad_check;
  block::SsmctbConfig cfg = config.model.block;
  cfg.conv.dims = g.extents.size();
  cfg.conv.channels = g.channels;
  if (cfg.transformer.pooled.size() != cfg.conv.dims) cfg.transformer.pooled = Shape(cfg.conv.dims, 1);
  cfg.validate();

  Rng rng(derive_seed(config.seed, "grad_check"));
  ParameterStore store;
  block::SsmctbParams::random(cfg, rng).save(store, "");
  Shape shape = g.extents;
  shape.push_back(g.channels);
  Tensor x = Tensor::zeros(shape);
  for (auto& v : x.mutable_data()) v = rng.normal();

  const auto report = grad_check(
      [&](ad::Tape& tape, const ParameterStore& params) {
        return block::ssmctb_forward(tape, tape.constant(x), params, "", cfg).loss;
      },
      store, {g.step, g.max_probes_per_parameter});
  passed = report.passed(g.tolerance);
  json out{{"passed", passed},
           {"max_relative_error", report.max_relative_error},
           {"tolerance", g.tolerance},
           {"step", g.step},
           {"probes", report.probes},
           {"worst_path", report.worst_path},
           {"worst_index", report.worst_index},
           {"finite", report.finite}};
  if (!report.failure.empty()) out["failure"] = report.failure;
  return out;
}

}  // namespace ssmctb::cli
