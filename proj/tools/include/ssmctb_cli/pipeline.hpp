#pragma once

#include <functional>
#include <nlohmann/json.hpp>

#include "ssmctb/localization.hpp"
#include "ssmctb/score_io.hpp"
#include "ssmctb_cli/run_config.hpp"

namespace ssmctb::cli {

/// Loads data.dir when set, otherwise generates from the config's specs.
data::AnomalyDataset dataset_for(const RunConfig& config);

/// The model config with extents and input channels taken from the dataset.
host::AutoencoderConfig model_for(const RunConfig& config, const data::AnomalyDataset& dataset);

std::size_t input_window(const RunConfig& config, const data::AnomalyDataset& dataset);

std::vector<Tensor> training_inputs(const RunConfig& config, const data::AnomalyDataset& dataset);

host::TrainResult train_run(const RunConfig& config, const data::AnomalyDataset& dataset,
                            const std::function<void(const host::EpochLog&)>& on_epoch = {});

/// Scores every test frame; pixel maps cover the current frame only.
metrics::ScoreManifest score_run(const ParameterStore& params, const RunConfig& config,
                                 const data::AnomalyDataset& dataset);

/// Image runs report auroc, ap, pixel_auroc, pixel_ap. Video runs report
/// micro_auc, macro_auc (with skipped videos), rbdc, tbdc.
nlohmann::json evaluate(const metrics::ScoreManifest& scores, const metrics::LocalizationOptions& options = {});

/// Metric keys reported for a dataset kind, in report order.
std::vector<std::string> metric_keys(data::DatasetKind kind);

/// SSMCTB block gradients against central differences on a random input.
nlohmann::json run_grad_check(const RunConfig& config, bool& passed);

}  // namespace ssmctb::cli
