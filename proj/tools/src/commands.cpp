#include "ssmctb_cli/commands.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "ssmctb/error.hpp"
#include "ssmctb_cli/pipeline.hpp"

namespace ssmctb::cli {

using nlohmann::json;

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::once_flag once;
  static std::shared_ptr<spdlog::logger> log;
  std::call_once(once, [] {
    log = std::make_shared<spdlog::logger>("ssmctb", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    log->set_pattern("[%l] %v");
  });
  const char* env = std::getenv("SSMCTB_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    log->set_level(spdlog::level::err);
  } else if (level == "debug") {
    log->set_level(spdlog::level::debug);
  } else {
    log->set_level(spdlog::level::info);
  }
  return log;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw ValidationError("cannot write " + path.string());
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Flags shared by commands that read a RunConfig.
struct ConfigFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data;
  std::optional<std::string> out;
  std::optional<std::size_t> epochs;
  std::optional<std::string> position;
  std::optional<double> lambda;

  void attach(CLI::App& cmd, bool config_required) {
    auto* opt = cmd.add_option("--config", config, "run configuration JSON");
    if (config_required) opt->required();
    cmd.add_option("--seed", seed, "override the run seed");
    cmd.add_option("--data", data, "dataset directory (overrides data.dir)");
    cmd.add_option("--out", out, "output directory (overrides output_dir)");
    cmd.add_option("--epochs", epochs, "override train.epochs");
    cmd.add_option("--position", position, "override model.ssmctb_position (none or 1..4)");
    cmd.add_option("--lambda", lambda, "override the SSMCTB loss weight");
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? parse_run_config(json::object()) : load_run_config(config);
    if (seed) c.set_seed(*seed);
    if (data) c.data.dir = *data;
    if (out) c.output_dir = *out;
    if (epochs) c.train.epochs = *epochs;
    if (position) c.model.ssmctb_position = parse_position(*position);
    if (lambda) c.set_lambda(*lambda);
    c.train.validate();
    return c;
  }
};

int cmd_gen_data(const std::string& kind, const ConfigFlags& flags, std::ostream& out) {
  RunConfig c = flags.resolve();
  if (!kind.empty()) c.data.kind = data::parse_kind(kind);
  c.data.dir.clear();
  const auto ds = dataset_for(c);
  data::save_dataset(ds, c.output_dir);
  std::size_t test_frames = 0, positives = 0;
  for (const auto& clip : ds.test) {
    test_frames += clip.length();
    positives += static_cast<std::size_t>(std::count(clip.labels.begin(), clip.labels.end(), 1));
  }
  logger()->info("wrote {} dataset to {}", data::to_string(ds.kind), c.output_dir);
  out << json{{"dir", c.output_dir},
              {"kind", data::to_string(ds.kind)},
              {"train_clips", ds.train.size()},
              {"test_clips", ds.test.size()},
              {"test_frames", test_frames},
              {"test_positives", positives}}
             .dump(2)
      << '\n';
  return kSuccess;
}

int cmd_train(const ConfigFlags& flags, std::ostream& out) {
  const RunConfig c = flags.resolve();
  const auto ds = dataset_for(c);
  const std::filesystem::path dir = c.output_dir;
  std::filesystem::create_directories(dir);
  std::ofstream log_file(dir / "loss_log.jsonl", std::ios::binary | std::ios::trunc);
  auto log = logger();
  const auto result = train_run(c, ds, [&](const host::EpochLog& e) {
    const json rec{{"epoch", e.epoch}, {"host_loss", e.host_loss}, {"block_loss", e.block_loss},
                   {"total_loss", e.total_loss}};
    log_file << rec.dump() << '\n';
    log->info("epoch {} host {:.6g} block {:.6g} total {:.6g}", e.epoch, e.host_loss, e.block_loss, e.total_loss);
  });
  result.params.save(dir / "checkpoint");
  write_json_file(dir / "checkpoint" / "run_config.json", to_json(c));
  const auto& last = result.log.back();
  out << json{{"checkpoint", (dir / "checkpoint").string()},
              {"epochs", result.log.size()},
              {"final_host_loss", last.host_loss},
              {"final_block_loss", last.block_loss},
              {"final_total_loss", last.total_loss}}
             .dump(2)
      << '\n';
  return kSuccess;
}

int cmd_score(const std::string& checkpoint, std::optional<std::string> data_dir, const std::string& out_dir,
              std::ostream& out) {
  const std::filesystem::path ck = checkpoint;
  RunConfig c = load_run_config(ck / "run_config.json");
  if (data_dir) c.data.dir = *data_dir;
  const auto params = ParameterStore::load(ck);
  const auto ds = dataset_for(c);
  const auto scores = score_run(params, c, ds);
  metrics::save_scores(scores, out_dir);
  logger()->info("scored {} test clips into {}", scores.videos.size(), out_dir);
  out << json{{"scores", out_dir}, {"videos", scores.videos.size()}}.dump(2) << '\n';
  return kSuccess;
}

int cmd_eval(const std::string& scores_dir, const std::optional<std::string>& out_file,
             const metrics::LocalizationOptions& options, std::ostream& out) {
  const auto report = evaluate(metrics::load_scores(scores_dir), options);
  if (out_file) write_json_file(*out_file, report);
  out << report.dump(2) << '\n';
  return kSuccess;
}

int cmd_grad_check(const ConfigFlags& flags, std::ostream& out) {
  const RunConfig c = flags.resolve();
  bool passed = false;
  const auto report = run_grad_check(c, passed);
  out << report.dump(2) << '\n';
  if (!passed) {
    logger()->error("gradient check failed: max relative error {} at {}[{}]",
                    report["max_relative_error"].get<double>(), report["worst_path"].get<std::string>(),
                    report["worst_index"].get<std::size_t>());
    return kNumerical;
  }
  return kSuccess;
}

struct AblationGrid {
  std::vector<std::size_t> dilations{3};
  std::vector<std::size_t> sub_kernels{1};
  std::vector<std::string> positions{"3"};
  std::vector<double> lambdas;
  std::size_t jobs = 1;
  std::string csv;
};

struct AblationCell {
  std::size_t dilation, sub_kernel, position;
  double lambda;
};

int cmd_ablate(const ConfigFlags& flags, AblationGrid grid, std::ostream& out) {
  const RunConfig base = flags.resolve();
  if (grid.lambdas.empty()) grid.lambdas = {base.train.lambda};
  if (grid.jobs == 0) throw ValidationError("--jobs must be positive");
  std::vector<AblationCell> cells;
  for (auto d : grid.dilations) {
    if (d > 4) throw ValidationError("ablation dilation must lie in 0..4");
    for (auto k : grid.sub_kernels) {
      if (k < 1 || k > 3) throw ValidationError("ablation k' must lie in 1..3");
      for (const auto& p : grid.positions) {
        const auto pos = parse_position(p);
        if (pos == host::kNoBlock) throw ValidationError("ablation positions must lie in 1..4");
        for (double l : grid.lambdas) {
          if (!(l >= 0.0)) throw ValidationError("ablation lambda must be nonnegative");
          cells.push_back({d, k, pos, l});
        }
      }
    }
  }

  const auto ds = dataset_for(base);
  const auto keys = metric_keys(ds.kind);
  std::vector<std::string> rows(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto log = logger();
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        const auto& cell = cells[i];
        RunConfig c = base;
        c.model.block.conv.dilation = cell.dilation;
        c.model.block.conv.sub_kernel = cell.sub_kernel;
        c.model.ssmctb_position = cell.position;
        c.set_lambda(cell.lambda);
        const auto trained = train_run(c, ds);
        const auto report = evaluate(score_run(trained.params, c, ds));
        std::ostringstream row;
        row << cell.dilation << ',' << cell.sub_kernel << ',' << cell.position << ',' << cell.lambda;
        for (const auto& key : keys) row << ',' << (report.contains(key) ? format_number(report[key]) : "");
        row << ',' << format_number(trained.log.back().host_loss) << ',' << format_number(trained.log.back().block_loss);
        rows[i] = row.str();
        log->info("ablation cell {}/{} done (d={}, k'={}, position={}, lambda={})", i + 1, cells.size(),
                  cell.dilation, cell.sub_kernel, cell.position, cell.lambda);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t j = 1; j < std::min(grid.jobs, cells.size()); ++j) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::ostringstream csv;
  csv << "d,k_prime,position,lambda";
  for (const auto& key : keys) csv << ',' << key;
  csv << ",final_host_loss,final_block_loss\n";
  for (const auto& row : rows) csv << row << '\n';
  if (!grid.csv.empty()) {
    const std::filesystem::path path = grid.csv;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    file << csv.str();
    if (!file) throw ValidationError("cannot write " + grid.csv);
  }
  out << csv.str();
  return kSuccess;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SSMCTB experiment harness", "ssmctb"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic anomaly dataset");
  std::string kind;
  ConfigFlags gen_flags;
  gen->add_option("--kind", kind, "images or videos");
  gen_flags.attach(*gen, false);
  gen->get_option("--out")->required();

  auto* train = app.add_subcommand("train", "train the autoencoder; writes checkpoint/ and loss_log.jsonl");
  ConfigFlags train_flags;
  train_flags.attach(*train, true);

  auto* score = app.add_subcommand("score", "score the test split with a checkpoint");
  std::string checkpoint, score_out;
  std::optional<std::string> score_data;
  score->add_option("--checkpoint", checkpoint, "checkpoint directory written by train")->required();
  score->add_option("--data", score_data, "dataset directory (defaults to the one used for training)");
  score->add_option("--out", score_out, "score manifest directory")->required();

  auto* eval = app.add_subcommand("eval", "compute metrics from a score manifest");
  std::string scores_dir;
  std::optional<std::string> eval_out;
  metrics::LocalizationOptions loc;
  eval->add_option("--scores", scores_dir, "score manifest directory")->required();
  eval->add_option("--out", eval_out, "also write the report to this file");
  eval->add_option("--alpha", loc.alpha, "RBDC IOU threshold");
  eval->add_option("--beta", loc.beta, "TBDC track overlap threshold");
  eval->add_option("--max-thresholds", loc.max_thresholds, "cap on RBDC/TBDC score thresholds (0 = all)");

  auto* check = app.add_subcommand("grad-check", "finite-difference check of SSMCTB gradients");
  ConfigFlags check_flags;
  check_flags.attach(*check, false);

  auto* ablate = app.add_subcommand("ablate", "train and evaluate every cell of a hyperparameter grid");
  ConfigFlags ablate_flags;
  AblationGrid grid;
  ablate_flags.attach(*ablate, true);
  ablate->add_option("--d", grid.dilations, "dilation values")->delimiter(',');
  ablate->add_option("--k", grid.sub_kernels, "sub-kernel sizes k'")->delimiter(',');
  ablate->add_option("--positions", grid.positions, "decoder positions")->delimiter(',');
  ablate->add_option("--lambdas", grid.lambdas, "SSMCTB loss weights")->delimiter(',');
  ablate->add_option("--jobs", grid.jobs, "worker threads");
  ablate->add_option("--csv", grid.csv, "CSV output path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(kind, gen_flags, out);
    if (*train) return cmd_train(train_flags, out);
    if (*score) return cmd_score(checkpoint, score_data, score_out, out);
    if (*eval) return cmd_eval(scores_dir, eval_out, loc, out);
    if (*check) return cmd_grad_check(check_flags, out);
    if (*ablate) return cmd_ablate(ablate_flags, grid, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kUsage;
}

}  // namespace ssmctb::cli
