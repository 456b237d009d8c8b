#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ssmctb/dataset.hpp"
#include "ssmctb/error.hpp"
#include "ssmctb/score_io.hpp"
#include "ssmctb_cli/commands.hpp"
#include "ssmctb_cli/run_config.hpp"
#include "support/fixtures.hpp"
#include "support/tiny_config.hpp"

using namespace ssmctb;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

data::ImageGenSpec small_images() {
  data::ImageGenSpec s;
  s.n_train = 6;
  s.n_test = 10;
  s.height = 16;
  s.width = 16;
  return s;
}

data::VideoGenSpec small_videos() {
  data::VideoGenSpec s;
  s.n_train_videos = 1;
  s.n_test_videos = 3;
  s.frames = 16;
  s.height = 16;
  s.width = 16;
  return s;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("image generation") {
    const auto ds = data::generate_images(small_images());
    REQUIRE(ds.train.size() == 1);
    REQUIRE(ds.test.size() == 1);
    CHECK(ds.train[0].frames.shape() == Shape{6, 16, 16});
    const auto& test = ds.test[0];
    CHECK(std::count(test.labels.begin(), test.labels.end(), 1) == 5);
    CHECK(std::count(ds.train[0].labels.begin(), ds.train[0].labels.end(), 1) == 0);
    for (double v : test.frames.data()) CHECK((v >= 0.0 && v <= 1.0));
    // Masks are set exactly on anomalous images.
    const std::size_t plane = 16 * 16;
    for (std::size_t i = 0; i < test.length(); ++i) {
      double m = 0.0;
      for (std::size_t p = 0; p < plane; ++p) m += test.masks[i * plane + p];
      CHECK((m > 0.0) == (test.labels[i] == 1));
    }
    CHECK(data::generate_images(small_images()) == ds);
    auto other = small_images();
    other.seed = 8;
    CHECK_FALSE(data::generate_images(other) == ds);
  }

  TEST_CASE("video generation") {
    const auto ds = data::generate_videos(small_videos());
    REQUIRE(ds.test.size() == 3);
    for (const auto& clip : ds.test) {
      CHECK(clip.frames.shape() == Shape{16, 16, 16});
      REQUIRE(clip.track_ids.has_value());
      const auto positives = std::count(clip.labels.begin(), clip.labels.end(), 1);
      CHECK(positives == 4);  // T/4 event frames
      // The event is a single contiguous run.
      const auto first = std::find(clip.labels.begin(), clip.labels.end(), 1) - clip.labels.begin();
      for (long f = first; f < first + positives; ++f) CHECK(clip.labels[static_cast<std::size_t>(f)] == 1);
    }
    CHECK(data::generate_videos(small_videos()) == ds);
  }

  TEST_CASE("blob rendering wraps around") {
    const auto b = data::render_blob(8, 8, 0.0, 0.0, 1.0, 1.0);
    CHECK(b.at({0, 0}) == doctest::Approx(1.0));
    CHECK(b.at({7, 0}) == doctest::Approx(b.at({1, 0})));
    CHECK(b.at({0, 7}) == doctest::Approx(b.at({0, 1})));
  }

  TEST_CASE("frame windows") {
    const auto ds = data::generate_videos(small_videos());
    const auto& clip = ds.test[0];
    const auto x = data::frame_input(clip, 0, 3, 2);
    CHECK(x.shape() == Shape{16, 16, 3});
    CHECK(x.at({2, 3, 0}) == clip.frames.at({0, 2, 3}));
    const auto y = data::frame_input(clip, 5, 3, 2);
    CHECK(y.at({2, 3, 0}) == clip.frames.at({3, 2, 3}));
    CHECK(y.at({2, 3, 2}) == clip.frames.at({5, 2, 3}));
    const auto z = data::frame_input(clip, 5, 3, 3);
    CHECK(z.shape() == Shape{3, 16, 16, 1});
    CHECK(z.at({1, 2, 3, 0}) == clip.frames.at({4, 2, 3}));
  }

  TEST_CASE("save and load") {
    const auto dir = fixtures::scratch_dir("dataset_roundtrip");
    const auto ds = data::generate_videos(small_videos());
    data::save_dataset(ds, dir);
    CHECK(data::load_dataset(dir) == ds);
    std::filesystem::remove(dir / "manifest.json");
    CHECK_THROWS_AS(data::load_dataset(dir), ValidationError);
  }

  TEST_CASE("spec validation") {
    auto s = small_images();
    s.anomaly_fraction = 1.5;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    CHECK_THROWS_AS(data::parse_kind("audio"), ValidationError);
    CHECK(data::parse_anomaly("new_blob") == data::VideoAnomaly::new_blob);
  }
}

TEST_SUITE("score_io") {
  TEST_CASE("round trip") {
    Rng rng(71);
    metrics::ScoreManifest m;
    m.kind = data::DatasetKind::videos;
    m.videos.push_back(fixtures::to_scored(fixtures::random_toy_volume(rng), "a"));
    auto b = fixtures::to_scored(fixtures::random_toy_volume(rng), "b");
    b.track_ids = std::nullopt;
    m.videos.push_back(b);
    const auto dir = fixtures::scratch_dir("scores_roundtrip");
    metrics::save_scores(m, dir);
    const auto back = metrics::load_scores(dir);
    CHECK(back.kind == m.kind);
    REQUIRE(back.videos.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(back.videos[i].name == m.videos[i].name);
      CHECK(back.videos[i].frame_scores == m.videos[i].frame_scores);
      CHECK(back.videos[i].frame_labels == m.videos[i].frame_labels);
      CHECK(back.videos[i].pixel_maps == m.videos[i].pixel_maps);
      CHECK(back.videos[i].track_ids == m.videos[i].track_ids);
    }
  }
}

TEST_SUITE("run_config") {
  TEST_CASE("defaults and overrides") {
    const auto c = cli::parse_run_config(json::object());
    CHECK(c.seed == 7);
    CHECK(c.model.ssmctb_position == 3);
    CHECK(c.train.lambda == 0.1);
    const auto t = cli::parse_run_config(fixtures::tiny_image_config("x"));
    CHECK(t.data.images.n_train == 8);
    CHECK(t.model.block.transformer.token_dim == 8);
    CHECK(cli::parse_run_config(cli::to_json(t)).data.images == t.data.images);
  }

  TEST_CASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_AS(cli::parse_run_config(json{{"bogus", 1}}), ValidationError);
    CHECK_THROWS_AS(cli::parse_run_config(json{{"train", {{"epoch", 1}}}}), ValidationError);
    CHECK_THROWS_AS(cli::parse_run_config(json{{"model", {{"ssmctb_position", 7}}}}), ValidationError);
    CHECK(cli::parse_position("none") == host::kNoBlock);
    CHECK_THROWS_AS(cli::parse_position("0"), ValidationError);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 1") {
    CHECK(invoke({}).code == cli::kUsage);
    CHECK(invoke({"frobnicate"}).code == cli::kUsage);
    CHECK(invoke({"train"}).code == cli::kUsage);
    CHECK(invoke({"--help"}).code == cli::kSuccess);
  }

  TEST_CASE("validation errors exit 2") {
    const auto dir = fixtures::scratch_dir("cli_validation");
    const auto cfg = fixtures::write_config(json{{"nope", 1}}, dir / "bad.json");
    const auto r = invoke({"train", "--config", cfg.string()});
    CHECK(r.code == cli::kValidation);
    CHECK(r.err.find("nope") != std::string::npos);
    CHECK(invoke({"eval", "--scores", (dir / "missing").string()}).code == cli::kValidation);
    CHECK(invoke({"ablate", "--config", cfg.string(), "--d", "9"}).code != cli::kSuccess);
  }

  TEST_CASE("gen-data, train, score and eval on images") {
    const auto dir = fixtures::scratch_dir("cli_images");
    const auto cfg = fixtures::write_config(fixtures::tiny_image_config((dir / "run").string()), dir / "cfg.json");
    auto gen = invoke({"gen-data", "--kind", "images", "--config", cfg.string(), "--out", (dir / "data").string()});
    REQUIRE(gen.code == 0);
    CHECK(json::parse(gen.out).at("test_frames") == 8);

    auto train = invoke({"train", "--config", cfg.string(), "--data", (dir / "data").string()});
    REQUIRE(train.code == 0);
    CHECK(std::filesystem::exists(dir / "run" / "checkpoint" / "run_config.json"));
    CHECK(std::filesystem::exists(dir / "run" / "loss_log.jsonl"));

    auto score = invoke({"score", "--checkpoint", (dir / "run" / "checkpoint").string(), "--out",
                      (dir / "scores").string()});
    REQUIRE(score.code == 0);
    auto eval = invoke({"eval", "--scores", (dir / "scores").string(), "--out", (dir / "report.json").string()});
    REQUIRE(eval.code == 0);
    const auto report = json::parse(eval.out);
    for (const char* key : {"auroc", "ap", "pixel_auroc", "pixel_ap"}) {
      CHECK(report.contains(key));
      CHECK(report.at(key).get<double>() >= 0.0);
      CHECK(report.at(key).get<double>() <= 1.0);
    }
    CHECK(json::parse(slurp(dir / "report.json")) == report);

    // Re-running training reproduces the checkpoint byte for byte.
    const auto first = slurp(dir / "run" / "loss_log.jsonl");
    REQUIRE(invoke({"train", "--config", cfg.string(), "--data", (dir / "data").string()}).code == 0);
    CHECK(slurp(dir / "run" / "loss_log.jsonl") == first);
  }

  TEST_CASE("video evaluation reports localization metrics") {
    const auto dir = fixtures::scratch_dir("cli_videos");
    const auto cfg = fixtures::write_config(fixtures::tiny_video_config((dir / "run").string()), dir / "cfg.json");
    REQUIRE(invoke({"train", "--config", cfg.string()}).code == 0);
    REQUIRE(invoke({"score", "--checkpoint", (dir / "run" / "checkpoint").string(), "--out", (dir / "scores").string()})
                .code == 0);
    const auto eval = invoke({"eval", "--scores", (dir / "scores").string(), "--max-thresholds", "32"});
    REQUIRE(eval.code == 0);
    const auto report = json::parse(eval.out);
    for (const char* key : {"micro_auc", "macro_auc", "rbdc", "tbdc"}) CHECK(report.contains(key));
  }

  TEST_CASE("grad-check on a small block passes") {
    const auto dir = fixtures::scratch_dir("cli_gradcheck");
    json j{{"ssmctb", {{"token_dim", 4}, {"heads", 2}, {"blocks", 1}, {"dilation", 1}}},
           {"grad_check", {{"extents", {6, 6}}, {"max_probes_per_parameter", 4}}}};
    const auto cfg = fixtures::write_config(j, dir / "cfg.json");
    const auto r = invoke({"grad-check", "--config", cfg.string()});
    CHECK(r.code == cli::kSuccess);
    CHECK(json::parse(r.out).at("passed") == true);
  }
}
