#include <doctest.h>

#include "oracles/oracles.hpp"
#include "ssmctb/error.hpp"
#include "ssmctb/localization.hpp"
#include "ssmctb/metrics.hpp"
#include "support/fixtures.hpp"

using namespace ssmctb;
using namespace ssmctb::metrics;

namespace {

ScoredVideo frames_only(const std::string& name, std::vector<double> s, std::vector<int> l) {
  ScoredVideo v;
  v.name = name;
  v.frame_scores = std::move(s);
  v.frame_labels = std::move(l);
  return v;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("roc auc on known cases") {
    CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
    CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{0, 0, 1, 1}) == 0.0);
    CHECK(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) == 0.5);
    CHECK(roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  }

  TEST_CASE("roc auc and AP agree with brute force") {
    Rng rng(51);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = fixtures::between(rng, 2, 40);
      const auto s = fixtures::quantized_scores(n, rng, 0.1);
      const auto l = fixtures::mixed_labels(n, rng);
      CHECK(std::abs(roc_auc(s, l) - oracle::pairwise_auc(s, l)) < 1e-12);
      CHECK(std::abs(average_precision(s, l) - oracle::rank_precision_ap(s, l)) < 1e-12);
    }
  }

  TEST_CASE("validation") {
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), ValidationError);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), ValidationError);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{2, 0}), ValidationError);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{std::nan(""), 0.2}, std::vector<int>{1, 0}), ValidationError);
    CHECK_THROWS_AS(average_precision(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}), ValidationError);
  }

  TEST_CASE("micro and macro auc") {
    const ScoredFrames videos{frames_only("a", {0.1, 0.9}, {0, 1}), frames_only("b", {0.3, 0.2}, {0, 1}),
                              frames_only("c", {0.5, 0.6}, {0, 0})};
    const auto macro = macro_auc(videos);
    CHECK(macro.value == 0.5);
    CHECK(macro.used == 2);
    CHECK(macro.skipped == std::vector<std::string>{"c"});
    const std::vector<double> s{0.1, 0.9, 0.3, 0.2, 0.5, 0.6};
    const std::vector<int> l{0, 1, 0, 1, 0, 0};
    CHECK(micro_auc(videos) == oracle::pairwise_auc(s, l));
    CHECK_THROWS_AS(macro_auc({frames_only("c", {0.5, 0.6}, {0, 0})}), ValidationError);
  }

  TEST_CASE("pixel metrics use masks") {
    ScoredVideo v = frames_only("v", {0.0}, {1});
    v.pixel_maps = Tensor({1, 2, 2}, {0.9, 0.1, 0.2, 0.8});
    v.masks = Tensor({1, 2, 2}, {1, 0, 0, 1});
    CHECK(pixel_auroc({v}) == 1.0);
    CHECK(pixel_average_precision({v}) == 1.0);
    v.masks = std::nullopt;
    CHECK_THROWS_AS(pixel_auroc({v}), ValidationError);
  }
}

TEST_SUITE("localization") {
  TEST_CASE("component labelling is 4-connected") {
    // Diagonal neighbours are separate regions.
    const std::vector<std::uint8_t> mask{1, 0, 1,  //
                                         0, 1, 0,  //
                                         1, 1, 0};
    const auto lab = label_components(mask, 3, 3);
    CHECK(lab.count == 3);
    CHECK(lab.labels[4] == lab.labels[7]);
    CHECK(lab.labels[6] == lab.labels[7]);
    CHECK(lab.labels[0] != lab.labels[2]);
    CHECK(lab.labels[1] == 0);
  }

  TEST_CASE("envelope area") {
    CHECK(envelope_area({{0.0, 1.0}}) == 1.0);
    CHECK(envelope_area({{0.5, 1.0}}) == 0.5);
    CHECK(envelope_area({{0.25, 0.4}, {0.5, 1.0}, {2.0, 1.0}}) == doctest::Approx(0.25 * 0.4 + 0.5));
    CHECK(envelope_area({{1.5, 1.0}}) == 0.0);
    CHECK(envelope_area({}) == 0.0);
  }

  TEST_CASE("perfect localization scores one") {
    oracle::ToyVolume v{2, 4, 4, std::vector<double>(32, 0.0), std::vector<int>(32, 0)};
    for (std::size_t f = 0; f < 2; ++f) {
      v.track[f * 16 + 5] = 1;
      v.scores[f * 16 + 5] = 1.0;
    }
    LocalizationOptions opts;
    const auto r = localization({fixtures::to_scored(v, "v")}, opts);
    CHECK(r.rbdc == 1.0);
    CHECK(r.tbdc == 1.0);
    CHECK(r.regions == 2);
    CHECK(r.tracks == 1);
  }

  TEST_CASE("agrees with the exhaustive sweep") {
    Rng rng(61);
    LocalizationOptions opts;
    opts.max_thresholds = 0;
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<oracle::ToyVolume> vols;
      ScoredFrames scored;
      const std::size_t n = fixtures::between(rng, 1, 2);
      for (std::size_t i = 0; i < n; ++i) {
        vols.push_back(fixtures::random_toy_volume(rng));
        scored.push_back(fixtures::to_scored(vols.back(), "v" + std::to_string(i)));
      }
      const auto expect = oracle::exhaustive_sweep(vols, opts.alpha, opts.beta);
      const auto got = localization(scored, opts);
      CHECK(std::abs(got.rbdc - expect.rbdc) < 1e-12);
      CHECK(std::abs(got.tbdc - expect.tbdc) < 1e-12);
    }
  }

  TEST_CASE("threshold cap") {
    Rng rng(62);
    const auto vol = fixtures::random_toy_volume(rng);
    LocalizationOptions opts;
    opts.max_thresholds = 3;
    CHECK(localization({fixtures::to_scored(vol, "v")}, opts).thresholds <= 3);
    opts.max_thresholds = 1;
    CHECK_THROWS_AS(localization({fixtures::to_scored(vol, "v")}, opts), ValidationError);
  }

  TEST_CASE("masks stand in for track ids") {
    Rng rng(63);
    auto scored = fixtures::to_scored(fixtures::random_toy_volume(rng), "v");
    scored.track_ids = std::nullopt;
    const auto r = localization({scored}, {});
    CHECK(r.tracks == r.regions);
  }

  TEST_CASE("rejections") {
    oracle::ToyVolume v{3, 3, 3, std::vector<double>(27, 0.5), std::vector<int>(27, 0)};
    CHECK_THROWS_AS(localization({fixtures::to_scored(v, "empty")}, {}), ValidationError);
    v.track[0] = 1;
    v.track[18] = 1;  // frames 0 and 2 only
    CHECK_THROWS_AS(localization({fixtures::to_scored(v, "gap")}, {}), ValidationError);
    auto s = fixtures::to_scored(v, "nomap");
    s.pixel_maps = std::nullopt;
    CHECK_THROWS_AS(localization({s}, {}), ValidationError);
    LocalizationOptions bad;
    bad.alpha = 1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }
}
