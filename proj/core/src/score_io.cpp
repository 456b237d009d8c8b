#include "ssmctb/score_io.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "ssmctb/error.hpp"
#include "ssmctb/tensor_io.hpp"

namespace ssmctb::metrics {

using nlohmann::json;

void save_scores(const ScoreManifest& scores, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json list = json::array();
  for (const auto& v : scores.videos) {
    v.validate();
    json rec{{"name", v.name}, {"frame_scores", v.name + ".scores.sstb"}, {"frame_labels", v.name + ".labels.sstb"}};
    const std::size_t n = v.frame_scores.size();
    save_tensor(dir / rec["frame_scores"].get<std::string>(), Tensor({n}, v.frame_scores));
    save_tensor(dir / rec["frame_labels"].get<std::string>(),
                Tensor({n}, std::vector<double>(v.frame_labels.begin(), v.frame_labels.end())));
    auto optional_volume = [&](const std::optional<Tensor>& t, const char* key, const char* suffix) {
      if (!t) return;
      rec[key] = v.name + suffix;
      save_tensor(dir / rec[key].get<std::string>(), *t);
    };
    optional_volume(v.pixel_maps, "pixel_maps", ".maps.sstb");
    optional_volume(v.masks, "masks", ".masks.sstb");
    optional_volume(v.track_ids, "track_ids", ".tracks.sstb");
    list.push_back(std::move(rec));
  }
  const json manifest{{"format", "ssmctb-scores-1"}, {"kind", data::to_string(scores.kind)}, {"videos", list}};
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw ValidationError("cannot write " + (dir / "manifest.json").string());
}

ScoreManifest load_scores(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ValidationError("missing score manifest in " + dir.string());
  ScoreManifest out;
  try {
    const json manifest = json::parse(in);
    if (manifest.at("format") != "ssmctb-scores-1") throw ValidationError("unsupported score manifest format");
    out.kind = data::parse_kind(manifest.at("kind").get<std::string>());
    for (const auto& rec : manifest.at("videos")) {
      ScoredVideo v;
      v.name = rec.at("name").get<std::string>();
      const Tensor scores = load_tensor(dir / rec.at("frame_scores").get<std::string>());
      const Tensor labels = load_tensor(dir / rec.at("frame_labels").get<std::string>());
      if (scores.rank() != 1 || labels.rank() != 1) throw ValidationError("video " + v.name + ": frame files must be rank 1");
      v.frame_scores = scores.values();
      for (double l : labels.data()) {
        if (l != 0.0 && l != 1.0) throw ValidationError("video " + v.name + ": labels must be 0 or 1");
        v.frame_labels.push_back(static_cast<int>(l));
      }
      if (rec.contains("pixel_maps")) v.pixel_maps = load_tensor(dir / rec["pixel_maps"].get<std::string>());
      if (rec.contains("masks")) v.masks = load_tensor(dir / rec["masks"].get<std::string>());
      if (rec.contains("track_ids")) v.track_ids = load_tensor(dir / rec["track_ids"].get<std::string>());
      v.validate();
      out.videos.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw ValidationError("score manifest: " + std::string(e.what()));
  }
  return out;
}

}  // namespace ssmctb::metrics
