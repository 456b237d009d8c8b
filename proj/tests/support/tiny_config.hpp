// Small run configurations that keep CLI round trips fast.
#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fixtures {

inline nlohmann::json tiny_image_config(const std::string& output_dir) {
  return {{"seed", 3},
          {"output_dir", output_dir},
          {"data", {{"kind", "images"}, {"n_train", 8}, {"n_test", 8}, {"height", 16}, {"width", 16}}},
          {"model", {{"width1", 4}, {"width2", 6}, {"ssmctb_position", "3"}}},
          {"ssmctb", {{"token_dim", 8}, {"heads", 2}, {"blocks", 1}}},
          {"train", {{"epochs", 1}, {"batch_size", 4}}}};
}

inline nlohmann::json tiny_video_config(const std::string& output_dir) {
  return {{"seed", 3},
          {"output_dir", output_dir},
          {"data",
           {{"kind", "videos"},
            {"n_train_videos", 1},
            {"n_test_videos", 3},
            {"frames", 12},
            {"height", 16},
            {"width", 16},
            {"train_stride", 3}}},
          {"model", {{"width1", 4}, {"width2", 6}}},
          {"ssmctb", {{"token_dim", 8}, {"heads", 2}, {"blocks", 1}}},
          {"train", {{"epochs", 1}, {"batch_size", 4}}}};
}

inline std::filesystem::path write_config(const nlohmann::json& j, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path) << j.dump(2);
  return path;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ssmctb_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
