#include "ssmctb/parameter_store.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "ssmctb/error.hpp"
#include "ssmctb/tensor_io.hpp"

namespace ssmctb {

void ParameterStore::add(const std::string& path, Tensor value) {
  if (path.empty()) throw ValidationError("parameter path must not be empty");
  auto [it, inserted] = params_.emplace(path, std::move(value));
  if (!inserted) throw ValidationError("duplicate parameter path " + path);
}

void ParameterStore::set(const std::string& path, Tensor value) {
  auto& slot = mutable_get(path);
  if (slot.shape() != value.shape()) {
    throw ValidationError("parameter " + path + " has fixed shape " + shape_string(slot.shape()) + ", got " +
                          shape_string(value.shape()));
  }
  slot = std::move(value);
}

const Tensor& ParameterStore::get(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw ValidationError("unknown parameter " + path);
  return it->second;
}

Tensor& ParameterStore::mutable_get(const std::string& path) {
  auto it = params_.find(path);
  if (it == params_.end()) throw ValidationError("unknown parameter " + path);
  return it->second;
}

std::vector<std::string> ParameterStore::paths() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [path, _] : params_) out.push_back(path);
  return out;
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParameterStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "ssmctb-checkpoint-1";
  auto& list = manifest["parameters"] = nlohmann::json::array();
  for (const auto& [path, t] : params_) {
    const std::string file = path + ".sstb";
    save_tensor(dir / file, t);
    list.push_back({{"path", path}, {"shape", t.shape()}, {"file", file}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw ValidationError("cannot write " + (dir / "manifest.json").string());
}

ParameterStore ParameterStore::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ValidationError("missing checkpoint manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint manifest: " + std::string(e.what()));
  }
  ParameterStore store;
  for (const auto& rec : manifest.at("parameters")) {
    const auto path = rec.at("path").get<std::string>();
    const auto shape = rec.at("shape").get<Shape>();
    Tensor t = load_tensor(dir / rec.at("file").get<std::string>());
    if (t.shape() != shape) throw ValidationError("checkpoint shape mismatch for " + path);
    store.add(path, std::move(t));
  }
  return store;
}

}  // namespace ssmctb
