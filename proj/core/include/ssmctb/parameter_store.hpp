#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ssmctb/tensor.hpp"

namespace ssmctb {

/// Named learnable tensors keyed by dot-separated path. Shapes are fixed once
/// a path is added; `set` may only replace values.
class ParameterStore {
 public:
  using Map = std::map<std::string, Tensor>;

  void add(const std::string& path, Tensor value);
  void set(const std::string& path, Tensor value);
  const Tensor& get(const std::string& path) const;
  Tensor& mutable_get(const std::string& path);
  bool contains(const std::string& path) const { return params_.contains(path); }

  std::vector<std::string> paths() const;
  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;

  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  bool operator==(const ParameterStore& other) const = default;

  /// Writes `<path>.sstb` per parameter plus manifest.json listing
  /// {"path", "shape", "file"} records.
  void save(const std::filesystem::path& dir) const;
  static ParameterStore load(const std::filesystem::path& dir);

 private:
  Map params_;
};

using Gradients = std::map<std::string, Tensor>;

}  // namespace ssmctb
