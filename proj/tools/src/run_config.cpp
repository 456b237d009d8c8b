#include "ssmctb_cli/run_config.hpp"

#include <fstream>
#include <set>

#include "ssmctb/error.hpp"

namespace ssmctb::cli {

using nlohmann::json;

void RunConfig::set_seed(std::uint64_t value) {
  seed = value;
  data.images.seed = value;
  data.videos.seed = value;
  train.seed = value;
}

void RunConfig::set_lambda(double value) {
  train.lambda = value;
  model.block.lambda = value;
}

std::size_t parse_position(const std::string& text) {
  if (text == "none") return host::kNoBlock;
  if (text.size() == 1 && text[0] >= '1' && text[0] <= '4') return static_cast<std::size_t>(text[0] - '0');
  throw ValidationError("ssmctb_position must be none or 1..4, got '" + text + "'");
}

namespace {

const json& section(const json& parent, const char* name, std::initializer_list<const char*> allowed) {
  static const json empty = json::object();
  if (!parent.contains(name)) return empty;
  const json& s = parent.at(name);
  if (!s.is_object()) throw ValidationError(std::string("config section '") + name + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : s.items()) {
    if (!keys.count(key)) throw ValidationError(std::string("unknown key '") + key + "' in config section '" + name + "'");
  }
  return s;
}

template <typename T>
void read(const json& s, const char* key, T& field) {
  if (!s.contains(key)) return;
  try {
    field = s.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::size_t read_position(const json& s) {
  const json& v = s.at("ssmctb_position");
  if (v.is_string()) return parse_position(v.get<std::string>());
  if (v.is_number_unsigned() && v.get<std::size_t>() >= 1 && v.get<std::size_t>() <= 4) return v.get<std::size_t>();
  throw ValidationError("ssmctb_position must be \"none\" or an integer in 1..4");
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  static const std::set<std::string> top{"seed", "output_dir", "data", "model", "ssmctb", "train", "grad_check"};
  for (const auto& [key, _] : j.items()) {
    if (!top.count(key)) throw ValidationError("unknown top-level config key '" + key + "'");
  }
  RunConfig c;
  read(j, "seed", c.seed);
  read(j, "output_dir", c.output_dir);

  const json& d = section(j, "data", {"kind", "dir", "window", "train_stride", "n_train", "n_test", "height", "width",
                                      "anomaly_fraction", "n_train_videos", "n_test_videos", "frames", "blobs", "kinds"});
  if (d.contains("kind")) c.data.kind = data::parse_kind(d.at("kind").get<std::string>());
  read(d, "dir", c.data.dir);
  read(d, "window", c.data.window);
  read(d, "train_stride", c.data.train_stride);
  read(d, "n_train", c.data.images.n_train);
  read(d, "n_test", c.data.images.n_test);
  read(d, "height", c.data.images.height);
  read(d, "width", c.data.images.width);
  read(d, "anomaly_fraction", c.data.images.anomaly_fraction);
  c.data.videos.height = c.data.images.height;
  c.data.videos.width = c.data.images.width;
  read(d, "n_train_videos", c.data.videos.n_train_videos);
  read(d, "n_test_videos", c.data.videos.n_test_videos);
  read(d, "frames", c.data.videos.frames);
  read(d, "blobs", c.data.videos.blobs);
  if (d.contains("kinds")) {
    c.data.videos.kinds.clear();
    for (const auto& k : d.at("kinds")) c.data.videos.kinds.push_back(data::parse_anomaly(k.get<std::string>()));
  }
  if (c.data.window == 0) throw ValidationError("data.window must be positive");
  if (c.data.train_stride == 0) throw ValidationError("data.train_stride must be positive");

  const json& m = section(j, "model", {"dims", "width1", "width2", "ssmctb_position", "width_adapter"});
  read(m, "dims", c.model.dims);
  read(m, "width1", c.model.width1);
  read(m, "width2", c.model.width2);
  if (m.contains("ssmctb_position")) c.model.ssmctb_position = read_position(m);
  read(m, "width_adapter", c.model.width_adapter);
  if (c.model.dims != 2 && c.model.dims != 3) throw ValidationError("model.dims must be 2 or 3");

  c.model.block = block::SsmctbConfig::defaults(c.model.dims, 1);
  auto& b = c.model.block;
  const json& s = section(j, "ssmctb", {"dilation", "sub_kernel", "token_dim", "heads", "blocks", "pooled", "mlp_hidden",
                                        "lambda"});
  read(s, "dilation", b.conv.dilation);
  read(s, "sub_kernel", b.conv.sub_kernel);
  read(s, "token_dim", b.transformer.token_dim);
  read(s, "heads", b.transformer.heads);
  read(s, "blocks", b.transformer.blocks);
  read(s, "pooled", b.transformer.pooled);
  read(s, "mlp_hidden", b.transformer.mlp_hidden);
  double lambda = b.lambda;
  read(s, "lambda", lambda);

  const json& t = section(j, "train", {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon"});
  read(t, "epochs", c.train.epochs);
  read(t, "batch_size", c.train.batch_size);
  read(t, "learning_rate", c.train.adam.learning_rate);
  read(t, "beta1", c.train.adam.beta1);
  read(t, "beta2", c.train.adam.beta2);
  read(t, "epsilon", c.train.adam.epsilon);

  const json& g = section(j, "grad_check", {"extents", "channels", "step", "tolerance", "max_probes_per_parameter"});
  read(g, "extents", c.grad_check.extents);
  read(g, "channels", c.grad_check.channels);
  read(g, "step", c.grad_check.step);
  read(g, "tolerance", c.grad_check.tolerance);
  read(g, "max_probes_per_parameter", c.grad_check.max_probes_per_parameter);

  c.set_seed(c.seed);
  c.set_lambda(lambda);
  c.train.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  json kinds = json::array();
  for (auto k : c.data.videos.kinds) kinds.push_back(data::to_string(k));
  const auto& b = c.model.block;
  json position = c.model.ssmctb_position == host::kNoBlock ? json("none") : json(c.model.ssmctb_position);
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"data",
       {{"kind", data::to_string(c.data.kind)},
        {"dir", c.data.dir},
        {"window", c.data.window},
        {"train_stride", c.data.train_stride},
        {"n_train", c.data.images.n_train},
        {"n_test", c.data.images.n_test},
        {"height", c.data.images.height},
        {"width", c.data.images.width},
        {"anomaly_fraction", c.data.images.anomaly_fraction},
        {"n_train_videos", c.data.videos.n_train_videos},
        {"n_test_videos", c.data.videos.n_test_videos},
        {"frames", c.data.videos.frames},
        {"blobs", c.data.videos.blobs},
        {"kinds", kinds}}},
      {"model",
       {{"dims", c.model.dims},
        {"width1", c.model.width1},
        {"width2", c.model.width2},
        {"ssmctb_position", position},
        {"width_adapter", c.model.width_adapter}}},
      {"ssmctb",
       {{"dilation", b.conv.dilation},
        {"sub_kernel", b.conv.sub_kernel},
        {"token_dim", b.transformer.token_dim},
        {"heads", b.transformer.heads},
        {"blocks", b.transformer.blocks},
        {"pooled", b.transformer.pooled},
        {"mlp_hidden", b.transformer.mlp_hidden},
        {"lambda", c.train.lambda}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.adam.learning_rate},
        {"beta1", c.train.adam.beta1},
        {"beta2", c.train.adam.beta2},
        {"epsilon", c.train.adam.epsilon}}},
      {"grad_check",
       {{"extents", c.grad_check.extents},
        {"channels", c.grad_check.channels},
        {"step", c.grad_check.step},
        {"tolerance", c.grad_check.tolerance},
        {"max_probes_per_parameter", c.grad_check.max_probes_per_parameter}}},
  };
}

}  // namespace ssmctb::cli
