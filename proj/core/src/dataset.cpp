#include "ssmctb/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "ssmctb/error.hpp"
#include "ssmctb/rng.hpp"
#include "ssmctb/tensor_io.hpp"

namespace ssmctb::data {

using nlohmann::json;

std::string to_string(DatasetKind kind) { return kind == DatasetKind::images ? "images" : "videos"; }

DatasetKind parse_kind(const std::string& text) {
  if (text == "images") return DatasetKind::images;
  if (text == "videos") return DatasetKind::videos;
  throw ValidationError("unknown dataset kind '" + text + "' (expected images or videos)");
}

std::string to_string(VideoAnomaly kind) {
  switch (kind) {
    case VideoAnomaly::speed: return "speed";
    case VideoAnomaly::reversal: return "reversal";
    case VideoAnomaly::new_blob: return "new_blob";
  }
  return "unknown";
}

VideoAnomaly parse_anomaly(const std::string& text) {
  if (text == "speed") return VideoAnomaly::speed;
  if (text == "reversal") return VideoAnomaly::reversal;
  if (text == "new_blob") return VideoAnomaly::new_blob;
  throw ValidationError("unknown anomaly kind '" + text + "' (expected speed, reversal or new_blob)");
}

void ImageGenSpec::validate() const {
  if (height < 16 || width < 16) throw ValidationError("image extents must be at least 16 per axis");
  if (n_train == 0 || n_test < 2) throw ValidationError("image dataset needs n_train >= 1 and n_test >= 2");
  if (!(anomaly_fraction > 0.0 && anomaly_fraction < 1.0)) {
    throw ValidationError("anomaly_fraction must lie strictly between 0 and 1");
  }
}

void VideoGenSpec::validate() const {
  if (frames < 8) throw ValidationError("videos need at least 8 frames");
  if (height < 16 || width < 16) throw ValidationError("video extents must be at least 16 per axis");
  if (n_train_videos == 0 || n_test_videos == 0) throw ValidationError("video dataset needs train and test videos");
  if (blobs == 0) throw ValidationError("videos need at least one blob");
}

void Clip::validate() const {
  if (frames.rank() != 3) throw ValidationError("clip " + name + ": frames must be (T, h, w)");
  if (labels.size() != frames.extent(0)) throw ValidationError("clip " + name + ": label count differs from frames");
  if (masks.shape() != frames.shape()) throw ValidationError("clip " + name + ": masks differ in shape from frames");
  if (track_ids && track_ids->shape() != frames.shape()) {
    throw ValidationError("clip " + name + ": track ids differ in shape from frames");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("clip " + name + ": labels must be 0 or 1");
  }
}

Tensor render_blob(std::size_t height, std::size_t width, double row, double col, double sigma, double amplitude) {
  Tensor out = Tensor::zeros({height, width});
  const double h = static_cast<double>(height), w = static_cast<double>(width);
  auto wrap = [](double delta, double extent) {
    delta = std::fmod(delta, extent);
    if (delta > extent / 2) delta -= extent;
    if (delta < -extent / 2) delta += extent;
    return delta;
  };
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t r = 0; r < height; ++r) {
    const double dr = wrap(static_cast<double>(r) - row, h);
    for (std::size_t c = 0; c < width; ++c) {
      const double dc = wrap(static_cast<double>(c) - col, w);
      out[r * width + c] = amplitude * std::exp(-(dr * dr + dc * dc) * inv);
    }
  }
  return out;
}

namespace {

constexpr std::size_t kGrid = 4;

// Non-wrapping bump added into a (h, w) buffer.
void add_bump(std::vector<double>& img, std::size_t h, std::size_t w, double row, double col, double sigma,
              double amplitude) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t r = 0; r < h; ++r) {
    const double dr = static_cast<double>(r) - row;
    for (std::size_t c = 0; c < w; ++c) {
      const double dc = static_cast<double>(c) - col;
      img[r * w + c] += amplitude * std::exp(-(dr * dr + dc * dc) * inv);
    }
  }
}

std::vector<double> normal_image(const ImageGenSpec& spec, Rng& rng) {
  const std::size_t h = spec.height, w = spec.width;
  const double sigma = static_cast<double>(std::min(h, w)) / 10.0;
  std::vector<double> img(h * w, 0.0);
  for (std::size_t i = 0; i < kGrid; ++i) {
    for (std::size_t j = 0; j < kGrid; ++j) {
      const double row = (static_cast<double>(i) + 0.5) * static_cast<double>(h) / kGrid;
      const double col = (static_cast<double>(j) + 0.5) * static_cast<double>(w) / kGrid;
      add_bump(img, h, w, row, col, sigma, rng.uniform(0.35, 0.85));
    }
  }
  return img;
}

void clamp_unit(std::vector<double>& img) {
  for (auto& v : img) v = std::clamp(v, 0.0, 1.0);
}

// Inverts a random rectangle in place; returns its mask.
std::vector<double> invert_rectangle(std::vector<double>& img, const ImageGenSpec& spec, Rng& rng) {
  const std::size_t h = spec.height, w = spec.width;
  const std::size_t rh = h / 8 + rng.below(h / 8 + 1), rw = w / 8 + rng.below(w / 8 + 1);
  const std::size_t r0 = rng.below(h - rh + 1), c0 = rng.below(w - rw + 1);
  std::vector<double> mask(h * w, 0.0);
  for (std::size_t r = r0; r < r0 + rh; ++r) {
    for (std::size_t c = c0; c < c0 + rw; ++c) {
      img[r * w + c] = 1.0 - img[r * w + c];
      mask[r * w + c] = 1.0;
    }
  }
  return mask;
}

// Adds a bump centred between grid points; returns its footprint.
std::vector<double> off_grid_bump(std::vector<double>& img, const ImageGenSpec& spec, Rng& rng) {
  const std::size_t h = spec.height, w = spec.width;
  const double sigma = static_cast<double>(std::min(h, w)) / 10.0;
  const double row = static_cast<double>(1 + rng.below(kGrid - 1)) * static_cast<double>(h) / kGrid +
                     rng.uniform(-1.0, 1.0);
  const double col = static_cast<double>(1 + rng.below(kGrid - 1)) * static_cast<double>(w) / kGrid +
                     rng.uniform(-1.0, 1.0);
  std::vector<double> bump(h * w, 0.0);
  add_bump(bump, h, w, row, col, sigma, 0.9);
  std::vector<double> mask(h * w, 0.0);
  for (std::size_t p = 0; p < bump.size(); ++p) {
    img[p] += bump[p];
    mask[p] = bump[p] > kFootprintLevel ? 1.0 : 0.0;
  }
  return mask;
}

Clip stack_clip(std::string name, const std::vector<std::vector<double>>& frames, std::vector<int> labels,
                const std::vector<std::vector<double>>& masks, std::size_t h, std::size_t w) {
  const std::size_t t = frames.size();
  std::vector<double> f, m;
  f.reserve(t * h * w);
  m.reserve(t * h * w);
  for (std::size_t i = 0; i < t; ++i) {
    f.insert(f.end(), frames[i].begin(), frames[i].end());
    m.insert(m.end(), masks[i].begin(), masks[i].end());
  }
  return {std::move(name), Tensor({t, h, w}, std::move(f)), std::move(labels), Tensor({t, h, w}, std::move(m)), {}};
}

}  // namespace

AnomalyDataset generate_images(const ImageGenSpec& spec) {
  spec.validate();
  const std::size_t h = spec.height, w = spec.width;
  AnomalyDataset ds;
  ds.kind = DatasetKind::images;
  ds.image_spec = spec;

  Rng train_rng(derive_seed(spec.seed, "images.train"));
  std::vector<std::vector<double>> frames, masks;
  for (std::size_t i = 0; i < spec.n_train; ++i) {
    auto img = normal_image(spec, train_rng);
    clamp_unit(img);
    frames.push_back(std::move(img));
    masks.emplace_back(h * w, 0.0);
  }
  ds.train.push_back(stack_clip("train", frames, std::vector<int>(spec.n_train, 0), masks, h, w));

  Rng layout_rng(derive_seed(spec.seed, "images.layout"));
  const auto rounded = static_cast<std::size_t>(std::llround(spec.anomaly_fraction * static_cast<double>(spec.n_test)));
  const std::size_t anomalous = std::clamp<std::size_t>(rounded, 1, spec.n_test - 1);
  std::vector<std::size_t> order(spec.n_test);
  std::iota(order.begin(), order.end(), 0);
  layout_rng.shuffle(order);
  std::vector<int> labels(spec.n_test, 0);
  for (std::size_t i = 0; i < anomalous; ++i) labels[order[i]] = 1;

  Rng test_rng(derive_seed(spec.seed, "images.test"));
  frames.clear();
  masks.clear();
  for (std::size_t i = 0; i < spec.n_test; ++i) {
    auto img = normal_image(spec, test_rng);
    std::vector<double> mask(h * w, 0.0);
    if (labels[i]) {
      clamp_unit(img);
      mask = test_rng.below(2) == 0 ? invert_rectangle(img, spec, test_rng) : off_grid_bump(img, spec, test_rng);
    }
    clamp_unit(img);
    frames.push_back(std::move(img));
    masks.push_back(std::move(mask));
  }
  ds.test.push_back(stack_clip("test", frames, labels, masks, h, w));
  return ds;
}

namespace {

struct Blob {
  double row, col, vrow, vcol;
};

Blob random_blob(const VideoGenSpec& spec, Rng& rng) {
  return {rng.uniform(0.0, static_cast<double>(spec.height)), rng.uniform(0.0, static_cast<double>(spec.width)),
          rng.uniform(-0.25, 0.25), rng.uniform(0.75, 1.25)};
}

double blob_sigma(const VideoGenSpec& spec) { return static_cast<double>(std::min(spec.height, spec.width)) / 16.0; }

// The intruder of a new_blob event is a flat bright square of side 3 sigma,
// wrapped like the blobs.
Tensor render_square(const VideoGenSpec& spec, double row, double col) {
  const std::size_t h = spec.height, w = spec.width;
  const auto side = static_cast<long long>(std::lround(3.0 * blob_sigma(spec)));
  const auto r0 = static_cast<long long>(std::floor(row)) - side / 2;
  const auto c0 = static_cast<long long>(std::floor(col)) - side / 2;
  Tensor out = Tensor::zeros({h, w});
  const auto H = static_cast<long long>(h), W = static_cast<long long>(w);
  for (long long r = r0; r < r0 + side; ++r) {
    for (long long c = c0; c < c0 + side; ++c) {
      out[static_cast<std::size_t>(((r % H + H) % H) * W + (c % W + W) % W)] = 1.0;
    }
  }
  return out;
}

// One video. `event` < 0 means a normal video.
Clip make_video(const VideoGenSpec& spec, Rng& rng, const std::string& name, int event) {
  const std::size_t T = spec.frames, h = spec.height, w = spec.width, plane = h * w;
  const double sigma = blob_sigma(spec);
  std::vector<Blob> blobs;
  for (std::size_t b = 0; b < spec.blobs; ++b) blobs.push_back(random_blob(spec, rng));

  std::size_t start = T, stop = T;
  Blob extra{};
  if (event >= 0) {
    start = T / 4 + rng.below(T / 4);
    stop = std::min(T, start + T / 4);
    extra = random_blob(spec, rng);
  }
  const auto kind = static_cast<VideoAnomaly>(event < 0 ? 0 : event);

  std::vector<double> frames(T * plane, 0.0), masks(T * plane, 0.0), tracks(T * plane, 0.0);
  std::vector<int> labels(T, 0);
  for (std::size_t t = 0; t < T; ++t) {
    const bool active = t >= start && t < stop;
    if (t > 0) {
      for (std::size_t b = 0; b < blobs.size(); ++b) {
        double factor = 1.0;
        if (active && b == 0 && kind == VideoAnomaly::speed) factor = 2.0;
        if (active && b == 0 && kind == VideoAnomaly::reversal) factor = -1.0;
        blobs[b].row += factor * blobs[b].vrow;
        blobs[b].col += factor * blobs[b].vcol;
      }
      if (active && t > start) {
        extra.row += extra.vrow;
        extra.col += extra.vcol;
      }
    }
    double* frame = frames.data() + t * plane;
    for (const auto& b : blobs) {
      const Tensor img = render_blob(h, w, b.row, b.col, sigma, 1.0);
      for (std::size_t p = 0; p < plane; ++p) frame[p] += img[p];
    }
    if (active) {
      labels[t] = 1;
      const Tensor img = kind == VideoAnomaly::new_blob ? render_square(spec, extra.row, extra.col)
                                                        : render_blob(h, w, blobs[0].row, blobs[0].col, sigma, 1.0);
      for (std::size_t p = 0; p < plane; ++p) {
        if (kind == VideoAnomaly::new_blob) frame[p] += img[p];
        if (img[p] > kFootprintLevel) {
          masks[t * plane + p] = 1.0;
          tracks[t * plane + p] = 1.0;
        }
      }
    }
    for (std::size_t p = 0; p < plane; ++p) frame[p] = std::clamp(frame[p], 0.0, 1.0);
  }
  return {name, Tensor({T, h, w}, std::move(frames)), std::move(labels), Tensor({T, h, w}, std::move(masks)),
          Tensor({T, h, w}, std::move(tracks))};
}

}  // namespace

AnomalyDataset generate_videos(const VideoGenSpec& spec) {
  spec.validate();
  AnomalyDataset ds;
  ds.kind = DatasetKind::videos;
  ds.video_spec = spec;
  Rng train_rng(derive_seed(spec.seed, "videos.train"));
  for (std::size_t v = 0; v < spec.n_train_videos; ++v) {
    ds.train.push_back(make_video(spec, train_rng, "train" + std::to_string(v), -1));
  }
  Rng test_rng(derive_seed(spec.seed, "videos.test"));
  for (std::size_t v = 0; v < spec.n_test_videos; ++v) {
    const int event = spec.kinds.empty() ? -1 : static_cast<int>(spec.kinds[v % spec.kinds.size()]);
    ds.test.push_back(make_video(spec, test_rng, "test" + std::to_string(v), event));
  }
  return ds;
}

Tensor frame_input(const Clip& clip, std::size_t t, std::size_t window, std::size_t dims) {
  if (t >= clip.length()) throw ValidationError("frame index out of range for clip " + clip.name);
  if (window == 0) throw ValidationError("frame window must be positive");
  if (dims != 2 && dims != 3) throw ValidationError("frame input dims must be 2 or 3");
  const std::size_t h = clip.height(), w = clip.width(), plane = h * w;
  const auto src = clip.frames.data();
  std::vector<double> out(window * plane);
  for (std::size_t j = 0; j < window; ++j) {
    const std::size_t back = window - 1 - j;
    const std::size_t f = t >= back ? t - back : 0;
    for (std::size_t p = 0; p < plane; ++p) {
      // dims 2 interleaves frames as channels; dims 3 keeps them as a leading axis.
      const std::size_t dst = dims == 2 ? p * window + j : j * plane + p;
      out[dst] = src[f * plane + p];
    }
  }
  if (dims == 2) return Tensor({h, w, window}, std::move(out));
  return Tensor({window, h, w, 1}, std::move(out));
}

namespace {

json clip_record(const Clip& clip, const std::string& split) {
  const std::string stem = split + "/" + clip.name;
  json rec{{"name", clip.name},
           {"frames", stem + ".frames.sstb"},
           {"labels", stem + ".labels.sstb"},
           {"masks", stem + ".masks.sstb"}};
  if (clip.track_ids) rec["track_ids"] = stem + ".tracks.sstb";
  return rec;
}

Tensor labels_tensor(const std::vector<int>& labels) {
  return Tensor({labels.size()}, std::vector<double>(labels.begin(), labels.end()));
}

std::vector<int> labels_from(const Tensor& t) {
  if (t.rank() != 1) throw ValidationError("label tensor must be rank 1");
  std::vector<int> out;
  for (double v : t.data()) {
    if (v != 0.0 && v != 1.0) throw ValidationError("label tensor must hold 0 or 1");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

json spec_json(const AnomalyDataset& ds) {
  if (ds.kind == DatasetKind::images) {
    const auto& s = ds.image_spec;
    return {{"seed", s.seed}, {"n_train", s.n_train}, {"n_test", s.n_test}, {"height", s.height},
            {"width", s.width}, {"anomaly_fraction", s.anomaly_fraction}};
  }
  const auto& s = ds.video_spec;
  json kinds = json::array();
  for (auto k : s.kinds) kinds.push_back(to_string(k));
  return {{"seed", s.seed},     {"n_train_videos", s.n_train_videos}, {"n_test_videos", s.n_test_videos},
          {"frames", s.frames}, {"height", s.height},                 {"width", s.width},
          {"blobs", s.blobs},   {"kinds", kinds}};
}

void read_spec(AnomalyDataset& ds, const json& j) {
  if (ds.kind == DatasetKind::images) {
    auto& s = ds.image_spec;
    s.seed = j.at("seed");
    s.n_train = j.at("n_train");
    s.n_test = j.at("n_test");
    s.height = j.at("height");
    s.width = j.at("width");
    s.anomaly_fraction = j.at("anomaly_fraction");
    return;
  }
  auto& s = ds.video_spec;
  s.seed = j.at("seed");
  s.n_train_videos = j.at("n_train_videos");
  s.n_test_videos = j.at("n_test_videos");
  s.frames = j.at("frames");
  s.height = j.at("height");
  s.width = j.at("width");
  s.blobs = j.at("blobs");
  s.kinds.clear();
  for (const auto& k : j.at("kinds")) s.kinds.push_back(parse_anomaly(k.get<std::string>()));
}

}  // namespace

void save_dataset(const AnomalyDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "train");
  std::filesystem::create_directories(dir / "test");
  json manifest{{"format", "ssmctb-dataset-1"}, {"kind", to_string(dataset.kind)}, {"generator", spec_json(dataset)}};
  for (const auto* split : {"train", "test"}) {
    const auto& clips = std::string(split) == "train" ? dataset.train : dataset.test;
    json list = json::array();
    for (const auto& clip : clips) {
      clip.validate();
      const json rec = clip_record(clip, split);
      save_tensor(dir / rec["frames"].get<std::string>(), clip.frames);
      save_tensor(dir / rec["labels"].get<std::string>(), labels_tensor(clip.labels));
      save_tensor(dir / rec["masks"].get<std::string>(), clip.masks);
      if (clip.track_ids) save_tensor(dir / rec["track_ids"].get<std::string>(), *clip.track_ids);
      list.push_back(rec);
    }
    manifest[split] = std::move(list);
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw ValidationError("cannot write " + (dir / "manifest.json").string());
}

AnomalyDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ValidationError("missing dataset manifest in " + dir.string());
  AnomalyDataset ds;
  try {
    const json manifest = json::parse(in);
    if (manifest.at("format") != "ssmctb-dataset-1") throw ValidationError("unsupported dataset format");
    ds.kind = parse_kind(manifest.at("kind").get<std::string>());
    read_spec(ds, manifest.at("generator"));
    for (const auto* split : {"train", "test"}) {
      auto& clips = std::string(split) == "train" ? ds.train : ds.test;
      for (const auto& rec : manifest.at(split)) {
        Clip clip;
        clip.name = rec.at("name").get<std::string>();
        clip.frames = load_tensor(dir / rec.at("frames").get<std::string>());
        clip.labels = labels_from(load_tensor(dir / rec.at("labels").get<std::string>()));
        clip.masks = load_tensor(dir / rec.at("masks").get<std::string>());
        if (rec.contains("track_ids")) clip.track_ids = load_tensor(dir / rec.at("track_ids").get<std::string>());
        clip.validate();
        clips.push_back(std::move(clip));
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError("dataset manifest: " + std::string(e.what()));
  }
  return ds;
}

}  // namespace ssmctb::data
