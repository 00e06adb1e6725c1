#include "glatent/datasets.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "glatent/util.hpp"

namespace glatent {

using ordered_json = nlohmann::ordered_json;

std::string shape_name(SpriteShape shape) {
  switch (shape) {
    case SpriteShape::kSquare: return "square";
    case SpriteShape::kEllipse: return "ellipse";
    case SpriteShape::kHeart: return "heart";
  }
  throw std::logic_error("unreachable shape");
}

namespace {

Rgb darken(const Rgb& base) {
  Rgb out;
  for (int i = 0; i < 3; ++i)
    out[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(std::lround(base[static_cast<std::size_t>(i)] * 0.65));
  return out;
}

}  // namespace

SpriteSpec SpriteSpec::standard(int canvas, int grid) {
  SpriteSpec spec;
  spec.canvas = canvas;
  spec.shapes = {SpriteShape::kSquare, SpriteShape::kEllipse, SpriteShape::kHeart};
  if (canvas == 100) {
    spec.sizes = {{"small", 16}, {"medium", 24}, {"big", 32}};
    if (grid <= 0) grid = 7;
  } else if (canvas == 32) {
    spec.sizes = {{"small", 10}, {"medium", 15}, {"big", 20}};
    if (grid <= 0) grid = 4;
  } else {
    throw std::invalid_argument("no standard sprite spec for canvas " + std::to_string(canvas));
  }
  const std::vector<std::pair<std::string, Rgb>> bases = {
      {"red", {255, 0, 0}}, {"green", {0, 255, 0}}, {"blue", {0, 0, 255}},
      {"yellow", {255, 255, 0}}};
  for (const auto& [name, rgb] : bases) {
    spec.colors.push_back({name, 'a', rgb});
    spec.colors.push_back({name, 'b', darken(rgb)});
  }
  int max_extent = 0;
  for (const auto& s : spec.sizes) max_extent = std::max(max_extent, s.extent);
  const int span = canvas - max_extent;
  for (int row = 0; row < grid; ++row)
    for (int col = 0; col < grid; ++col) {
      const int y = grid == 1 ? 0 : static_cast<int>(std::lround(double(span) * row / (grid - 1)));
      const int x = grid == 1 ? 0 : static_cast<int>(std::lround(double(span) * col / (grid - 1)));
      spec.positions.emplace_back(x, y);
    }
  return spec;
}

Image render_sprite(SpriteShape shape, int extent, const Rgb& color, int x, int y, int canvas) {
  if (extent <= 0) throw std::invalid_argument("render_sprite: non-positive extent");
  if (x < 0 || y < 0 || x + extent > canvas || y + extent > canvas)
    throw std::invalid_argument("render_sprite: extent " + std::to_string(extent) + " at (" +
                                std::to_string(x) + "," + std::to_string(y) +
                                ") leaves the " + std::to_string(canvas) + "px canvas");
  Image img(canvas, canvas);
  switch (shape) {
    case SpriteShape::kSquare:
      fill_rect(img, x, y, extent, extent, color);
      break;
    case SpriteShape::kEllipse:
      fill_ellipse(img, x + extent / 2.0, y + extent / 2.0, extent / 2.0, extent / 2.0, color);
      break;
    case SpriteShape::kHeart:
      fill_heart(img, x, y, extent, color);
      break;
  }
  return img;
}

DatasetManifest generate_colored_dsprites(const SpriteSpec& spec,
                                          const std::filesystem::path& out_dir) {
  if (spec.shapes.empty() || spec.sizes.empty() || spec.colors.empty() || spec.positions.empty())
    throw std::invalid_argument("sprite spec has an empty dimension");
  DatasetManifest manifest;
  manifest.canvas = spec.canvas;
  std::filesystem::create_directories(out_dir / "images");
  for (const auto& shape : spec.shapes)
    for (const auto& size : spec.sizes)
      for (const auto& color : spec.colors) {
        const std::string object = shape_name(shape) + "_" + size.name + "_" + color.name + "_" +
                                   std::string(1, color.variant);
        int pos_index = 0;
        for (const auto& [x, y] : spec.positions) {
          auto img = render_sprite(shape, size.extent, color.rgb, x, y, spec.canvas);
          char pos[16];
          std::snprintf(pos, sizeof(pos), "p%02d", pos_index++);
          const std::string rel = "images/" + object + "_" + pos + ".png";
          write_png(out_dir / rel, img);
          ManifestRecord rec;
          rec.path = rel;
          rec.object = object;
          manifest.records.push_back(std::move(rec));
        }
      }
  return manifest;
}

std::vector<TensorPtr> augment(const Tensor& crop, int n, const AugmentParams& params,
                               RngStream& rng) {
  if (n < 1) throw std::invalid_argument("augment: need at least one copy");
  if (crop.shape.size() != 3 || crop.shape[0] != 3)
    throw std::invalid_argument("augment: expected [3,H,W], got " + shape_str(crop.shape));
  const int h = crop.shape[1], w = crop.shape[2];
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<TensorPtr> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const int dx = rng.uniform_range(-params.max_shift, params.max_shift);
    const int dy = rng.uniform_range(-params.max_shift, params.max_shift);
    auto img = tensor(crop.shape);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const int sx = x - dx, sy = y - dy;
          double v = 0.0;  // shifted-in border stays black
          if (sx >= 0 && sx < w && sy >= 0 && sy < h)
            v = crop.values[static_cast<std::size_t>(c) * plane +
                            static_cast<std::size_t>(sy) * w + sx];
          if (params.noise_std > 0) v += rng.normal() * params.noise_std;
          img->values[static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(y) * w + x] =
              std::min(std::max(v, 0.0), 1.0);
        }
    out.push_back(std::move(img));
  }
  return out;
}

void split_manifest(DatasetManifest& manifest, double ratio, RngStream& rng) {
  if (manifest.records.empty()) throw std::invalid_argument("split: empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("split: ratio must lie strictly between 0 and 1");

  std::vector<std::string> objects;
  std::map<std::string, std::vector<std::size_t>> by_object;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& key = manifest.records[i].object;
    if (!by_object.count(key)) objects.push_back(key);
    by_object[key].push_back(i);
  }

  // Global train count floor(ratio*N); per-object floors first, then the
  // shortfall goes to the largest fractional remainders in object order.
  const std::size_t total = manifest.records.size();
  const std::size_t train_total =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(total)));
  std::vector<std::size_t> take(objects.size());
  std::vector<double> remainder(objects.size());
  std::size_t assigned = 0;
  for (std::size_t oi = 0; oi < objects.size(); ++oi) {
    const double exact = ratio * static_cast<double>(by_object[objects[oi]].size());
    take[oi] = static_cast<std::size_t>(std::floor(exact));
    remainder[oi] = exact - static_cast<double>(take[oi]);
    assigned += take[oi];
  }
  std::vector<std::size_t> order(objects.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < train_total && k < order.size(); ++k) {
    const std::size_t oi = order[k];
    if (take[oi] + 1 < by_object[objects[oi]].size()) {
      ++take[oi];
      ++assigned;
    }
  }
  for (std::size_t oi = 0; oi < objects.size(); ++oi) {
    const std::size_t n = by_object[objects[oi]].size();
    if (n >= 2) take[oi] = std::min(std::max<std::size_t>(take[oi], 1), n - 1);
  }

  for (std::size_t oi = 0; oi < objects.size(); ++oi) {
    auto& indices = by_object[objects[oi]];
    rng.shuffle(indices);
    for (std::size_t k = 0; k < indices.size(); ++k)
      manifest.records[indices[k]].split = k < take[oi] ? "train" : "test";
  }
}

namespace {

struct SpriteAttrs {
  std::string shape, size, color;
  char variant = 'a';
};

SpriteAttrs parse_object(const std::string& object) {
  SpriteAttrs attrs;
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= object.size(); ++i)
    if (i == object.size() || object[i] == '_') {
      parts.push_back(object.substr(start, i - start));
      start = i + 1;
    }
  if (parts.size() != 4 || parts[3].size() != 1)
    throw std::invalid_argument("record object '" + object + "' is not shape_size_color_variant");
  attrs.shape = parts[0];
  attrs.size = parts[1];
  attrs.color = parts[2];
  attrs.variant = parts[3][0];
  return attrs;
}

}  // namespace

void apply_experiment_labels(DatasetManifest& manifest, const std::string& preset) {
  std::vector<ConceptGroup> groups;
  if (preset == "exp1") {
    groups = {{"color", {"red", "blue"}}, {"size", {"small", "big"}}};
  } else if (preset == "exp2") {
    groups = {{"shape", {"square", "heart"}}, {"size", {"small", "big"}}};
  } else {
    throw std::invalid_argument("unknown experiment preset: " + preset);
  }
  manifest.groups = groups;

  auto vocab_has = [&](const ConceptGroup& g, const std::string& v) {
    return std::find(g.labels.begin(), g.labels.end(), v) != g.labels.end();
  };

  for (auto& rec : manifest.records) {
    const auto attrs = parse_object(rec.object);
    rec.labels.clear();
    rec.truth.clear();
    bool utterable = true;
    std::map<std::string, std::string> candidate;
    for (const auto& g : groups) {
      std::string value;
      if (g.name == "color") value = attrs.color;
      else if (g.name == "size") value = attrs.size;
      else value = attrs.shape;
      const bool known = vocab_has(g, value);
      rec.truth[g.name] = known ? value : kUnknownLabel;
      // Color labels are uttered for one variant only; the darker twin
      // stays unlabelled but keeps its color ground truth.
      const bool uttered = known && (g.name != "color" || attrs.variant == 'a');
      if (uttered) candidate[g.name] = value;
      else utterable = false;
    }
    if (utterable) rec.labels = std::move(candidate);
  }
}

namespace {

ordered_json manifest_to_json(const DatasetManifest& manifest) {
  ordered_json j;
  j["version"] = manifest.version;
  j["canvas"] = manifest.canvas;
  j["groups"] = ordered_json::array();
  for (const auto& g : manifest.groups)
    j["groups"].push_back({{"name", g.name}, {"labels", g.labels}});
  j["records"] = ordered_json::array();
  for (const auto& rec : manifest.records) {
    ordered_json labels = ordered_json::object();
    ordered_json truth = ordered_json::object();
    for (const auto& g : manifest.groups) {
      if (rec.labels.count(g.name)) labels[g.name] = rec.labels.at(g.name);
      else labels[g.name] = nullptr;
      truth[g.name] = rec.truth.count(g.name) ? ordered_json(rec.truth.at(g.name))
                                              : ordered_json(kUnknownLabel);
    }
    j["records"].push_back({{"path", rec.path},
                            {"object", rec.object},
                            {"labels", labels},
                            {"truth", truth},
                            {"split", rec.split}});
  }
  return j;
}

}  // namespace

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_text_file_atomic(path, manifest_to_json(manifest).dump(2) + "\n");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  DatasetManifest manifest;
  manifest.version = j.at("version").get<std::string>();
  if (manifest.version != "1")
    throw std::runtime_error("manifest version '" + manifest.version + "' is not supported");
  manifest.canvas = j.at("canvas").get<int>();
  for (const auto& g : j.at("groups"))
    manifest.groups.push_back(
        {g.at("name").get<std::string>(), g.at("labels").get<std::vector<std::string>>()});
  for (const auto& r : j.at("records")) {
    ManifestRecord rec;
    rec.path = r.at("path").get<std::string>();
    rec.object = r.at("object").get<std::string>();
    for (const auto& [key, value] : r.at("labels").items())
      if (!value.is_null()) rec.labels[key] = value.get<std::string>();
    for (const auto& [key, value] : r.at("truth").items())
      rec.truth[key] = value.get<std::string>();
    rec.split = r.at("split").get<std::string>();
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

DatasetManifest ingest_crops(const std::filesystem::path& crops_dir,
                             const std::filesystem::path& labels_file, int n_augment,
                             const AugmentParams& params, RngStream& rng,
                             const std::filesystem::path& out_dir) {
  if (n_augment < 1) throw std::invalid_argument("ingest: need at least one augmentation");
  ordered_json spec;
  try {
    spec = ordered_json::parse(read_text_file(labels_file));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("labels file " + labels_file.string() + " is not valid JSON: " +
                             e.what());
  }

  DatasetManifest manifest;
  for (const auto& g : spec.at("groups"))
    manifest.groups.push_back(
        {g.at("name").get<std::string>(), g.at("labels").get<std::vector<std::string>>()});

  std::filesystem::create_directories(out_dir / "images");
  bool canvas_set = false;
  for (const auto& item : spec.at("items")) {
    const std::string file = item.at("file").get<std::string>();
    const auto crop_path = crops_dir / file;
    if (!std::filesystem::exists(crop_path))
      throw std::runtime_error("crop listed in labels file is missing: " + crop_path.string());
    auto crop = image_to_tensor(read_png(crop_path));
    if (!canvas_set) {
      if (crop->dim(1) != crop->dim(2))
        throw std::runtime_error("crop " + file + " is not square");
      manifest.canvas = crop->dim(1);
      canvas_set = true;
    } else if (crop->dim(1) != manifest.canvas || crop->dim(2) != manifest.canvas) {
      throw std::runtime_error("crop " + file + " is not " + std::to_string(manifest.canvas) +
                               "x" + std::to_string(manifest.canvas));
    }

    std::map<std::string, std::string> labels, truth;
    if (item.count("labels") && !item.at("labels").is_null())
      for (const auto& [key, value] : item.at("labels").items())
        labels[key] = value.get<std::string>();
    for (const auto& [key, value] : item.at("truth").items())
      truth[key] = value.get<std::string>();

    const std::string stem = std::filesystem::path(file).stem().string();
    auto copies = augment(*crop, n_augment, params, rng);
    for (std::size_t k = 0; k < copies.size(); ++k) {
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "_%04zu.png", k);
      const std::string rel = "images/" + stem + suffix;
      write_png(out_dir / rel, tensor_to_image(*copies[k]));
      ManifestRecord rec;
      rec.path = rel;
      rec.object = stem;
      rec.labels = labels;
      rec.truth = truth;
      manifest.records.push_back(std::move(rec));
    }
  }
  if (manifest.records.empty()) throw std::runtime_error("labels file lists no items");
  return manifest;
}

std::vector<LoadedObservation> load_split(const DatasetManifest& manifest,
                                          const std::filesystem::path& manifest_dir,
                                          const std::string& split) {
  std::vector<LoadedObservation> out;
  for (const auto& rec : manifest.records) {
    if (!split.empty() && rec.split != split) continue;
    LoadedObservation obs;
    obs.id = rec.path;
    obs.truth = rec.truth;
    obs.example.image = image_to_tensor(read_png(manifest_dir / rec.path));
    obs.example.labelled = !rec.labels.empty();
    if (obs.example.labelled) {
      for (const auto& g : manifest.groups) {
        const auto it = rec.labels.find(g.name);
        if (it == rec.labels.end())
          throw std::runtime_error("record " + rec.path + " lacks a '" + g.name + "' label");
        const auto pos = std::find(g.labels.begin(), g.labels.end(), it->second);
        if (pos == g.labels.end())
          throw std::runtime_error("record " + rec.path + " label '" + it->second +
                                   "' is outside group '" + g.name + "'");
        obs.example.label_indices.push_back(static_cast<int>(pos - g.labels.begin()));
      }
    }
    out.push_back(std::move(obs));
  }
  return out;
}

}  // namespace glatent
