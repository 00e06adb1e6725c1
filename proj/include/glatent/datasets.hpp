#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "glatent/image.hpp"
#include "glatent/model.hpp"
#include "glatent/rng.hpp"

namespace glatent {

enum class SpriteShape { kSquare, kEllipse, kHeart };

std::string shape_name(SpriteShape shape);

struct SpriteSize {
  std::string name;  // small | medium | big
  int extent = 0;    // bounding-box side in pixels
};

struct SpriteColor {
  std::string name;     // red | green | blue | yellow
  char variant = 'a';   // 'a' base, 'b' darkened
  Rgb rgb{0, 0, 0};
};

struct SpriteSpec {
  int canvas = 100;
  std::vector<SpriteShape> shapes;
  std::vector<SpriteSize> sizes;
  std::vector<SpriteColor> colors;
  std::vector<std::pair<int, int>> positions;  // top-left offsets

  // 3 shapes x 3 sizes x 8 colors on an evenly spaced grid x grid layout.
  // canvas 100: extents 16/24/32, default grid 7; canvas 32: 10/15/20, grid 4.
  static SpriteSpec standard(int canvas, int grid = 0);
};

struct ManifestRecord {
  std::string path;    // relative to the manifest directory
  std::string object;  // stratification key, e.g. "heart_small_red_a"
  std::map<std::string, std::string> labels;  // empty map = unlabelled
  std::map<std::string, std::string> truth;   // label or "unknown" per group
  std::string split;   // "train" | "test" | "" before splitting
};

struct DatasetManifest {
  std::string version = "1";
  int canvas = 0;
  std::vector<ConceptGroup> groups;
  std::vector<ManifestRecord> records;
};

// Deterministic rasterization of one sprite on a black canvas.
Image render_sprite(SpriteShape shape, int extent, const Rgb& color, int x, int y, int canvas);

// Renders every (shape, size, color) object at every grid position into
// out_dir/images and returns a manifest without labels or split tags.
DatasetManifest generate_colored_dsprites(const SpriteSpec& spec,
                                          const std::filesystem::path& out_dir);

struct AugmentParams {
  int max_shift = 10;       // uniform integer shift per axis, zero-padded
  double noise_std = 0.02;  // per-value Gaussian noise, clamped to [0,1]
};

std::vector<TensorPtr> augment(const Tensor& crop, int n, const AugmentParams& params,
                               RngStream& rng);

// 80-20 style stratified split: floor(ratio*N) records go to train overall,
// spread across objects by largest remainder; every object keeps at least
// one record on each side.
void split_manifest(DatasetManifest& manifest, double ratio, RngStream& rng);

// exp1: color{red,blue} x size{small,big}, labels only on variant-a sprites;
// exp2: shape{square,heart} x size{small,big}. A record is labelled only
// when every group's label is utterable; everything else stays unlabelled
// with "unknown" ground truth where applicable.
void apply_experiment_labels(DatasetManifest& manifest, const std::string& preset);

// Reads pre-cropped PNGs listed in a JSON labels file, writes n augmented
// copies of each into out_dir/images, and returns the combined manifest.
DatasetManifest ingest_crops(const std::filesystem::path& crops_dir,
                             const std::filesystem::path& labels_file, int n_augment,
                             const AugmentParams& params, RngStream& rng,
                             const std::filesystem::path& out_dir);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

// One image pulled into memory with its training view and evaluation truth.
struct LoadedObservation {
  std::string id;  // record path
  TrainingExample example;
  std::map<std::string, std::string> truth;
};

std::vector<LoadedObservation> load_split(const DatasetManifest& manifest,
                                          const std::filesystem::path& manifest_dir,
                                          const std::string& split);

}  // namespace glatent
