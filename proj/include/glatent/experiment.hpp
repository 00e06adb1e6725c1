#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glatent/model.hpp"

namespace glatent {

struct ExperimentPreset {
  std::string name;  // exp1 | exp2 | exp3
  std::vector<ConceptGroup> groups;
  double alpha = 1.0, beta = 30.0, gamma = 10000.0;
  int latent_size = 4;
  int canvas = 100;
  bool synthetic = true;  // exp3 ingests real crops instead

  static ExperimentPreset get(const std::string& name);
  static const std::vector<std::string>& names();
};

// A fully resolved run configuration. Fields left at their sentinel values
// in a config file fall back to the preset defaults.
struct RunConfig {
  std::string preset = "exp1";
  std::string variant = "full";  // full | beta_vae | classifier_only
  std::uint64_t seed = 0;
  int epochs = -1;      // -1: 200, or 50 under desk
  int batch_size = 32;
  double alpha = -1, beta = -1, gamma = -1;  // -1: preset defaults
  bool desk = false;    // 32x32 architecture and canvas
  int grid = -1;        // -1: 7 (canvas 100) or 4 (canvas 32)
  std::string crops_dir;  // exp3 input

  void validate() const;
};

// Strict JSON parsing: unknown keys and wrong types are rejected with the
// offending field named. Missing keys keep their defaults.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_json(const std::string& text);

struct ResolvedRun {
  RunConfig run;
  ExperimentPreset preset;
  double alpha = 0, beta = 0, gamma = 0;  // after variant zeroing
  int epochs = 0;
  int canvas = 0;
  int grid = 0;
};

ResolvedRun resolve_run(const RunConfig& config);

struct RunRecord {
  std::string preset, variant;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string started, finished;  // ISO-8601 UTC
  std::string manifest, checkpoint, symbol_table, predictions, reports_dir;
};

void save_run_record(const RunRecord& record, const std::filesystem::path& path);
RunRecord load_run_record(const std::filesystem::path& path);

// dataset -> train -> fit-symbols -> classify -> diagnose, all under
// out_dir; any stage failure is rethrown with the stage name prefixed.
RunRecord run_experiment(const RunConfig& config, const std::filesystem::path& out_dir);

// Side-by-side per-label F1 and per-run E for >= 2 runs of one preset.
std::string compare_runs(const std::vector<std::filesystem::path>& record_paths);

}  // namespace glatent
