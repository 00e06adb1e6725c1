#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "glatent/datasets.hpp"
#include "glatent/model.hpp"
#include "glatent/rng.hpp"

namespace glatent {

inline constexpr double kSigmaFloor = 1e-3;

struct LabelDistribution {
  std::string label;  // vocabulary label, or "unknown" for inserted entries
  double mu = 0;
  double sigma = kSigmaFloor;
  bool known = true;
};

struct GroupSymbols {
  std::string group;
  int axis = 0;  // wired latent dimension
  std::vector<LabelDistribution> entries;  // sorted by mu
};

struct SymbolTable {
  std::vector<GroupSymbols> groups;
};

// Sample mean and population standard deviation (floored) of 1D coordinates.
LabelDistribution fit_normal(const std::string& label, const std::vector<double>& coords);

// Fits one normal per (group, label) from the labelled observations: each
// observation is encoded once, one z is drawn, and coordinate i supports
// group i's label. Labels with fewer than 2 supports are an error.
SymbolTable fit_label_distributions(const ModelParams& params, const ModelConfig& config,
                                    const std::vector<LoadedObservation>& observations,
                                    RngStream& rng);

// Between every two mu-adjacent known entries, adds an unknown entry with
// the averaged mean and averaged sigma.
void insert_unknown_distributions(SymbolTable& table);

// Nearest distribution by |z - mu| / sigma. Exact ties prefer known over
// unknown, then the lower mu.
std::string classify_coordinate(const GroupSymbols& group, double z);

// Open-set prediction for every group, from the posterior mean coordinates.
std::map<std::string, std::string> classify(const Tensor& image, const ModelParams& params,
                                            const ModelConfig& config, const SymbolTable& table);

struct PredictionRecord {
  std::string id, group, predicted, truth;
};

std::vector<PredictionRecord> classify_batch(const std::vector<LoadedObservation>& observations,
                                             const ModelParams& params, const ModelConfig& config,
                                             const SymbolTable& table);

void save_symbol_table(const SymbolTable& table, const std::filesystem::path& path);
SymbolTable load_symbol_table(const std::filesystem::path& path);

std::string predictions_csv(const std::vector<PredictionRecord>& records);

}  // namespace glatent
