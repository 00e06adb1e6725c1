#include "glatent/grounding.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "glatent/util.hpp"

namespace glatent {

using ordered_json = nlohmann::ordered_json;

LabelDistribution fit_normal(const std::string& label, const std::vector<double>& coords) {
  if (coords.size() < 2)
    throw std::invalid_argument("label '" + label + "' has only " +
                                std::to_string(coords.size()) +
                                " supporting observations; need at least 2");
  double mean = 0;
  for (double c : coords) mean += c;
  mean /= static_cast<double>(coords.size());
  double var = 0;
  for (double c : coords) var += (c - mean) * (c - mean);
  var /= static_cast<double>(coords.size());
  LabelDistribution dist;
  dist.label = label;
  dist.mu = mean;
  dist.sigma = std::max(std::sqrt(var), kSigmaFloor);
  dist.known = true;
  return dist;
}

SymbolTable fit_label_distributions(const ModelParams& params, const ModelConfig& config,
                                    const std::vector<LoadedObservation>& observations,
                                    RngStream& rng) {
  config.validate();
  const int n_groups = static_cast<int>(config.groups.size());

  // coords[group][label] accumulates one sampled coordinate per labelled
  // observation, in observation order.
  std::vector<std::vector<std::vector<double>>> coords(static_cast<std::size_t>(n_groups));
  for (int g = 0; g < n_groups; ++g)
    coords[static_cast<std::size_t>(g)].resize(config.groups[static_cast<std::size_t>(g)].labels.size());

  for (const auto& obs : observations) {
    if (!obs.example.labelled) continue;
    std::vector<double> mu, lv;
    encode_values(*obs.example.image, params, config, mu, lv);
    std::vector<double> z(mu.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      z[i] = mu[i] + std::exp(0.5 * lv[i]) * rng.normal();
    for (int g = 0; g < n_groups; ++g) {
      const int li = obs.example.label_indices[static_cast<std::size_t>(g)];
      coords[static_cast<std::size_t>(g)][static_cast<std::size_t>(li)].push_back(
          z[static_cast<std::size_t>(g)]);
    }
  }

  SymbolTable table;
  for (int g = 0; g < n_groups; ++g) {
    const auto& group = config.groups[static_cast<std::size_t>(g)];
    GroupSymbols symbols;
    symbols.group = group.name;
    symbols.axis = g;
    for (std::size_t li = 0; li < group.labels.size(); ++li)
      symbols.entries.push_back(
          fit_normal(group.labels[li], coords[static_cast<std::size_t>(g)][li]));
    std::stable_sort(symbols.entries.begin(), symbols.entries.end(),
                     [](const LabelDistribution& a, const LabelDistribution& b) {
                       return a.mu < b.mu;
                     });
    table.groups.push_back(std::move(symbols));
  }
  return table;
}

void insert_unknown_distributions(SymbolTable& table) {
  for (auto& group : table.groups) {
    std::vector<LabelDistribution> known;
    for (const auto& e : group.entries)
      if (e.known) known.push_back(e);
    std::stable_sort(known.begin(), known.end(),
                     [](const LabelDistribution& a, const LabelDistribution& b) {
                       return a.mu < b.mu;
                     });
    if (known.size() < 2)
      std::cerr << "warning: group '" << group.group
                << "' has fewer than two known labels; nothing can be classified as unknown\n";
    std::vector<LabelDistribution> merged;
    for (std::size_t i = 0; i < known.size(); ++i) {
      merged.push_back(known[i]);
      if (i + 1 < known.size()) {
        LabelDistribution u;
        u.label = kUnknownLabel;
        u.mu = 0.5 * (known[i].mu + known[i + 1].mu);
        u.sigma = 0.5 * (known[i].sigma + known[i + 1].sigma);
        u.known = false;
        merged.push_back(std::move(u));
      }
    }
    group.entries = std::move(merged);
  }
}

std::string classify_coordinate(const GroupSymbols& group, double z) {
  if (group.entries.empty())
    throw std::invalid_argument("group '" + group.group + "' has an empty symbol table");
  const LabelDistribution* best = nullptr;
  double best_distance = 0;
  for (const auto& e : group.entries) {
    const double d = std::abs(z - e.mu) / e.sigma;
    bool better = false;
    if (!best || d < best_distance) {
      better = true;
    } else if (d == best_distance) {
      if (e.known != best->known) better = e.known;  // known beats unknown
      else better = e.mu < best->mu;
    }
    if (better) {
      best = &e;
      best_distance = d;
    }
  }
  return best->known ? best->label : kUnknownLabel;
}

std::map<std::string, std::string> classify(const Tensor& image, const ModelParams& params,
                                            const ModelConfig& config, const SymbolTable& table) {
  if (table.groups.empty()) throw std::invalid_argument("classify: empty symbol table");
  std::vector<double> mu, lv;
  encode_values(image, params, config, mu, lv);
  std::map<std::string, std::string> out;
  for (const auto& group : table.groups) {
    if (group.axis < 0 || group.axis >= static_cast<int>(mu.size()))
      throw std::invalid_argument("group '" + group.group + "' points at latent axis " +
                                  std::to_string(group.axis) + " outside the posterior");
    out[group.group] = classify_coordinate(group, mu[static_cast<std::size_t>(group.axis)]);
  }
  return out;
}

std::vector<PredictionRecord> classify_batch(const std::vector<LoadedObservation>& observations,
                                             const ModelParams& params, const ModelConfig& config,
                                             const SymbolTable& table) {
  std::vector<PredictionRecord> out;
  for (const auto& obs : observations) {
    auto predicted = classify(*obs.example.image, params, config, table);
    for (const auto& group : table.groups) {
      PredictionRecord rec;
      rec.id = obs.id;
      rec.group = group.group;
      rec.predicted = predicted.at(group.group);
      const auto it = obs.truth.find(group.group);
      rec.truth = it == obs.truth.end() ? kUnknownLabel : it->second;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

void save_symbol_table(const SymbolTable& table, const std::filesystem::path& path) {
  ordered_json j;
  j["groups"] = ordered_json::array();
  for (const auto& group : table.groups) {
    ordered_json entries = ordered_json::array();
    for (const auto& e : group.entries)
      entries.push_back({{"label", e.label},
                         {"mu", e.mu},
                         {"sigma", e.sigma},
                         {"kind", e.known ? "known" : "unknown"}});
    j["groups"].push_back({{"name", group.group}, {"axis", group.axis}, {"entries", entries}});
  }
  write_text_file_atomic(path, j.dump(2) + "\n");
}

SymbolTable load_symbol_table(const std::filesystem::path& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("symbol table " + path.string() + " is not valid JSON: " + e.what());
  }
  SymbolTable table;
  for (const auto& g : j.at("groups")) {
    GroupSymbols group;
    group.group = g.at("name").get<std::string>();
    group.axis = g.at("axis").get<int>();
    for (const auto& e : g.at("entries")) {
      LabelDistribution dist;
      dist.label = e.at("label").get<std::string>();
      dist.mu = e.at("mu").get<double>();
      dist.sigma = e.at("sigma").get<double>();
      const std::string kind = e.at("kind").get<std::string>();
      if (kind != "known" && kind != "unknown")
        throw std::runtime_error("symbol table entry kind '" + kind + "' is invalid");
      dist.known = kind == "known";
      group.entries.push_back(std::move(dist));
    }
    table.groups.push_back(std::move(group));
  }
  return table;
}

std::string predictions_csv(const std::vector<PredictionRecord>& records) {
  std::string out = "id,group,predicted,truth\n";
  for (const auto& r : records)
    out += r.id + "," + r.group + "," + r.predicted + "," + r.truth + "\n";
  return out;
}

}  // namespace glatent
