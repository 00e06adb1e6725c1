#include "glatent/experiment.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "glatent/datasets.hpp"
#include "glatent/diagnostics.hpp"
#include "glatent/grounding.hpp"
#include "glatent/training.hpp"
#include "glatent/util.hpp"

namespace glatent {

using ordered_json = nlohmann::ordered_json;

ExperimentPreset ExperimentPreset::get(const std::string& name) {
  ExperimentPreset p;
  p.name = name;
  if (name == "exp1") {
    p.groups = {{"color", {"red", "blue"}}, {"size", {"small", "big"}}};
    p.beta = 30;
  } else if (name == "exp2") {
    p.groups = {{"shape", {"square", "heart"}}, {"size", {"small", "big"}}};
    p.beta = 30;
  } else if (name == "exp3") {
    p.groups = {{"color", {"red", "yellow", "blue"}}, {"object_type", {"juggle_ball", "orb"}}};
    p.beta = 10;
    p.synthetic = false;
  } else {
    throw std::invalid_argument("unknown experiment preset: " + name);
  }
  return p;
}

const std::vector<std::string>& ExperimentPreset::names() {
  static const std::vector<std::string> names = {"exp1", "exp2", "exp3"};
  return names;
}

void RunConfig::validate() const {
  ExperimentPreset::get(preset);
  if (variant != "full" && variant != "beta_vae" && variant != "classifier_only")
    throw std::invalid_argument("variant '" + variant +
                                "' is not one of full, beta_vae, classifier_only");
  if (epochs != -1 && epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  for (const auto& [name, w] : {std::pair<const char*, double>{"alpha", alpha},
                                {"beta", beta},
                                {"gamma", gamma}})
    if (w != -1 && w < 0)
      throw std::invalid_argument(std::string(name) + " must be non-negative");
  if (grid != -1 && grid < 1) throw std::invalid_argument("grid must be at least 1");
}

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& expected) {
  throw std::invalid_argument("config field '" + field + "': expected " + expected);
}

}  // namespace

RunConfig parse_config_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");

  RunConfig config;
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") {
      if (!value.is_string()) config_error(key, "a string");
      config.preset = value.get<std::string>();
    } else if (key == "variant") {
      if (!value.is_string()) config_error(key, "a string");
      config.variant = value.get<std::string>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) config_error(key, "a non-negative integer");
      config.seed = value.get<std::uint64_t>();
    } else if (key == "epochs") {
      if (!value.is_number_integer()) config_error(key, "an integer");
      config.epochs = value.get<int>();
    } else if (key == "batch_size") {
      if (!value.is_number_integer()) config_error(key, "an integer");
      config.batch_size = value.get<int>();
    } else if (key == "alpha" || key == "beta" || key == "gamma") {
      if (!value.is_number()) config_error(key, "a number");
      const double w = value.get<double>();
      if (key == "alpha") config.alpha = w;
      else if (key == "beta") config.beta = w;
      else config.gamma = w;
    } else if (key == "desk") {
      if (!value.is_boolean()) config_error(key, "a boolean");
      config.desk = value.get<bool>();
    } else if (key == "grid") {
      if (!value.is_number_integer()) config_error(key, "an integer");
      config.grid = value.get<int>();
    } else if (key == "crops_dir") {
      if (!value.is_string()) config_error(key, "a string");
      config.crops_dir = value.get<std::string>();
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  config.validate();
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  return parse_config_json(read_text_file(path));
}

ResolvedRun resolve_run(const RunConfig& config) {
  config.validate();
  ResolvedRun r;
  r.run = config;
  r.preset = ExperimentPreset::get(config.preset);
  r.alpha = config.alpha == -1 ? r.preset.alpha : config.alpha;
  r.beta = config.beta == -1 ? r.preset.beta : config.beta;
  r.gamma = config.gamma == -1 ? r.preset.gamma : config.gamma;
  if (config.variant == "beta_vae") r.gamma = 0;
  if (config.variant == "classifier_only") r.alpha = 0;
  r.canvas = config.desk ? 32 : r.preset.canvas;
  r.epochs = config.epochs != -1 ? config.epochs : (config.desk ? 50 : 200);
  r.grid = config.grid != -1 ? config.grid : (r.canvas == 32 ? 4 : 7);
  return r;
}

namespace {

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hash_config(const ResolvedRun& r) {
  ordered_json j;
  j["preset"] = r.preset.name;
  j["variant"] = r.run.variant;
  j["seed"] = r.run.seed;
  j["epochs"] = r.epochs;
  j["batch_size"] = r.run.batch_size;
  j["alpha"] = r.alpha;
  j["beta"] = r.beta;
  j["gamma"] = r.gamma;
  j["canvas"] = r.canvas;
  j["grid"] = r.grid;
  j["latent_size"] = r.preset.latent_size;
  return git_blob_sha1(j.dump());
}

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error("stage '" + name + "' failed: " + e.what());
  }
}

}  // namespace

void save_run_record(const RunRecord& record, const std::filesystem::path& path) {
  ordered_json j;
  j["preset"] = record.preset;
  j["variant"] = record.variant;
  j["seed"] = record.seed;
  j["config_hash"] = record.config_hash;
  j["started"] = record.started;
  j["finished"] = record.finished;
  j["artifacts"] = {{"manifest", record.manifest},
                    {"checkpoint", record.checkpoint},
                    {"symbol_table", record.symbol_table},
                    {"predictions", record.predictions},
                    {"reports_dir", record.reports_dir}};
  write_text_file_atomic(path, j.dump(2) + "\n");
}

RunRecord load_run_record(const std::filesystem::path& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("run record " + path.string() + " is not valid JSON: " + e.what());
  }
  RunRecord r;
  r.preset = j.at("preset").get<std::string>();
  r.variant = j.at("variant").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.started = j.at("started").get<std::string>();
  r.finished = j.at("finished").get<std::string>();
  const auto& a = j.at("artifacts");
  r.manifest = a.at("manifest").get<std::string>();
  r.checkpoint = a.at("checkpoint").get<std::string>();
  r.symbol_table = a.at("symbol_table").get<std::string>();
  r.predictions = a.at("predictions").get<std::string>();
  r.reports_dir = a.at("reports_dir").get<std::string>();
  return r;
}

RunRecord run_experiment(const RunConfig& config, const std::filesystem::path& out_dir) {
  const ResolvedRun r = resolve_run(config);
  std::filesystem::create_directories(out_dir);

  RunRecord record;
  record.preset = r.preset.name;
  record.variant = config.variant;
  record.seed = config.seed;
  record.config_hash = hash_config(r);
  record.started = iso_now();

  const auto dataset_dir = out_dir / "dataset";
  const auto manifest_path = dataset_dir / "manifest.json";

  DatasetManifest manifest = stage("dataset", [&] {
    DatasetManifest m;
    if (r.preset.synthetic) {
      m = generate_colored_dsprites(SpriteSpec::standard(r.canvas, r.grid), dataset_dir);
      apply_experiment_labels(m, r.preset.name);
    } else {
      if (config.crops_dir.empty())
        throw std::invalid_argument("preset exp3 needs crops_dir pointing at the object crops");
      const std::filesystem::path crops(config.crops_dir);
      RngStream aug_rng(derive_seed(config.seed, "ingest"));
      m = ingest_crops(crops, crops / "labels.json", 500, AugmentParams{}, aug_rng, dataset_dir);
      if (m.canvas != r.canvas)
        throw std::invalid_argument("crops are " + std::to_string(m.canvas) + "x" +
                                    std::to_string(m.canvas) + " but this run expects " +
                                    std::to_string(r.canvas) + "x" + std::to_string(r.canvas));
    }
    RngStream split_rng(derive_seed(config.seed, "split"));
    split_manifest(m, 0.8, split_rng);
    save_manifest(m, manifest_path);
    return m;
  });
  record.manifest = manifest_path.string();

  ModelConfig model_config;
  model_config.latent_size = r.preset.latent_size;
  model_config.groups = manifest.groups;
  model_config.alpha = r.alpha;
  model_config.beta = r.beta;
  model_config.gamma = r.gamma;
  model_config.arch = ModelArch::for_canvas(r.canvas);

  const auto ckpt_path = out_dir / "model.ckpt";
  auto train_split = stage("load-train", [&] { return load_split(manifest, dataset_dir, "train"); });

  ModelParams params = stage("train", [&] {
    RngStream init_rng(derive_seed(config.seed, "init"));
    ModelParams p = init_params(model_config, init_rng);
    TrainConfig train_config;
    train_config.epochs = r.epochs;
    train_config.batch_size = config.batch_size;
    train_config.seed = config.seed;
    AdamState adam = AdamState::zeros_like(p);
    RngStream train_rng(derive_seed(config.seed, "train"));
    std::vector<TrainingExample> examples;
    examples.reserve(train_split.size());
    for (const auto& obs : train_split) examples.push_back(obs.example);
    const auto trace = train(p, examples, model_config, train_config, train_rng, adam,
                             [&](int epoch, const EpochLoss& l) {
                               if (epoch == 1 || epoch % 10 == 0 || epoch == r.epochs)
                                 std::cerr << "epoch " << epoch << "/" << r.epochs << " total "
                                           << l.total << "\n";
                             });
    Checkpoint ckpt{model_config, train_config, p, adam, r.epochs, train_rng.serialize(), trace};
    save_checkpoint(ckpt_path, ckpt);
    write_text_file_atomic(out_dir / "loss.csv", loss_trace_csv(trace));
    return p;
  });
  record.checkpoint = ckpt_path.string();

  const auto table_path = out_dir / "symbols.json";
  SymbolTable table = stage("fit-symbols", [&] {
    RngStream fit_rng(derive_seed(config.seed, "fit-symbols"));
    SymbolTable t = fit_label_distributions(params, model_config, train_split, fit_rng);
    insert_unknown_distributions(t);
    save_symbol_table(t, table_path);
    return t;
  });
  record.symbol_table = table_path.string();

  auto test_split = stage("load-test", [&] { return load_split(manifest, dataset_dir, "test"); });

  const auto predictions_path = out_dir / "predictions.csv";
  auto predictions = stage("classify", [&] {
    auto preds = classify_batch(test_split, params, model_config, table);
    write_text_file_atomic(predictions_path, predictions_csv(preds));
    return preds;
  });
  record.predictions = predictions_path.string();

  const auto reports_dir = out_dir / "reports";
  stage("diagnose", [&] {
    const auto alignment = alignment_report(params, model_config, test_split);
    const auto f1 = f1_scores(predictions, model_config.groups);
    render_reports(alignment, f1, reports_dir);
    return 0;
  });
  record.reports_dir = reports_dir.string();

  record.finished = iso_now();
  save_run_record(record, out_dir / "run.json");
  return record;
}

namespace {

std::map<std::string, std::string> read_csv_map(const std::filesystem::path& path,
                                                int key_cols, int value_col) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
      if (i == line.size() || line[i] == ',') {
        cols.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    if (static_cast<int>(cols.size()) <= value_col) continue;
    std::string key;
    for (int k = 0; k < key_cols; ++k) key += (k ? "/" : "") + cols[static_cast<std::size_t>(k)];
    out[key] = cols[static_cast<std::size_t>(value_col)];
  }
  return out;
}

}  // namespace

std::string compare_runs(const std::vector<std::filesystem::path>& record_paths) {
  if (record_paths.size() < 2)
    throw std::invalid_argument("compare-runs needs at least two run records");
  std::vector<RunRecord> records;
  for (const auto& p : record_paths) records.push_back(load_run_record(p));
  for (const auto& r : records)
    if (r.preset != records[0].preset)
      throw std::invalid_argument("cannot compare runs over different presets: '" +
                                  records[0].preset + "' vs '" + r.preset + "'");

  // Column layout comes from the first run's f1 table; all runs share the
  // preset so the label sets agree.
  std::vector<std::string> f1_keys;
  {
    const auto first = read_csv_map(records[0].reports_dir + "/f1.csv", 2, 4);
    for (const auto& [key, value] : first) f1_keys.push_back(key);
  }

  std::string out = "variant,seed,E";
  for (const auto& key : f1_keys) out += ",f1:" + key;
  out += "\n";
  for (const auto& r : records) {
    const auto f1 = read_csv_map(std::filesystem::path(r.reports_dir) / "f1.csv", 2, 4);
    const auto entropy = read_csv_map(std::filesystem::path(r.reports_dir) / "entropy.csv", 2, 2);
    out += r.variant + "," + std::to_string(r.seed);
    const auto avg = entropy.find("all/average");
    out += "," + (avg == entropy.end() ? std::string("?") : avg->second);
    for (const auto& key : f1_keys) {
      const auto it = f1.find(key);
      if (it == f1.end())
        throw std::invalid_argument("run '" + r.variant + "' lacks an F1 entry for " + key);
      out += "," + it->second;
    }
    out += "\n";
  }
  return out;
}

}  // namespace glatent
