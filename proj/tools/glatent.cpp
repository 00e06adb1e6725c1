#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "glatent/datasets.hpp"
#include "glatent/diagnostics.hpp"
#include "glatent/experiment.hpp"
#include "glatent/grounding.hpp"
#include "glatent/training.hpp"
#include "glatent/util.hpp"

namespace {

using namespace glatent;

std::uint64_t effective_seed(std::uint64_t cli_seed) {
  const char* env = std::getenv("GL_SEED");
  if (!env || !*env) return cli_seed;
  char* end = nullptr;
  const unsigned long long parsed = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0')
    throw std::invalid_argument(std::string("GL_SEED is not an unsigned integer: ") + env);
  return parsed;
}

void cmd_gen_sprites(const std::string& out, const std::string& preset, std::uint64_t seed,
                     int canvas, int grid) {
  seed = effective_seed(seed);
  const std::filesystem::path out_dir(out);
  auto manifest = generate_colored_dsprites(SpriteSpec::standard(canvas, grid), out_dir);
  apply_experiment_labels(manifest, preset);
  RngStream split_rng(derive_seed(seed, "split"));
  split_manifest(manifest, 0.8, split_rng);
  save_manifest(manifest, out_dir / "manifest.json");
  std::size_t train = 0;
  for (const auto& r : manifest.records) train += r.split == "train";
  std::cout << "wrote " << manifest.records.size() << " images (" << train << " train, "
            << manifest.records.size() - train << " test) under " << out_dir.string() << "\n";
}

void cmd_ingest(const std::string& crops, const std::string& labels, int n_augment,
                std::uint64_t seed, const std::string& out) {
  seed = effective_seed(seed);
  const std::filesystem::path out_dir(out);
  RngStream aug_rng(derive_seed(seed, "ingest"));
  auto manifest = ingest_crops(crops, labels, n_augment, AugmentParams{}, aug_rng, out_dir);
  RngStream split_rng(derive_seed(seed, "split"));
  split_manifest(manifest, 0.8, split_rng);
  save_manifest(manifest, out_dir / "manifest.json");
  std::cout << "ingested " << manifest.records.size() << " records under " << out_dir.string()
            << "\n";
}

void cmd_train(const std::string& manifest_path, const std::string& preset_name, double alpha,
               double beta, double gamma, int epochs, int batch_size, std::uint64_t seed,
               int latent, const std::string& out) {
  seed = effective_seed(seed);
  const auto preset = ExperimentPreset::get(preset_name);
  const auto manifest = load_manifest(manifest_path);
  const auto manifest_dir = std::filesystem::path(manifest_path).parent_path();

  ModelConfig config;
  config.latent_size = latent > 0 ? latent : preset.latent_size;
  config.groups = manifest.groups;
  config.alpha = alpha >= 0 ? alpha : preset.alpha;
  config.beta = beta >= 0 ? beta : preset.beta;
  config.gamma = gamma >= 0 ? gamma : preset.gamma;
  config.arch = ModelArch::for_canvas(manifest.canvas);

  TrainConfig train_config;
  train_config.epochs = epochs;
  train_config.batch_size = batch_size;
  train_config.seed = seed;

  auto observations = load_split(manifest, manifest_dir, "train");
  if (observations.empty()) throw std::runtime_error("manifest has no train split");
  std::vector<TrainingExample> examples;
  examples.reserve(observations.size());
  for (const auto& obs : observations) examples.push_back(obs.example);

  RngStream init_rng(derive_seed(seed, "init"));
  ModelParams params = init_params(config, init_rng);
  AdamState adam = AdamState::zeros_like(params);
  RngStream train_rng(derive_seed(seed, "train"));
  const auto trace = train(params, examples, config, train_config, train_rng, adam,
                           [&](int epoch, const EpochLoss& l) {
                             if (epoch == 1 || epoch % 10 == 0 || epoch == train_config.epochs)
                               std::cerr << "epoch " << epoch << "/" << train_config.epochs
                                         << " total " << l.total << " kl " << l.kl << " recon "
                                         << l.recon << " cls " << l.cls << "\n";
                           });

  Checkpoint ckpt{config, train_config, params, adam, train_config.epochs,
                  train_rng.serialize(), trace};
  save_checkpoint(out, ckpt);
  write_text_file_atomic(out + ".loss.csv", loss_trace_csv(trace));
  std::cout << "saved checkpoint " << out << " and loss trace " << out << ".loss.csv\n";
}

void cmd_fit_symbols(const std::string& ckpt_path, const std::string& manifest_path,
                     std::int64_t seed_flag, const std::string& out) {
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto manifest = load_manifest(manifest_path);
  const auto manifest_dir = std::filesystem::path(manifest_path).parent_path();
  const std::uint64_t seed =
      effective_seed(seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag)
                                    : ckpt.train_config.seed);
  auto observations = load_split(manifest, manifest_dir, "train");
  RngStream rng(derive_seed(seed, "fit-symbols"));
  auto table = fit_label_distributions(ckpt.params, ckpt.config, observations, rng);
  insert_unknown_distributions(table);
  save_symbol_table(table, out);
  std::cout << "saved symbol table " << out << "\n";
}

void cmd_classify(const std::string& ckpt_path, const std::string& table_path,
                  const std::string& manifest_path, const std::string& split,
                  const std::string& out) {
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto table = load_symbol_table(table_path);
  const auto manifest = load_manifest(manifest_path);
  const auto manifest_dir = std::filesystem::path(manifest_path).parent_path();
  auto observations = load_split(manifest, manifest_dir, split);
  if (observations.empty()) throw std::runtime_error("split '" + split + "' is empty");
  const auto predictions = classify_batch(observations, ckpt.params, ckpt.config, table);
  write_text_file_atomic(out, predictions_csv(predictions));
  std::cout << "wrote " << predictions.size() << " predictions to " << out << "\n";
}

void cmd_diagnose(const std::string& ckpt_path, const std::string& table_path,
                  const std::string& manifest_path, const std::string& out) {
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto table = load_symbol_table(table_path);
  const auto manifest = load_manifest(manifest_path);
  const auto manifest_dir = std::filesystem::path(manifest_path).parent_path();
  auto observations = load_split(manifest, manifest_dir, "test");
  if (observations.empty()) throw std::runtime_error("test split is empty");
  const auto alignment = alignment_report(ckpt.params, ckpt.config, observations);
  const auto predictions = classify_batch(observations, ckpt.params, ckpt.config, table);
  const auto f1 = f1_scores(predictions, ckpt.config.groups);
  render_reports(alignment, f1, out);
  std::cout << "wrote reports under " << out << "\n";
}

void cmd_run_experiment(RunConfig config, const std::string& config_file,
                        const std::string& out) {
  if (!config_file.empty()) {
    RunConfig from_file = parse_config(config_file);
    // Explicit command-line values were already folded into `config`;
    // file values win only where the command line kept the defaults.
    const RunConfig defaults;
    if (config.preset == defaults.preset) config.preset = from_file.preset;
    if (config.variant == defaults.variant) config.variant = from_file.variant;
    if (config.seed == defaults.seed) config.seed = from_file.seed;
    if (config.epochs == defaults.epochs) config.epochs = from_file.epochs;
    if (config.batch_size == defaults.batch_size) config.batch_size = from_file.batch_size;
    if (config.alpha == defaults.alpha) config.alpha = from_file.alpha;
    if (config.beta == defaults.beta) config.beta = from_file.beta;
    if (config.gamma == defaults.gamma) config.gamma = from_file.gamma;
    if (config.desk == defaults.desk) config.desk = from_file.desk;
    if (config.grid == defaults.grid) config.grid = from_file.grid;
    if (config.crops_dir.empty()) config.crops_dir = from_file.crops_dir;
  }
  config.seed = effective_seed(config.seed);
  const auto record = run_experiment(config, out);
  std::cout << "run complete: " << (std::filesystem::path(out) / "run.json").string() << "\n";
  std::cout << "reports: " << record.reports_dir << "\n";
}

void cmd_compare_runs(const std::vector<std::string>& records, const std::string& out) {
  std::vector<std::filesystem::path> paths(records.begin(), records.end());
  const std::string csv = compare_runs(paths);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text_file_atomic(out, csv);
    std::cout << "wrote comparison to " << out << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly supervised symbol grounding workbench"};
  app.require_subcommand(1);
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "emit machine-readable errors on stderr");

  // gen-sprites
  std::string gen_out, gen_preset = "exp1";
  std::uint64_t gen_seed = 0;
  int gen_canvas = 100, gen_grid = 0;
  auto* gen = app.add_subcommand("gen-sprites", "generate the colored sprite corpus");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--preset", gen_preset, "labelling preset")
      ->check(CLI::IsMember({"exp1", "exp2"}));
  gen->add_option("--seed", gen_seed, "split seed");
  gen->add_option("--canvas", gen_canvas, "canvas size")->check(CLI::IsMember({100, 32}));
  gen->add_option("--grid", gen_grid, "positions per axis (0 = canvas default)");
  gen->callback([&] { cmd_gen_sprites(gen_out, gen_preset, gen_seed, gen_canvas, gen_grid); });

  // ingest
  std::string ing_crops, ing_labels, ing_out;
  int ing_augment = 500;
  std::uint64_t ing_seed = 0;
  auto* ing = app.add_subcommand("ingest", "augment pre-cropped object images");
  ing->add_option("--crops", ing_crops, "directory of PNG crops")->required();
  ing->add_option("--labels", ing_labels, "JSON labels file")->required();
  ing->add_option("--augment", ing_augment, "copies per crop");
  ing->add_option("--seed", ing_seed, "augmentation/split seed");
  ing->add_option("--out", ing_out, "output directory")->required();
  ing->callback([&] { cmd_ingest(ing_crops, ing_labels, ing_augment, ing_seed, ing_out); });

  // train
  std::string tr_manifest, tr_preset = "exp1", tr_out;
  double tr_alpha = -1, tr_beta = -1, tr_gamma = -1;
  int tr_epochs = 200, tr_batch = 32, tr_latent = 0;
  std::uint64_t tr_seed = 0;
  auto* tr = app.add_subcommand("train", "optimize the model on a manifest's train split");
  tr->add_option("--manifest", tr_manifest, "dataset manifest")->required();
  tr->add_option("--preset", tr_preset, "weight preset")
      ->check(CLI::IsMember({"exp1", "exp2", "exp3"}));
  tr->add_option("--alpha", tr_alpha, "reconstruction weight (-1 = preset)");
  tr->add_option("--beta", tr_beta, "KL weight (-1 = preset)");
  tr->add_option("--gamma", tr_gamma, "classification weight (-1 = preset)");
  tr->add_option("--epochs", tr_epochs, "training epochs");
  tr->add_option("--batch-size", tr_batch, "batch size");
  tr->add_option("--latent", tr_latent, "latent dimensions (0 = preset)");
  tr->add_option("--seed", tr_seed, "training seed");
  tr->add_option("--out", tr_out, "checkpoint path")->required();
  tr->callback([&] {
    cmd_train(tr_manifest, tr_preset, tr_alpha, tr_beta, tr_gamma, tr_epochs, tr_batch, tr_seed,
              tr_latent, tr_out);
  });

  // fit-symbols
  std::string fs_ckpt, fs_manifest, fs_out;
  std::int64_t fs_seed = -1;
  auto* fs = app.add_subcommand("fit-symbols", "fit per-label normals along assigned axes");
  fs->add_option("--ckpt", fs_ckpt, "trained checkpoint")->required();
  fs->add_option("--manifest", fs_manifest, "dataset manifest")->required();
  fs->add_option("--seed", fs_seed, "sampling seed (-1 = checkpoint seed)");
  fs->add_option("--out", fs_out, "symbol table path")->required();
  fs->callback([&] { cmd_fit_symbols(fs_ckpt, fs_manifest, fs_seed, fs_out); });

  // classify
  std::string cl_ckpt, cl_table, cl_manifest, cl_split = "test", cl_out;
  auto* cl = app.add_subcommand("classify", "open-set symbol prediction over a split");
  cl->add_option("--ckpt", cl_ckpt, "trained checkpoint")->required();
  cl->add_option("--table", cl_table, "symbol table")->required();
  cl->add_option("--manifest", cl_manifest, "dataset manifest")->required();
  cl->add_option("--split", cl_split, "manifest split")->check(CLI::IsMember({"train", "test"}));
  cl->add_option("--out", cl_out, "predictions CSV path")->required();
  cl->callback([&] { cmd_classify(cl_ckpt, cl_table, cl_manifest, cl_split, cl_out); });

  // diagnose
  std::string dg_ckpt, dg_table, dg_manifest, dg_out;
  auto* dg = app.add_subcommand("diagnose", "alignment entropy and F1 reports");
  dg->add_option("--ckpt", dg_ckpt, "trained checkpoint")->required();
  dg->add_option("--table", dg_table, "symbol table")->required();
  dg->add_option("--manifest", dg_manifest, "dataset manifest")->required();
  dg->add_option("--out", dg_out, "report directory")->required();
  dg->callback([&] { cmd_diagnose(dg_ckpt, dg_table, dg_manifest, dg_out); });

  // run-experiment
  RunConfig run_config;
  std::string re_config_file, re_out;
  auto* re = app.add_subcommand("run-experiment", "dataset through reports in one invocation");
  re->add_option("--preset", run_config.preset, "experiment preset")
      ->check(CLI::IsMember({"exp1", "exp2", "exp3"}));
  re->add_option("--variant", run_config.variant, "full | beta_vae | classifier_only")
      ->check(CLI::IsMember({"full", "beta_vae", "classifier_only"}));
  re->add_option("--seed", run_config.seed, "master seed");
  re->add_option("--epochs", run_config.epochs, "epochs (-1 = preset default)");
  re->add_option("--batch-size", run_config.batch_size, "batch size");
  re->add_option("--alpha", run_config.alpha, "reconstruction weight (-1 = preset)");
  re->add_option("--beta", run_config.beta, "KL weight (-1 = preset)");
  re->add_option("--gamma", run_config.gamma, "classification weight (-1 = preset)");
  re->add_flag("--desk", run_config.desk, "32x32 architecture and reduced epochs");
  re->add_option("--grid", run_config.grid, "positions per axis (-1 = canvas default)");
  re->add_option("--crops", run_config.crops_dir, "crop directory for exp3");
  re->add_option("--config", re_config_file, "JSON config file");
  re->add_option("--out", re_out, "run directory")->required();
  re->callback([&] { cmd_run_experiment(run_config, re_config_file, re_out); });

  // compare-runs
  std::vector<std::string> cr_records;
  std::string cr_out;
  auto* cr = app.add_subcommand("compare-runs", "side-by-side F1 and entropy for runs");
  cr->add_option("records", cr_records, "run.json files")->required()->expected(-2);
  cr->add_option("--out", cr_out, "output CSV (default stdout)");
  cr->callback([&] { cmd_compare_runs(cr_records, cr_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (json_errors && e.get_exit_code() != 0) {
      std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
      return e.get_exit_code();
    }
    return app.exit(e);
  } catch (const std::exception& e) {
    if (json_errors)
      std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    else
      std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
