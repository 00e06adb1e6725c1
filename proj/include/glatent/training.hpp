#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "glatent/model.hpp"
#include "glatent/rng.hpp"

namespace glatent {

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  bool amsgrad = false;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  AdamHyper adam;
  std::uint64_t seed = 0;

  void validate() const;
};

// First/second moments per parameter tensor, aligned with params.named().
struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::int64_t t = 0;

  static AdamState zeros_like(const ModelParams& params);
};

// Standard bias-corrected update from the gradients currently held in the
// parameter tensors. weight_decay is honored if set; amsgrad is rejected.
void adam_step(ModelParams& params, AdamState& state, const AdamHyper& hyper);

struct EpochLoss {
  double total = 0, kl = 0, recon = 0, cls = 0;
};

using EpochCallback = std::function<void(int epoch, const EpochLoss&)>;

// Minibatched optimization of the three-term objective: shuffle, batch
// (short final batch kept), zero grads, backward, Adam step. Returns the
// per-epoch loss trace; NaN losses abort with a diagnostic.
std::vector<EpochLoss> train(ModelParams& params, const std::vector<TrainingExample>& data,
                             const ModelConfig& config, const TrainConfig& train_config,
                             RngStream& rng, AdamState& adam,
                             const EpochCallback& on_epoch = {});

struct Checkpoint {
  ModelConfig config;
  TrainConfig train_config;
  ModelParams params;
  AdamState adam;
  int epoch = 0;
  std::string rng_state;
  std::vector<EpochLoss> trace;
};

// Binary format: 8-byte magic "GLATCKPT", u64 little-endian header length,
// JSON header (version, configs, epoch, rng state, trace, buffer directory),
// then the declared float32 little-endian buffers. Writes are atomic.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string loss_trace_csv(const std::vector<EpochLoss>& trace);

}  // namespace glatent
