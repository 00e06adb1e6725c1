#include "glatent/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "glatent/util.hpp"

namespace glatent {

using ordered_json = nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (!(adam.lr > 0)) throw std::invalid_argument("learning rate must be positive");
  if (adam.amsgrad) throw std::invalid_argument("amsgrad is not supported");
}

AdamState AdamState::zeros_like(const ModelParams& params) {
  AdamState state;
  for (const auto& [name, t] : params.named()) {
    state.m.emplace_back(t->size(), 0.0);
    state.v.emplace_back(t->size(), 0.0);
  }
  return state;
}

void adam_step(ModelParams& params, AdamState& state, const AdamHyper& hyper) {
  auto named = params.named();
  if (state.m.size() != named.size() || state.v.size() != named.size())
    throw std::invalid_argument("adam state does not match the parameter list");
  ++state.t;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
  for (std::size_t pi = 0; pi < named.size(); ++pi) {
    Tensor& p = *named[pi].second;
    p.ensure_grad();
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    if (m.size() != p.size())
      throw std::invalid_argument("adam slot " + named[pi].first + " has the wrong size");
    for (std::size_t i = 0; i < p.size(); ++i) {
      double g = p.grad[i];
      if (hyper.weight_decay != 0.0) g += hyper.weight_decay * p.values[i];
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.values[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
  }
}

std::vector<EpochLoss> train(ModelParams& params, const std::vector<TrainingExample>& data,
                             const ModelConfig& config, const TrainConfig& train_config,
                             RngStream& rng, AdamState& adam, const EpochCallback& on_epoch) {
  train_config.validate();
  config.validate();
  if (data.empty()) throw std::invalid_argument("train: empty train split");

  std::vector<EpochLoss> trace;
  std::vector<std::size_t> order(data.size());

  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    // Re-derive the permutation from the identity each epoch so a resumed
    // run reproduces it from the restored rng state alone.
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    EpochLoss epoch_loss;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(train_config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(train_config.batch_size));
      std::vector<TrainingExample> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);

      params.zero_grads();
      const LossBreakdown b = loss_backward(batch, params, config, rng);
      if (!std::isfinite(b.total))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch + 1) + ", batch starting at item " +
                                 std::to_string(start));
      adam_step(params, adam, train_config.adam);

      const double weight = static_cast<double>(end - start);
      epoch_loss.total += b.total * weight;
      epoch_loss.kl += b.kl * weight;
      epoch_loss.recon += b.recon * weight;
      epoch_loss.cls += b.cls * weight;
    }
    const double inv = 1.0 / static_cast<double>(data.size());
    epoch_loss.total *= inv;
    epoch_loss.kl *= inv;
    epoch_loss.recon *= inv;
    epoch_loss.cls *= inv;
    trace.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch + 1, epoch_loss);
  }
  return trace;
}

namespace {

constexpr char kMagic[8] = {'G', 'L', 'A', 'T', 'C', 'K', 'P', 'T'};
constexpr int kCheckpointVersion = 1;

ordered_json arch_to_json(const ModelArch& arch) {
  ordered_json j;
  j["name"] = arch.name;
  j["input_channels"] = arch.input_channels;
  j["input_size"] = arch.input_size;
  j["encoder"] = ordered_json::array();
  for (const auto& l : arch.encoder)
    j["encoder"].push_back({{"in", l.in_channels},
                            {"out", l.out_channels},
                            {"kernel", l.kernel},
                            {"pool", l.pool_after}});
  j["decoder"] = ordered_json::array();
  for (const auto& l : arch.decoder)
    j["decoder"].push_back({{"unpools", l.unpools},
                            {"in", l.in_channels},
                            {"out", l.out_channels},
                            {"kernel", l.kernel}});
  j["latent_channels"] = arch.latent_channels;
  j["latent_spatial"] = arch.latent_spatial;
  j["hidden_size"] = arch.hidden_size;
  return j;
}

ModelArch arch_from_json(const ordered_json& j) {
  ModelArch arch;
  arch.name = j.at("name").get<std::string>();
  arch.input_channels = j.at("input_channels").get<int>();
  arch.input_size = j.at("input_size").get<int>();
  for (const auto& l : j.at("encoder"))
    arch.encoder.push_back({l.at("in").get<int>(), l.at("out").get<int>(),
                            l.at("kernel").get<int>(), l.at("pool").get<bool>()});
  for (const auto& l : j.at("decoder"))
    arch.decoder.push_back({l.at("unpools").get<int>(), l.at("in").get<int>(),
                            l.at("out").get<int>(), l.at("kernel").get<int>()});
  arch.latent_channels = j.at("latent_channels").get<int>();
  arch.latent_spatial = j.at("latent_spatial").get<int>();
  arch.hidden_size = j.at("hidden_size").get<int>();
  return arch;
}

ordered_json model_config_to_json(const ModelConfig& config) {
  ordered_json j;
  j["latent_size"] = config.latent_size;
  j["groups"] = ordered_json::array();
  for (const auto& g : config.groups)
    j["groups"].push_back({{"name", g.name}, {"labels", g.labels}});
  j["alpha"] = config.alpha;
  j["beta"] = config.beta;
  j["gamma"] = config.gamma;
  j["arch"] = arch_to_json(config.arch);
  return j;
}

ModelConfig model_config_from_json(const ordered_json& j) {
  ModelConfig config;
  config.latent_size = j.at("latent_size").get<int>();
  for (const auto& g : j.at("groups"))
    config.groups.push_back(
        {g.at("name").get<std::string>(), g.at("labels").get<std::vector<std::string>>()});
  config.alpha = j.at("alpha").get<double>();
  config.beta = j.at("beta").get<double>();
  config.gamma = j.at("gamma").get<double>();
  config.arch = arch_from_json(j.at("arch"));
  return config;
}

void append_f32(std::string& out, const std::vector<double>& values) {
  for (double v : values) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
}

std::vector<double> read_f32(const std::string& data, std::size_t& offset, std::size_t count) {
  if (offset + 4 * count > data.size())
    throw std::runtime_error("checkpoint is truncated inside a parameter buffer");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[offset + 4 * i + b]))
              << (8 * b);
    float f;
    std::memcpy(&f, &bits, 4);
    out[i] = static_cast<double>(f);
  }
  offset += 4 * count;
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto named = checkpoint.params.named();
  if (checkpoint.adam.m.size() != named.size())
    throw std::invalid_argument("checkpoint adam state does not match parameters");

  ordered_json header;
  header["version"] = kCheckpointVersion;
  header["config"] = model_config_to_json(checkpoint.config);
  header["train"] = {{"epochs", checkpoint.train_config.epochs},
                     {"batch_size", checkpoint.train_config.batch_size},
                     {"lr", checkpoint.train_config.adam.lr},
                     {"beta1", checkpoint.train_config.adam.beta1},
                     {"beta2", checkpoint.train_config.adam.beta2},
                     {"eps", checkpoint.train_config.adam.eps},
                     {"weight_decay", checkpoint.train_config.adam.weight_decay},
                     {"amsgrad", checkpoint.train_config.adam.amsgrad},
                     {"seed", checkpoint.train_config.seed}};
  header["epoch"] = checkpoint.epoch;
  header["adam_t"] = checkpoint.adam.t;
  header["rng_state"] = checkpoint.rng_state;
  header["trace"] = ordered_json::array();
  for (const auto& e : checkpoint.trace)
    header["trace"].push_back({{"total", e.total}, {"kl", e.kl}, {"recon", e.recon}, {"cls", e.cls}});
  header["buffers"] = ordered_json::array();
  for (const auto& [name, t] : named)
    header["buffers"].push_back({{"name", name}, {"shape", t->shape}});

  std::string body;
  for (std::size_t i = 0; i < named.size(); ++i) {
    append_f32(body, named[i].second->values);
    append_f32(body, checkpoint.adam.m[i]);
    append_f32(body, checkpoint.adam.v[i]);
  }

  const std::string header_text = header.dump();
  std::string blob(kMagic, sizeof(kMagic));
  const std::uint64_t len = header_text.size();
  for (int b = 0; b < 8; ++b) blob.push_back(static_cast<char>((len >> (8 * b)) & 0xff));
  blob += header_text;
  blob += body;
  write_text_file_atomic(path, blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string data = read_text_file(path);
  if (data.size() < sizeof(kMagic) + 8 || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  std::uint64_t len = 0;
  for (int b = 0; b < 8; ++b)
    len |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[sizeof(kMagic) + b]))
           << (8 * b);
  std::size_t offset = sizeof(kMagic) + 8;
  if (offset + len > data.size())
    throw std::runtime_error("checkpoint is truncated inside the header");

  ordered_json header;
  try {
    header = ordered_json::parse(data.substr(offset, len));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint header is corrupt: ") + e.what());
  }
  offset += len;

  const int version = header.at("version").get<int>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint version " + std::to_string(version) +
                             " is not supported (expected " +
                             std::to_string(kCheckpointVersion) + ")");

  Checkpoint ckpt;
  ckpt.config = model_config_from_json(header.at("config"));
  const auto& t = header.at("train");
  ckpt.train_config.epochs = t.at("epochs").get<int>();
  ckpt.train_config.batch_size = t.at("batch_size").get<int>();
  ckpt.train_config.adam.lr = t.at("lr").get<double>();
  ckpt.train_config.adam.beta1 = t.at("beta1").get<double>();
  ckpt.train_config.adam.beta2 = t.at("beta2").get<double>();
  ckpt.train_config.adam.eps = t.at("eps").get<double>();
  ckpt.train_config.adam.weight_decay = t.at("weight_decay").get<double>();
  ckpt.train_config.adam.amsgrad = t.at("amsgrad").get<bool>();
  ckpt.train_config.seed = t.at("seed").get<std::uint64_t>();
  ckpt.epoch = header.at("epoch").get<int>();
  ckpt.rng_state = header.at("rng_state").get<std::string>();
  for (const auto& e : header.at("trace"))
    ckpt.trace.push_back({e.at("total").get<double>(), e.at("kl").get<double>(),
                          e.at("recon").get<double>(), e.at("cls").get<double>()});

  // Rebuild the parameter skeleton from the config, then check the declared
  // buffer directory matches before loading data.
  RngStream scratch(0);
  ckpt.params = init_params(ckpt.config, scratch);
  const auto named = ckpt.params.named();
  const auto& buffers = header.at("buffers");
  if (buffers.size() != named.size())
    throw std::runtime_error("checkpoint declares " + std::to_string(buffers.size()) +
                             " buffers, expected " + std::to_string(named.size()));
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (buffers[i].at("name").get<std::string>() != named[i].first)
      throw std::runtime_error("checkpoint buffer '" +
                               buffers[i].at("name").get<std::string>() +
                               "' does not match expected '" + named[i].first + "'");
    if (buffers[i].at("shape").get<std::vector<int>>() != named[i].second->shape)
      throw std::runtime_error("checkpoint buffer '" + named[i].first + "' has the wrong shape");
  }

  ckpt.adam.t = header.at("adam_t").get<std::int64_t>();
  for (std::size_t i = 0; i < named.size(); ++i) {
    named[i].second->values = read_f32(data, offset, named[i].second->size());
    ckpt.adam.m.push_back(read_f32(data, offset, named[i].second->size()));
    ckpt.adam.v.push_back(read_f32(data, offset, named[i].second->size()));
  }
  if (offset != data.size())
    throw std::runtime_error("checkpoint has trailing bytes after the declared buffers");
  return ckpt;
}

std::string loss_trace_csv(const std::vector<EpochLoss>& trace) {
  std::string out = "epoch,total,kl,recon,cls\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += std::to_string(i + 1);
    out += ',';
    out += format_double(trace[i].total);
    out += ',';
    out += format_double(trace[i].kl);
    out += ',';
    out += format_double(trace[i].recon);
    out += ',';
    out += format_double(trace[i].cls);
    out += '\n';
  }
  return out;
}

}  // namespace glatent
