#include "glatent/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace glatent {

ModelArch ModelArch::arch_100() {
  ModelArch a;
  a.name = "arch_100";
  a.input_size = 100;
  a.encoder = {{3, 16, 5, true}, {16, 16, 5, true}, {16, 8, 5, true}, {8, 8, 2, false}};
  a.decoder = {{1, 8, 8, 3}, {1, 8, 16, 3}, {1, 16, 16, 1}, {1, 16, 3, 5}};
  a.latent_channels = 8;
  a.latent_spatial = 8;
  a.hidden_size = 64;
  return a;
}

ModelArch ModelArch::arch_32() {
  ModelArch a;
  a.name = "arch_32";
  a.input_size = 32;
  a.encoder = {{3, 8, 5, true}, {8, 8, 5, true}};
  a.decoder = {{2, 8, 8, 3}, {1, 8, 3, 5}};
  a.latent_channels = 8;
  a.latent_spatial = 5;
  a.hidden_size = 32;
  return a;
}

ModelArch ModelArch::arch_16() {
  ModelArch a;
  a.name = "arch_16";
  a.input_size = 16;
  a.encoder = {{3, 4, 5, true}, {4, 8, 3, true}};
  a.decoder = {{1, 8, 8, 1}, {1, 8, 8, 1}, {1, 8, 3, 1}};
  a.latent_channels = 8;
  a.latent_spatial = 2;
  a.hidden_size = 16;
  return a;
}

ModelArch ModelArch::by_name(const std::string& name) {
  if (name == "arch_100") return arch_100();
  if (name == "arch_32") return arch_32();
  if (name == "arch_16") return arch_16();
  throw std::invalid_argument("unknown architecture: " + name);
}

ModelArch ModelArch::for_canvas(int canvas) {
  if (canvas == 100) return arch_100();
  if (canvas == 32) return arch_32();
  if (canvas == 16) return arch_16();
  throw std::invalid_argument("no architecture preset for canvas " + std::to_string(canvas));
}

void ModelConfig::validate() const {
  if (latent_size < static_cast<int>(groups.size()))
    throw std::invalid_argument("latent size " + std::to_string(latent_size) +
                                " is below the " + std::to_string(groups.size()) +
                                " concept groups; each group needs its own dimension");
  for (const auto& g : groups)
    if (g.labels.size() < 2)
      throw std::invalid_argument("concept group '" + g.name + "' needs at least 2 labels");
  if (alpha < 0 || beta < 0 || gamma < 0)
    throw std::invalid_argument("loss weights must be non-negative");
  if (arch.encoder.empty() || arch.decoder.empty())
    throw std::invalid_argument("architecture has no layers");
  if (arch.encoder.front().in_channels != arch.input_channels)
    throw std::invalid_argument("encoder input channels do not match the input shape");
}

std::vector<std::pair<std::string, TensorPtr>> ModelParams::named() const {
  std::vector<std::pair<std::string, TensorPtr>> out;
  for (std::size_t i = 0; i < enc_kernels.size(); ++i) {
    out.emplace_back("enc.conv" + std::to_string(i) + ".kernel", enc_kernels[i]);
    out.emplace_back("enc.conv" + std::to_string(i) + ".bias", enc_biases[i]);
  }
  out.emplace_back("enc.dense1.weight", enc_dense1_w);
  out.emplace_back("enc.dense1.bias", enc_dense1_b);
  out.emplace_back("enc.dense2.weight", enc_dense2_w);
  out.emplace_back("enc.dense2.bias", enc_dense2_b);
  out.emplace_back("dec.dense1.weight", dec_dense1_w);
  out.emplace_back("dec.dense1.bias", dec_dense1_b);
  out.emplace_back("dec.dense2.weight", dec_dense2_w);
  out.emplace_back("dec.dense2.bias", dec_dense2_b);
  for (std::size_t i = 0; i < dec_kernels.size(); ++i) {
    out.emplace_back("dec.conv" + std::to_string(i) + ".kernel", dec_kernels[i]);
    out.emplace_back("dec.conv" + std::to_string(i) + ".bias", dec_biases[i]);
  }
  for (std::size_t i = 0; i < cls_weights.size(); ++i) {
    out.emplace_back("cls." + std::to_string(i) + ".weight", cls_weights[i]);
    out.emplace_back("cls." + std::to_string(i) + ".bias", cls_biases[i]);
  }
  return out;
}

void ModelParams::zero_grads() {
  for (auto& [name, t] : named()) t->zero_grad();
}

bool ModelParams::finite() const {
  for (const auto& [name, t] : named())
    if (!all_finite(*t)) return false;
  return true;
}

namespace {

void fill_normal(Tensor& t, double std, RngStream& rng) {
  for (auto& v : t.values) v = rng.normal() * std;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, RngStream& rng) {
  config.validate();
  const ModelArch& arch = config.arch;
  const int c = config.latent_size;
  ModelParams p;

  for (const auto& spec : arch.encoder) {
    p.enc_kernels.push_back(
        tensor({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}));
    p.enc_biases.push_back(tensor({spec.out_channels}));
  }
  p.enc_dense1_w = tensor({arch.hidden_size, arch.flatten_size()});
  p.enc_dense1_b = tensor({arch.hidden_size});
  p.enc_dense2_w = tensor({2 * c, arch.hidden_size});
  p.enc_dense2_b = tensor({2 * c});
  p.dec_dense1_w = tensor({arch.hidden_size, c});
  p.dec_dense1_b = tensor({arch.hidden_size});
  p.dec_dense2_w = tensor({arch.flatten_size(), arch.hidden_size});
  p.dec_dense2_b = tensor({arch.flatten_size()});
  for (const auto& stage : arch.decoder) {
    p.dec_kernels.push_back(
        tensor({stage.out_channels, stage.in_channels, stage.kernel, stage.kernel}));
    p.dec_biases.push_back(tensor({stage.out_channels}));
  }
  for (const auto& group : config.groups) {
    const int n = static_cast<int>(group.labels.size());
    p.cls_weights.push_back(tensor({n}));
    p.cls_biases.push_back(tensor({n}));
  }

  // Weight draws happen in named() order so restarts reproduce exactly;
  // biases stay zero and consume no draws.
  for (auto& [name, t] : p.named()) {
    if (name.ends_with(".bias")) continue;
    double fan_in = 1.0;
    if (name.ends_with(".kernel")) {
      fan_in = static_cast<double>(t->dim(1)) * t->dim(2) * t->dim(3);
    } else if (t->shape.size() == 2) {
      fan_in = static_cast<double>(t->dim(1));
    }
    fill_normal(*t, 1.0 / std::sqrt(fan_in), rng);
  }
  return p;
}

LatentPosterior encode(Tape& tape, const TensorPtr& image, const ModelParams& params,
                       const ModelConfig& config) {
  const ModelArch& arch = config.arch;
  if (image->shape != std::vector<int>{arch.input_channels, arch.input_size, arch.input_size})
    throw std::invalid_argument("encode: image shape " + shape_str(image->shape) +
                                " does not match the configured input " +
                                shape_str({arch.input_channels, arch.input_size, arch.input_size}));
  TensorPtr h = image;
  for (std::size_t i = 0; i < arch.encoder.size(); ++i) {
    h = conv2d_valid(tape, h, params.enc_kernels[i], params.enc_biases[i]);
    h = activation(tape, h, Activation::kRelu);
    if (arch.encoder[i].pool_after) h = maxpool2(tape, h);
  }
  h = reshape(tape, h, {arch.flatten_size()});
  h = dense(tape, h, params.enc_dense1_w, params.enc_dense1_b);
  h = dense(tape, h, params.enc_dense2_w, params.enc_dense2_b);
  const int c = config.latent_size;
  LatentPosterior post;
  post.mu = narrow(tape, h, 0, c);
  post.log_variance = clamp(tape, narrow(tape, h, c, c), -10.0, 10.0);
  return post;
}

TensorPtr reparameterize(Tape& tape, const LatentPosterior& posterior, RngStream& rng) {
  std::vector<double> noise(posterior.mu->size());
  for (auto& n : noise) n = rng.normal();
  return gaussian_sample(tape, posterior.mu, posterior.log_variance, noise);
}

TensorPtr decode(Tape& tape, const TensorPtr& z, const ModelParams& params,
                 const ModelConfig& config) {
  const ModelArch& arch = config.arch;
  if (z->shape != std::vector<int>{config.latent_size})
    throw std::invalid_argument("decode: z shape " + shape_str(z->shape) + " does not match C=" +
                                std::to_string(config.latent_size));
  TensorPtr h = dense(tape, z, params.dec_dense1_w, params.dec_dense1_b);
  h = dense(tape, h, params.dec_dense2_w, params.dec_dense2_b);
  h = reshape(tape, h, {arch.latent_channels, arch.latent_spatial, arch.latent_spatial});
  for (std::size_t i = 0; i < arch.decoder.size(); ++i) {
    for (int u = 0; u < arch.decoder[i].unpools; ++u) h = unpool2(tape, h);
    h = conv2d_valid(tape, h, params.dec_kernels[i], params.dec_biases[i]);
    const bool last = i + 1 == arch.decoder.size();
    h = activation(tape, h, last ? Activation::kSigmoid : Activation::kRelu);
  }
  return h;
}

TensorPtr classifier_logits(Tape& tape, const TensorPtr& z, int group_index,
                            const ModelParams& params) {
  if (group_index < 0 || group_index >= static_cast<int>(params.cls_weights.size()))
    throw std::out_of_range("classifier_logits: group " + std::to_string(group_index) +
                            " out of range for " + std::to_string(params.cls_weights.size()) +
                            " groups");
  return axis_logits(tape, z, group_index, params.cls_weights[static_cast<std::size_t>(group_index)],
                     params.cls_biases[static_cast<std::size_t>(group_index)]);
}

void encode_values(const Tensor& image, const ModelParams& params, const ModelConfig& config,
                   std::vector<double>& mu, std::vector<double>& log_variance) {
  Tape tape;
  auto img = tensor(image.shape, image.values);
  auto post = encode(tape, img, params, config);
  mu = post.mu->values;
  log_variance = post.log_variance->values;
}

TensorPtr decode_values(const std::vector<double>& z, const ModelParams& params,
                        const ModelConfig& config) {
  Tape tape;
  auto zt = tensor({static_cast<int>(z.size())}, z);
  auto out = decode(tape, zt, params, config);
  return tensor(out->shape, out->values);
}

std::vector<double> classifier_logit_values(const std::vector<double>& z, int group_index,
                                            const ModelParams& params) {
  Tape tape;
  auto zt = tensor({static_cast<int>(z.size())}, z);
  return classifier_logits(tape, zt, group_index, params)->values;
}

TensorPtr loss_graph(Tape& tape, const std::vector<TrainingExample>& batch,
                     const ModelParams& params, const ModelConfig& config, RngStream& rng,
                     LossBreakdown& breakdown) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  const int n_groups = static_cast<int>(config.groups.size());
  for (const auto& item : batch) {
    if (!item.labelled) continue;
    if (static_cast<int>(item.label_indices.size()) != n_groups)
      throw std::invalid_argument("loss: labelled item carries " +
                                  std::to_string(item.label_indices.size()) + " labels for " +
                                  std::to_string(n_groups) + " groups");
    for (int g = 0; g < n_groups; ++g) {
      const int li = item.label_indices[static_cast<std::size_t>(g)];
      if (li < 0 || li >= static_cast<int>(config.groups[static_cast<std::size_t>(g)].labels.size()))
        throw std::invalid_argument("loss: label index " + std::to_string(li) +
                                    " outside group '" +
                                    config.groups[static_cast<std::size_t>(g)].name + "'");
    }
  }

  TensorPtr kl_sum, recon_sum, cls_sum;
  auto accumulate = [&tape](TensorPtr& acc, const TensorPtr& term) {
    acc = acc ? add(tape, acc, term) : term;
  };

  for (const auto& item : batch) {
    auto post = encode(tape, item.image, params, config);
    accumulate(kl_sum, kl_divergence(tape, post.mu, post.log_variance));
    auto z = reparameterize(tape, post, rng);
    if (config.alpha > 0) {
      auto probs = decode(tape, z, params, config);
      accumulate(recon_sum, bernoulli_nll(tape, probs, *item.image));
    }
    if (config.gamma > 0 && item.labelled) {
      for (int g = 0; g < n_groups; ++g) {
        auto logits = classifier_logits(tape, z, g, params);
        accumulate(cls_sum, softmax_cross_entropy(tape, logits,
                                                  item.label_indices[static_cast<std::size_t>(g)]));
      }
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  breakdown.kl = kl_sum->values[0] * inv_batch;
  breakdown.recon = recon_sum ? recon_sum->values[0] * inv_batch : 0.0;
  breakdown.cls = cls_sum ? cls_sum->values[0] * inv_batch : 0.0;
  breakdown.total =
      config.beta * breakdown.kl + config.alpha * breakdown.recon + config.gamma * breakdown.cls;

  TensorPtr total = scale(tape, kl_sum, config.beta);
  if (recon_sum) total = add(tape, total, scale(tape, recon_sum, config.alpha));
  if (cls_sum) total = add(tape, total, scale(tape, cls_sum, config.gamma));
  return scale(tape, total, inv_batch);
}

LossBreakdown loss(const std::vector<TrainingExample>& batch, const ModelParams& params,
                   const ModelConfig& config, RngStream& rng) {
  Tape tape;
  LossBreakdown breakdown;
  loss_graph(tape, batch, params, config, rng, breakdown);
  return breakdown;
}

LossBreakdown loss_backward(const std::vector<TrainingExample>& batch, ModelParams& params,
                            const ModelConfig& config, RngStream& rng) {
  Tape tape;
  LossBreakdown breakdown;
  auto total = loss_graph(tape, batch, params, config, rng, breakdown);
  tape.backward(total);
  return breakdown;
}

}  // namespace glatent
