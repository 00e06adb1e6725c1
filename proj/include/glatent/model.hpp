#pragma once

#include <string>
#include <utility>
#include <vector>

#include "glatent/rng.hpp"
#include "glatent/tensor.hpp"

namespace glatent {

// One independent factor described by mutually exclusive labels.
struct ConceptGroup {
  std::string name;
  std::vector<std::string> labels;
};

// Reserved ground-truth/prediction token for out-of-vocabulary inputs.
inline const std::string kUnknownLabel = "unknown";

struct EncoderConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  bool pool_after = false;
};

struct DecoderStageSpec {
  int unpools = 0;  // 2x upsamplings applied before the stage's convolution
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
};

// Convolutional stack description. The encoder ends on latent_channels
// feature maps of latent_spatial x latent_spatial, flattened and passed
// through two dense layers; the decoder mirrors it back to the input size.
struct ModelArch {
  std::string name;
  int input_channels = 3;
  int input_size = 0;  // square images
  std::vector<EncoderConvSpec> encoder;
  std::vector<DecoderStageSpec> decoder;
  int latent_channels = 0;
  int latent_spatial = 0;
  int hidden_size = 0;

  int flatten_size() const { return latent_channels * latent_spatial * latent_spatial; }

  // 100x100 inputs; trace 100>96>48>44>22>18>9>8, flatten 8*8*8 = 512.
  static ModelArch arch_100();
  // 32x32 desk preset; trace 32>28>14>10>5, flatten 8*5*5 = 200.
  static ModelArch arch_32();
  // 16x16 gradient-check preset; trace 16>12>6>4>2, flatten 8*2*2 = 32.
  static ModelArch arch_16();
  static ModelArch by_name(const std::string& name);
  static ModelArch for_canvas(int canvas);
};

struct ModelConfig {
  int latent_size = 4;
  std::vector<ConceptGroup> groups;
  double alpha = 1.0;
  double beta = 30.0;
  double gamma = 10000.0;
  ModelArch arch;

  void validate() const;  // C >= |G|, every group >= 2 labels, arch shapes consistent
};

// Every learnable tensor of the network. Classifier i reads latent
// coordinate i exclusively.
struct ModelParams {
  std::vector<TensorPtr> enc_kernels, enc_biases;
  TensorPtr enc_dense1_w, enc_dense1_b;
  TensorPtr enc_dense2_w, enc_dense2_b;
  TensorPtr dec_dense1_w, dec_dense1_b;
  TensorPtr dec_dense2_w, dec_dense2_b;
  std::vector<TensorPtr> dec_kernels, dec_biases;
  std::vector<TensorPtr> cls_weights, cls_biases;

  // Stable enumeration used for initialization draws, Adam state slots and
  // checkpoint buffer order.
  std::vector<std::pair<std::string, TensorPtr>> named() const;
  void zero_grads();
  bool finite() const;
};

// Weights ~ N(0, 1/fan_in), biases zero, drawn in named() order.
ModelParams init_params(const ModelConfig& config, RngStream& rng);

struct LatentPosterior {
  TensorPtr mu;            // length C
  TensorPtr log_variance;  // length C, clamped to [-10, 10]
};

LatentPosterior encode(Tape& tape, const TensorPtr& image, const ModelParams& params,
                       const ModelConfig& config);

// z = mu + exp(0.5 * log_variance) * eps with eps drawn once from rng.
TensorPtr reparameterize(Tape& tape, const LatentPosterior& posterior, RngStream& rng);

// Pixel Bernoulli means in (0,1), shaped like the input images.
TensorPtr decode(Tape& tape, const TensorPtr& z, const ModelParams& params,
                 const ModelConfig& config);

TensorPtr classifier_logits(Tape& tape, const TensorPtr& z, int group_index,
                            const ModelParams& params);

// Convenience plain-value wrappers (throwaway tape, no gradients kept).
void encode_values(const Tensor& image, const ModelParams& params, const ModelConfig& config,
                   std::vector<double>& mu, std::vector<double>& log_variance);
TensorPtr decode_values(const std::vector<double>& z, const ModelParams& params,
                        const ModelConfig& config);
std::vector<double> classifier_logit_values(const std::vector<double>& z, int group_index,
                                            const ModelParams& params);

struct TrainingExample {
  TensorPtr image;                 // [3,H,W] in [0,1]
  bool labelled = false;
  std::vector<int> label_indices;  // one index per group when labelled
};

struct LossBreakdown {
  double total = 0;  // beta*kl + alpha*recon + gamma*cls
  double kl = 0;     // batch means of the raw terms
  double recon = 0;
  double cls = 0;
};

// Batch objective: total = beta*KL + alpha*ReconNLL + gamma*ClsCE, each term
// summed per item and averaged over the batch. alpha=0 skips decoding
// entirely; gamma=0 never touches the classifiers; unlabelled items
// contribute no classification term.
TensorPtr loss_graph(Tape& tape, const std::vector<TrainingExample>& batch,
                     const ModelParams& params, const ModelConfig& config, RngStream& rng,
                     LossBreakdown& breakdown);

LossBreakdown loss(const std::vector<TrainingExample>& batch, const ModelParams& params,
                   const ModelConfig& config, RngStream& rng);

// Builds the graph, runs backward, leaves gradients accumulated in params.
LossBreakdown loss_backward(const std::vector<TrainingExample>& batch, ModelParams& params,
                            const ModelConfig& config, RngStream& rng);

}  // namespace glatent
