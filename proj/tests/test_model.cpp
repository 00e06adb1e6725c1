#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "glatent/model.hpp"
#include "glatent/rng.hpp"
#include "glatent/tensor.hpp"

using namespace glatent;

namespace {

ModelConfig desk_config(int canvas = 16) {
  ModelConfig config;
  config.latent_size = 4;
  config.groups = {{"color", {"red", "blue"}}, {"size", {"small", "big"}}};
  config.arch = ModelArch::for_canvas(canvas);
  return config;
}

ModelConfig full_config() {
  ModelConfig config;
  config.latent_size = 4;
  config.groups = {{"color", {"red", "blue"}}, {"size", {"small", "big"}}};
  config.arch = ModelArch::arch_100();
  return config;
}

TensorPtr random_image(const ModelConfig& config, RngStream& rng) {
  auto img = tensor({config.arch.input_channels, config.arch.input_size, config.arch.input_size});
  for (auto& v : img->values) v = rng.uniform01();
  return img;
}

}  // namespace

TEST_CASE("config validation") {
  auto config = full_config();
  CHECK_NOTHROW(config.validate());

  auto too_small = config;
  too_small.latent_size = 1;
  CHECK_THROWS_AS(too_small.validate(), std::invalid_argument);

  auto tiny_group = config;
  tiny_group.groups[0].labels = {"red"};
  CHECK_THROWS_AS(tiny_group.validate(), std::invalid_argument);

  auto negative = config;
  negative.beta = -1;
  CHECK_THROWS_AS(negative.validate(), std::invalid_argument);
}

TEST_CASE("architecture presets land on their flatten points") {
  CHECK(ModelArch::arch_100().flatten_size() == 512);
  CHECK(ModelArch::arch_32().flatten_size() == 200);
  CHECK(ModelArch::arch_16().flatten_size() == 32);
  CHECK(ModelArch::by_name("arch_32").input_size == 32);
  CHECK_THROWS_AS(ModelArch::by_name("arch_99"), std::invalid_argument);
  CHECK(ModelArch::for_canvas(100).name == "arch_100");
}

TEST_CASE("init draws weights and leaves biases zero") {
  auto config = desk_config();
  RngStream rng(5);
  auto params = init_params(config, rng);
  CHECK(params.finite());
  CHECK(params.cls_weights.size() == 2);
  CHECK(params.cls_weights[0]->size() == 2);

  for (const auto& [name, t] : params.named()) {
    bool all_zero = true;
    for (double v : t->values) all_zero &= v == 0.0;
    if (name.ends_with(".bias"))
      CHECK(all_zero);
    else
      CHECK_FALSE(all_zero);
  }

  RngStream rng2(5);
  auto again = init_params(config, rng2);
  CHECK(again.enc_kernels[0]->values == params.enc_kernels[0]->values);
  RngStream rng3(6);
  auto other = init_params(config, rng3);
  CHECK(other.enc_kernels[0]->values != params.enc_kernels[0]->values);
}

TEST_CASE("encode produces a length-C posterior through the 512 flatten") {
  auto config = full_config();
  RngStream rng(7);
  auto params = init_params(config, rng);
  Tape tape;
  auto posterior = encode(tape, random_image(config, rng), params, config);
  CHECK(posterior.mu->shape == std::vector<int>{4});
  CHECK(posterior.log_variance->shape == std::vector<int>{4});
  CHECK(params.enc_dense1_w->dim(1) == 512);

  CHECK_THROWS_AS(encode(tape, tensor({3, 32, 32}), params, config), std::invalid_argument);
}

TEST_CASE("encode with all-zero parameters returns the dense bias for every image") {
  auto config = desk_config(32);
  RngStream rng(1);
  auto params = init_params(config, rng);
  for (const auto& [name, t] : params.named()) std::fill(t->values.begin(), t->values.end(), 0.0);
  params.enc_dense2_b->values = {0.1, -0.2, 0.3, -0.4, 0, 0, 0, 0};

  Tape tape;
  auto a = encode(tape, random_image(config, rng), params, config);
  auto b = encode(tape, random_image(config, rng), params, config);
  CHECK(a.mu->values == std::vector<double>{0.1, -0.2, 0.3, -0.4});
  CHECK(b.mu->values == a.mu->values);
  CHECK(a.log_variance->values == std::vector<double>{0, 0, 0, 0});
}

TEST_CASE("encode clamps log variance to [-10, 10]") {
  auto config = desk_config(32);
  RngStream rng(1);
  auto params = init_params(config, rng);
  for (const auto& [name, t] : params.named()) std::fill(t->values.begin(), t->values.end(), 0.0);
  params.enc_dense2_b->values = {0, 0, 0, 0, -50, 50, -3, 3};

  Tape tape;
  auto posterior = encode(tape, random_image(config, rng), params, config);
  CHECK(posterior.log_variance->values == std::vector<double>{-10, 10, -3, 3});
}

TEST_CASE("reparameterize is deterministic and centered") {
  LatentPosterior posterior{tensor({2}, {1.0, -2.0}), tensor({2}, {-10.0, -10.0})};
  RngStream rng(3);
  Tape tape;
  auto z = reparameterize(tape, posterior, rng);
  CHECK(z->values[0] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(z->values[1] == doctest::Approx(-2.0).epsilon(0.05));

  RngStream r1(11), r2(11);
  Tape t1, t2;
  auto z1 = reparameterize(t1, posterior, r1);
  auto z2 = reparameterize(t2, posterior, r2);
  CHECK(z1->values == z2->values);
}

TEST_CASE("reparameterize sample mean at mu=1 sigma=2") {
  LatentPosterior posterior{tensor({1}, {1.0}), tensor({1}, {std::log(4.0)})};
  RngStream rng(99);
  double total = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    Tape tape;
    total += reparameterize(tape, posterior, rng)->values[0];
  }
  CHECK(total / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("decode restores the input shape and zero parameters give 0.5 pixels") {
  auto config = full_config();
  RngStream rng(7);
  auto params = init_params(config, rng);
  std::vector<double> z = {0.3, -0.1, 0.8, 0.0};

  auto out = decode_values(z, params, config);
  CHECK(out->shape == std::vector<int>{3, 100, 100});
  for (double v : out->values) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(decode_values(z, params, config)->values == out->values);

  for (const auto& [name, t] : params.named()) std::fill(t->values.begin(), t->values.end(), 0.0);
  auto flat = decode_values(z, params, config);
  for (double v : flat->values) CHECK(v == 0.5);
}

TEST_CASE("desk architectures also round-trip their shapes") {
  for (int canvas : {32, 16}) {
    auto config = desk_config(canvas);
    RngStream rng(2);
    auto params = init_params(config, rng);
    Tape tape;
    auto image = random_image(config, rng);
    auto posterior = encode(tape, image, params, config);
    CHECK(posterior.mu->size() == 4);
    auto z = reparameterize(tape, posterior, rng);
    auto recon = decode(tape, z, params, config);
    CHECK(recon->shape == image->shape);
  }
}

TEST_CASE("classifier logits scale the group weights by one coordinate") {
  auto config = desk_config();
  RngStream rng(4);
  auto params = init_params(config, rng);
  params.cls_weights[0]->values = {1.0, -1.0};
  params.cls_biases[0]->values = {0.0, 0.0};
  params.cls_weights[1]->values = {0.5, 2.0};
  params.cls_biases[1]->values = {0.25, -0.75};

  CHECK(classifier_logit_values({2.0, 9.0, -3.0, 4.0}, 0, params) ==
        std::vector<double>{2.0, -2.0});
  CHECK(classifier_logit_values({7.7, 0.0, 1.0, 1.0}, 1, params) ==
        std::vector<double>{0.25, -0.75});
  CHECK_THROWS_AS(classifier_logit_values({0, 0, 0, 0}, 2, params), std::out_of_range);
}

TEST_CASE("classifier logits ignore every other latent coordinate") {
  auto config = desk_config();
  RngStream rng(4);
  auto params = init_params(config, rng);
  for (auto& w : params.cls_weights)
    for (auto& v : w->values) v = rng.normal();

  std::vector<double> z = {0.37, -1.2, 5.5, 0.01};
  auto base = classifier_logit_values(z, 1, params);
  for (int coord : {0, 2, 3}) {
    auto perturbed = z;
    perturbed[coord] += rng.normal() * 10;
    CHECK(classifier_logit_values(perturbed, 1, params) == base);
  }
}

TEST_CASE("loss at the prior posterior has a zero KL term") {
  auto config = desk_config();
  RngStream rng(1);
  auto params = init_params(config, rng);
  for (const auto& [name, t] : params.named()) std::fill(t->values.begin(), t->values.end(), 0.0);

  std::vector<TrainingExample> batch;
  batch.push_back({random_image(config, rng), false, {}});
  RngStream loss_rng(5);
  auto breakdown = loss(batch, params, config, loss_rng);
  CHECK(breakdown.kl == 0.0);
  CHECK(breakdown.cls == 0.0);
  CHECK(breakdown.recon > 0.0);
  CHECK(breakdown.total == doctest::Approx(config.alpha * breakdown.recon));
}

TEST_CASE("unlabelled batches contribute no classification term") {
  auto config = desk_config();
  RngStream rng(8);
  auto params = init_params(config, rng);
  std::vector<TrainingExample> batch;
  batch.push_back({random_image(config, rng), false, {}});
  batch.push_back({random_image(config, rng), false, {}});
  RngStream loss_rng(5);
  auto breakdown = loss(batch, params, config, loss_rng);
  CHECK(breakdown.cls == 0.0);
  CHECK(breakdown.total ==
        doctest::Approx(config.beta * breakdown.kl + config.alpha * breakdown.recon));
}

TEST_CASE("gamma=0 and alpha=0 reduce the objective") {
  auto config = desk_config();
  RngStream rng(8);
  auto params = init_params(config, rng);
  std::vector<TrainingExample> batch;
  batch.push_back({random_image(config, rng), true, {0, 1}});
  batch.push_back({random_image(config, rng), true, {1, 0}});

  RngStream r_full(5), r_beta(5), r_cls(5);
  auto full = loss(batch, params, config, r_full);

  auto beta_vae = config;
  beta_vae.gamma = 0.0;
  auto no_cls = loss(batch, params, beta_vae, r_beta);
  CHECK(no_cls.cls == 0.0);
  CHECK(no_cls.kl == full.kl);
  CHECK(no_cls.recon == full.recon);
  CHECK(no_cls.total == doctest::Approx(beta_vae.beta * no_cls.kl + no_cls.recon));

  auto cls_only = config;
  cls_only.alpha = 0.0;
  auto no_recon = loss(batch, params, cls_only, r_cls);
  CHECK(no_recon.recon == 0.0);
  CHECK(no_recon.kl == full.kl);
  CHECK(no_recon.cls == full.cls);
  CHECK(no_recon.total ==
        doctest::Approx(cls_only.beta * no_recon.kl + cls_only.gamma * no_recon.cls));
}

TEST_CASE("loss rejects labels outside the group vocabulary") {
  auto config = desk_config();
  RngStream rng(8);
  auto params = init_params(config, rng);
  std::vector<TrainingExample> batch;
  batch.push_back({random_image(config, rng), true, {0, 5}});
  RngStream loss_rng(5);
  CHECK_THROWS_AS(loss(batch, params, config, loss_rng), std::invalid_argument);

  batch[0].label_indices = {0};
  CHECK_THROWS_AS(loss(batch, params, config, loss_rng), std::invalid_argument);

  CHECK_THROWS_AS(loss({}, params, config, loss_rng), std::invalid_argument);
}

TEST_CASE("closed-form KL matches Monte Carlo within 1%") {
  RngStream rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const int c = 4;
    std::vector<double> mu(c), lv(c);
    for (int i = 0; i < c; ++i) {
      mu[i] = rng.normal();
      lv[i] = rng.normal() * 0.5;
    }
    Tape tape;
    const double closed =
        kl_divergence(tape, tensor({c}, mu), tensor({c}, lv))->values[0];

    double mc = 0;
    const int n = 100000;
    for (int s = 0; s < n; ++s) {
      for (int i = 0; i < c; ++i) {
        const double sigma = std::exp(0.5 * lv[i]);
        const double z = mu[i] + sigma * rng.normal();
        const double log_q = -0.5 * (std::log(2 * M_PI) + lv[i]) -
                             0.5 * (z - mu[i]) * (z - mu[i]) / (sigma * sigma);
        const double log_p = -0.5 * std::log(2 * M_PI) - 0.5 * z * z;
        mc += log_q - log_p;
      }
    }
    mc /= n;
    CHECK(std::abs(closed - mc) / std::max(std::abs(closed), 1e-9) < 0.01);
  }
}

TEST_CASE("full loss gradient passes grad_check on the 16x16 desk config") {
  auto config = desk_config(16);
  RngStream rng(17);
  auto params = init_params(config, rng);
  std::vector<TrainingExample> batch;
  batch.push_back({random_image(config, rng), true, {0, 1}});
  batch.push_back({random_image(config, rng), false, {}});

  std::vector<TensorPtr> tensors;
  for (const auto& [name, t] : params.named()) tensors.push_back(t);
  auto f = [&](Tape& tape) {
    RngStream noise(123);
    LossBreakdown breakdown;
    return loss_graph(tape, batch, params, config, noise, breakdown);
  };
  CHECK(grad_check(f, tensors, 1e-5) < 1e-4);
}

TEST_CASE("loss_backward leaves finite accumulated gradients") {
  auto config = desk_config(16);
  RngStream rng(17);
  auto params = init_params(config, rng);
  std::vector<TrainingExample> batch;
  batch.push_back({random_image(config, rng), true, {1, 0}});
  RngStream loss_rng(2);
  auto breakdown = loss_backward(batch, params, config, loss_rng);
  CHECK(std::isfinite(breakdown.total));
  bool any_nonzero = false;
  for (const auto& [name, t] : params.named()) {
    REQUIRE(t->has_grad());
    for (double g : t->grad) {
      CHECK(std::isfinite(g));
      any_nonzero |= g != 0.0;
    }
  }
  CHECK(any_nonzero);
}
