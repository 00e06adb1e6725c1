#include "glatent/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace glatent {

namespace {

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": " + detail);
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  values.assign(shape_numel(shape), 0.0);
}

Tensor::Tensor(std::vector<int> s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  if (shape_numel(shape) != values.size())
    shape_error("Tensor", "shape " + shape_str(shape) + " does not match " +
                              std::to_string(values.size()) + " values");
}

void Tensor::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() { grad.assign(values.size(), 0.0); }

TensorPtr tensor(std::vector<int> shape) { return std::make_shared<Tensor>(std::move(shape)); }

TensorPtr tensor(std::vector<int> shape, std::vector<double> values) {
  return std::make_shared<Tensor>(std::move(shape), std::move(values));
}

TensorPtr scalar_tensor(double value) {
  return tensor({1}, {value});
}

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) shape_error("shape_numel", "non-positive extent in " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << "]";
  return out.str();
}

bool all_finite(const Tensor& t) {
  for (double v : t.values)
    if (!std::isfinite(v)) return false;
  for (double g : t.grad)
    if (!std::isfinite(g)) return false;
  return true;
}

TensorPtr Tape::record(std::vector<TensorPtr> inputs, TensorPtr output,
                       std::function<void()> backward_rule) {
  nodes_.push_back(Node{std::move(inputs), output, std::move(backward_rule)});
  return output;
}

void Tape::backward(const TensorPtr& loss) {
  if (!loss) throw std::invalid_argument("Tape::backward: null loss");
  if (loss->size() != 1)
    throw std::invalid_argument("Tape::backward: loss must be scalar, got shape " +
                                shape_str(loss->shape));
  // Each pass starts from a fresh cotangent: recorded outputs are cleared so
  // only leaf tensors accumulate across repeated calls.
  for (auto& node : nodes_)
    if (node.output->has_grad()) node.output->zero_grad();
  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output->has_grad()) continue;  // not reachable from the loss
    it->backward_rule();
  }
}

TensorPtr conv2d_valid(Tape& tape, const TensorPtr& input, const TensorPtr& kernels,
                       const TensorPtr& bias) {
  if (input->shape.size() != 3) shape_error("conv2d_valid", "input must be [Cin,H,W], got " + shape_str(input->shape));
  if (kernels->shape.size() != 4)
    shape_error("conv2d_valid", "kernels must be [Cout,Cin,k,k], got " + shape_str(kernels->shape));
  const int cin = input->dim(0), h = input->dim(1), w = input->dim(2);
  const int cout = kernels->dim(0), kin = kernels->dim(1), kh = kernels->dim(2), kw = kernels->dim(3);
  if (kh != kw) shape_error("conv2d_valid", "kernels must be square, got " + shape_str(kernels->shape));
  if (kin != cin)
    shape_error("conv2d_valid", "kernel channel count " + std::to_string(kin) +
                                    " does not match input channels " + std::to_string(cin));
  if (kh > h || kw > w)
    shape_error("conv2d_valid", "kernel " + std::to_string(kh) + " exceeds input " +
                                    std::to_string(h) + "x" + std::to_string(w));
  if (bias->shape != std::vector<int>{cout})
    shape_error("conv2d_valid", "bias must be [" + std::to_string(cout) + "], got " + shape_str(bias->shape));

  const int oh = h - kh + 1, ow = w - kw + 1;
  const int k = kh;
  auto out = tensor({cout, oh, ow});

  const double* in = input->values.data();
  const double* ker = kernels->values.data();
  const double* bs = bias->values.data();
  double* o = out->values.data();
  for (int oc = 0; oc < cout; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = bs[oc];
        for (int ic = 0; ic < cin; ++ic) {
          const double* in_base = in + (static_cast<std::size_t>(ic) * h + oy) * w + ox;
          const double* ker_base = ker + ((static_cast<std::size_t>(oc) * cin + ic) * k) * k;
          for (int ky = 0; ky < k; ++ky) {
            const double* row = in_base + static_cast<std::size_t>(ky) * w;
            const double* krow = ker_base + static_cast<std::size_t>(ky) * k;
            for (int kx = 0; kx < k; ++kx) acc += row[kx] * krow[kx];
          }
        }
        o[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox] = acc;
      }
    }
  }

  auto backward = [input, kernels, bias, out, cin, h, w, cout, oh, ow, k]() {
    input->ensure_grad();
    kernels->ensure_grad();
    bias->ensure_grad();
    const double* gout = out->grad.data();
    const double* in = input->values.data();
    const double* ker = kernels->values.data();
    double* gin = input->grad.data();
    double* gker = kernels->grad.data();
    double* gbias = bias->grad.data();
    for (int oc = 0; oc < cout; ++oc) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double g = gout[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox];
          if (g == 0.0) continue;
          gbias[oc] += g;
          for (int ic = 0; ic < cin; ++ic) {
            const std::size_t in_base = (static_cast<std::size_t>(ic) * h + oy) * w + ox;
            const std::size_t ker_base = ((static_cast<std::size_t>(oc) * cin + ic) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
              const std::size_t irow = in_base + static_cast<std::size_t>(ky) * w;
              const std::size_t krow = ker_base + static_cast<std::size_t>(ky) * k;
              for (int kx = 0; kx < k; ++kx) {
                gker[krow + kx] += g * in[irow + kx];
                gin[irow + kx] += g * ker[krow + kx];
              }
            }
          }
        }
      }
    }
  };
  return tape.record({input, kernels, bias}, out, backward);
}

MaxPoolResult maxpool2_with_indices(Tape& tape, const TensorPtr& input) {
  if (input->shape.size() != 3) shape_error("maxpool2", "input must be [C,H,W], got " + shape_str(input->shape));
  const int c = input->dim(0), h = input->dim(1), w = input->dim(2);
  if (h % 2 != 0 || w % 2 != 0)
    shape_error("maxpool2", "extents must be even, got " + std::to_string(h) + "x" + std::to_string(w));
  const int oh = h / 2, ow = w / 2;
  auto out = tensor({c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::int32_t>>(out->size());

  const double* in = input->values.data();
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double best = -1.0;
        std::int32_t best_idx = -1;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::int32_t idx =
                static_cast<std::int32_t>((static_cast<std::size_t>(ch) * h + oy * 2 + dy) * w + ox * 2 + dx);
            if (best_idx < 0 || in[idx] > best) {
              best = in[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t oidx = (static_cast<std::size_t>(ch) * oh + oy) * ow + ox;
        out->values[oidx] = best;
        (*argmax)[oidx] = best_idx;
      }
    }
  }

  auto backward = [input, out, argmax]() {
    input->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i)
      input->grad[static_cast<std::size_t>((*argmax)[i])] += out->grad[i];
  };
  tape.record({input}, out, backward);
  return MaxPoolResult{out, *argmax};
}

TensorPtr maxpool2(Tape& tape, const TensorPtr& input) {
  return maxpool2_with_indices(tape, input).output;
}

TensorPtr unpool2(Tape& tape, const TensorPtr& input) {
  if (input->shape.size() != 3) shape_error("unpool2", "input must be [C,H,W], got " + shape_str(input->shape));
  const int c = input->dim(0), h = input->dim(1), w = input->dim(2);
  const int oh = h * 2, ow = w * 2;
  auto out = tensor({c, oh, ow});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = input->values[(static_cast<std::size_t>(ch) * h + y) * w + x];
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            out->values[(static_cast<std::size_t>(ch) * oh + y * 2 + dy) * ow + x * 2 + dx] = v;
      }

  auto backward = [input, out, c, h, w, oh, ow]() {
    input->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double g = 0.0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              g += out->grad[(static_cast<std::size_t>(ch) * oh + y * 2 + dy) * ow + x * 2 + dx];
          input->grad[(static_cast<std::size_t>(ch) * h + y) * w + x] += g;
        }
  };
  return tape.record({input}, out, backward);
}

TensorPtr dense(Tape& tape, const TensorPtr& input, const TensorPtr& weights,
                const TensorPtr& bias) {
  if (input->shape.size() != 1) shape_error("dense", "input must be 1-D, got " + shape_str(input->shape));
  if (weights->shape.size() != 2) shape_error("dense", "weights must be [m,n], got " + shape_str(weights->shape));
  const int n = input->dim(0);
  const int m = weights->dim(0);
  if (weights->dim(1) != n)
    shape_error("dense", "weights " + shape_str(weights->shape) + " do not match input length " +
                             std::to_string(n));
  if (bias->shape != std::vector<int>{m})
    shape_error("dense", "bias must be [" + std::to_string(m) + "], got " + shape_str(bias->shape));

  auto out = tensor({m});
  for (int i = 0; i < m; ++i) {
    double acc = bias->values[i];
    const double* wrow = weights->values.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) acc += wrow[j] * input->values[j];
    out->values[i] = acc;
  }

  auto backward = [input, weights, bias, out, m, n]() {
    input->ensure_grad();
    weights->ensure_grad();
    bias->ensure_grad();
    for (int i = 0; i < m; ++i) {
      const double g = out->grad[i];
      if (g == 0.0) continue;
      bias->grad[i] += g;
      const double* wrow = weights->values.data() + static_cast<std::size_t>(i) * n;
      double* gwrow = weights->grad.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        gwrow[j] += g * input->values[j];
        input->grad[j] += g * wrow[j];
      }
    }
  };
  return tape.record({input, weights, bias}, out, backward);
}

TensorPtr activation(Tape& tape, const TensorPtr& input, Activation kind) {
  auto out = tensor(input->shape);
  if (kind == Activation::kRelu) {
    for (std::size_t i = 0; i < input->size(); ++i)
      out->values[i] = input->values[i] > 0.0 ? input->values[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < input->size(); ++i)
      out->values[i] = 1.0 / (1.0 + std::exp(-input->values[i]));
  }

  auto backward = [input, out, kind]() {
    input->ensure_grad();
    if (kind == Activation::kRelu) {
      for (std::size_t i = 0; i < input->size(); ++i)
        if (input->values[i] > 0.0) input->grad[i] += out->grad[i];
    } else {
      for (std::size_t i = 0; i < input->size(); ++i) {
        const double s = out->values[i];
        input->grad[i] += out->grad[i] * s * (1.0 - s);
      }
    }
  };
  return tape.record({input}, out, backward);
}

TensorPtr reshape(Tape& tape, const TensorPtr& input, std::vector<int> shape) {
  if (shape_numel(shape) != input->size())
    shape_error("reshape", "cannot view " + shape_str(input->shape) + " as " + shape_str(shape));
  auto out = tensor(std::move(shape), input->values);
  auto backward = [input, out]() {
    input->ensure_grad();
    for (std::size_t i = 0; i < input->size(); ++i) input->grad[i] += out->grad[i];
  };
  return tape.record({input}, out, backward);
}

TensorPtr narrow(Tape& tape, const TensorPtr& input, int start, int length) {
  if (input->shape.size() != 1) shape_error("narrow", "input must be 1-D, got " + shape_str(input->shape));
  if (start < 0 || length <= 0 || start + length > input->dim(0))
    shape_error("narrow", "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                              ") out of bounds for length " + std::to_string(input->dim(0)));
  auto out = tensor({length});
  std::copy_n(input->values.begin() + start, length, out->values.begin());
  auto backward = [input, out, start, length]() {
    input->ensure_grad();
    for (int i = 0; i < length; ++i) input->grad[static_cast<std::size_t>(start) + i] += out->grad[i];
  };
  return tape.record({input}, out, backward);
}

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape)
    shape_error("add", shape_str(a->shape) + " vs " + shape_str(b->shape));
  auto out = tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] + b->values[i];
  auto backward = [a, b, out]() {
    a->ensure_grad();
    b->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) {
      a->grad[i] += out->grad[i];
      b->grad[i] += out->grad[i];
    }
  };
  return tape.record({a, b}, out, backward);
}

TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape)
    shape_error("mul", shape_str(a->shape) + " vs " + shape_str(b->shape));
  auto out = tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] * b->values[i];
  auto backward = [a, b, out]() {
    a->ensure_grad();
    b->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) {
      a->grad[i] += out->grad[i] * b->values[i];
      b->grad[i] += out->grad[i] * a->values[i];
    }
  };
  return tape.record({a, b}, out, backward);
}

TensorPtr scale(Tape& tape, const TensorPtr& a, double factor) {
  auto out = tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] * factor;
  auto backward = [a, out, factor]() {
    a->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * factor;
  };
  return tape.record({a}, out, backward);
}

TensorPtr sum(Tape& tape, const TensorPtr& a) {
  double acc = 0.0;
  for (double v : a->values) acc += v;
  auto out = scalar_tensor(acc);
  auto backward = [a, out]() {
    a->ensure_grad();
    const double g = out->grad[0];
    for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += g;
  };
  return tape.record({a}, out, backward);
}

TensorPtr clamp(Tape& tape, const TensorPtr& a, double lo, double hi) {
  if (lo > hi) shape_error("clamp", "lo > hi");
  auto out = tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->values[i] = std::min(std::max(a->values[i], lo), hi);
  auto backward = [a, out, lo, hi]() {
    a->ensure_grad();
    for (std::size_t i = 0; i < a->size(); ++i)
      if (a->values[i] > lo && a->values[i] < hi) a->grad[i] += out->grad[i];
  };
  return tape.record({a}, out, backward);
}

TensorPtr gaussian_sample(Tape& tape, const TensorPtr& mu, const TensorPtr& log_variance,
                          const std::vector<double>& noise) {
  if (mu->shape != log_variance->shape)
    shape_error("gaussian_sample", shape_str(mu->shape) + " vs " + shape_str(log_variance->shape));
  if (noise.size() != mu->size())
    shape_error("gaussian_sample", "noise length " + std::to_string(noise.size()) +
                                       " does not match " + shape_str(mu->shape));
  auto out = tensor(mu->shape);
  auto eps = std::make_shared<std::vector<double>>(noise);
  for (std::size_t i = 0; i < mu->size(); ++i)
    out->values[i] = mu->values[i] + std::exp(0.5 * log_variance->values[i]) * (*eps)[i];
  auto backward = [mu, log_variance, out, eps]() {
    mu->ensure_grad();
    log_variance->ensure_grad();
    for (std::size_t i = 0; i < mu->size(); ++i) {
      const double g = out->grad[i];
      mu->grad[i] += g;
      log_variance->grad[i] += g * (*eps)[i] * 0.5 * std::exp(0.5 * log_variance->values[i]);
    }
  };
  return tape.record({mu, log_variance}, out, backward);
}

TensorPtr axis_logits(Tape& tape, const TensorPtr& z, int axis, const TensorPtr& weights,
                      const TensorPtr& bias) {
  if (z->shape.size() != 1) shape_error("axis_logits", "z must be 1-D, got " + shape_str(z->shape));
  if (axis < 0 || axis >= z->dim(0))
    throw std::out_of_range("axis_logits: axis " + std::to_string(axis) + " out of range for " +
                            shape_str(z->shape));
  if (weights->shape.size() != 1 || weights->shape != bias->shape)
    shape_error("axis_logits", "weights " + shape_str(weights->shape) + " vs bias " + shape_str(bias->shape));
  const int n = weights->dim(0);
  auto out = tensor({n});
  const double zi = z->values[static_cast<std::size_t>(axis)];
  for (int i = 0; i < n; ++i) out->values[i] = zi * weights->values[i] + bias->values[i];
  auto backward = [z, weights, bias, out, axis, n]() {
    z->ensure_grad();
    weights->ensure_grad();
    bias->ensure_grad();
    const double zi = z->values[static_cast<std::size_t>(axis)];
    double gz = 0.0;
    for (int i = 0; i < n; ++i) {
      const double g = out->grad[i];
      gz += g * weights->values[i];
      weights->grad[i] += g * zi;
      bias->grad[i] += g;
    }
    z->grad[static_cast<std::size_t>(axis)] += gz;
  };
  return tape.record({z, weights, bias}, out, backward);
}

TensorPtr kl_divergence(Tape& tape, const TensorPtr& mu, const TensorPtr& log_variance) {
  if (mu->shape != log_variance->shape)
    shape_error("kl_divergence", shape_str(mu->shape) + " vs " + shape_str(log_variance->shape));
  double acc = 0.0;
  for (std::size_t i = 0; i < mu->size(); ++i) {
    const double m = mu->values[i], lv = log_variance->values[i];
    acc += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
  }
  auto out = scalar_tensor(acc);
  auto backward = [mu, log_variance, out]() {
    mu->ensure_grad();
    log_variance->ensure_grad();
    const double g = out->grad[0];
    for (std::size_t i = 0; i < mu->size(); ++i) {
      mu->grad[i] += g * mu->values[i];
      log_variance->grad[i] += g * 0.5 * (std::exp(log_variance->values[i]) - 1.0);
    }
  };
  return tape.record({mu, log_variance}, out, backward);
}

TensorPtr bernoulli_nll(Tape& tape, const TensorPtr& probs, const Tensor& target) {
  if (probs->shape != target.shape)
    shape_error("bernoulli_nll", shape_str(probs->shape) + " vs target " + shape_str(target.shape));
  constexpr double kLo = 1e-7, kHi = 1.0 - 1e-7;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs->size(); ++i) {
    const double p = std::min(std::max(probs->values[i], kLo), kHi);
    const double x = target.values[i];
    acc -= x * std::log(p) + (1.0 - x) * std::log(1.0 - p);
  }
  auto out = scalar_tensor(acc);
  auto x_copy = std::make_shared<std::vector<double>>(target.values);
  auto backward = [probs, out, x_copy]() {
    probs->ensure_grad();
    const double g = out->grad[0];
    for (std::size_t i = 0; i < probs->size(); ++i) {
      const double raw = probs->values[i];
      if (raw <= kLo || raw >= kHi) continue;  // clamped: flat
      const double x = (*x_copy)[i];
      probs->grad[i] += g * ((1.0 - x) / (1.0 - raw) - x / raw);
    }
  };
  return tape.record({probs}, out, backward);
}

TensorPtr softmax_cross_entropy(Tape& tape, const TensorPtr& logits, int target) {
  if (logits->shape.size() != 1)
    shape_error("softmax_cross_entropy", "logits must be 1-D, got " + shape_str(logits->shape));
  const int n = logits->dim(0);
  if (target < 0 || target >= n)
    throw std::out_of_range("softmax_cross_entropy: target " + std::to_string(target) +
                            " out of range for " + std::to_string(n) + " classes");
  double max_logit = logits->values[0];
  for (int i = 1; i < n; ++i) max_logit = std::max(max_logit, logits->values[i]);
  double denom = 0.0;
  for (int i = 0; i < n; ++i) denom += std::exp(logits->values[i] - max_logit);
  const double log_denom = std::log(denom) + max_logit;
  auto out = scalar_tensor(log_denom - logits->values[static_cast<std::size_t>(target)]);

  auto softmax = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) (*softmax)[i] = std::exp(logits->values[i] - log_denom);

  auto backward = [logits, out, softmax, target, n]() {
    logits->ensure_grad();
    const double g = out->grad[0];
    for (int i = 0; i < n; ++i)
      logits->grad[i] += g * ((*softmax)[i] - (i == target ? 1.0 : 0.0));
  };
  return tape.record({logits}, out, backward);
}

double grad_check(const std::function<TensorPtr(Tape&)>& f,
                  const std::vector<TensorPtr>& params, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("grad_check: epsilon must be positive");

  for (const auto& p : params) p->zero_grad();
  Tape tape;
  auto loss = f(tape);
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    p->ensure_grad();
    analytic.push_back(p->grad);
  }

  auto eval = [&f]() {
    Tape t;
    return f(t)->values[0];
  };

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = *params[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.values[i];
      p.values[i] = saved + epsilon;
      const double up = eval();
      p.values[i] = saved - epsilon;
      const double down = eval();
      p.values[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[pi][i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1.0});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace glatent
