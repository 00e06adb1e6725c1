#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace glatent {

// Dense row-major tensor of doubles with an optional gradient buffer of the
// same shape. The gradient stays empty until backward first touches it.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  bool has_grad() const { return !grad.empty(); }
  void ensure_grad();
  void zero_grad();
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr tensor(std::vector<int> shape);
TensorPtr tensor(std::vector<int> shape, std::vector<double> values);
TensorPtr scalar_tensor(double value);

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);
bool all_finite(const Tensor& t);

// Tape of recorded operations. Operations are appended in execution order,
// so the list is already topologically sorted; backward() walks it once in
// reverse, accumulating into input gradients.
class Tape {
 public:
  TensorPtr record(std::vector<TensorPtr> inputs, TensorPtr output,
                   std::function<void()> backward_rule);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded rule once, newest
  // first. Gradients accumulate; callers zero them between passes.
  void backward(const TensorPtr& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::vector<TensorPtr> inputs;
    TensorPtr output;
    std::function<void()> backward_rule;
  };
  std::vector<Node> nodes_;
};

enum class Activation { kRelu, kSigmoid };

// --- differentiable operations -------------------------------------------

// Valid cross-correlation with per-output-channel bias.
// input [Cin,H,W], kernels [Cout,Cin,k,k], bias [Cout] -> [Cout,H-k+1,W-k+1].
TensorPtr conv2d_valid(Tape& tape, const TensorPtr& input, const TensorPtr& kernels,
                       const TensorPtr& bias);

struct MaxPoolResult {
  TensorPtr output;                  // [C,H/2,W/2]
  std::vector<std::int32_t> argmax;  // flat input index per output cell
};

// 2x2 max pooling; even extents required. Ties go to the lowest flat index
// and backward routes each gradient to its argmax position only.
MaxPoolResult maxpool2_with_indices(Tape& tape, const TensorPtr& input);
TensorPtr maxpool2(Tape& tape, const TensorPtr& input);

// 2x2 value-replication upsampling; backward sums the four incoming grads.
TensorPtr unpool2(Tape& tape, const TensorPtr& input);

// Affine map: input [n], weights [m,n], bias [m] -> [m].
TensorPtr dense(Tape& tape, const TensorPtr& input, const TensorPtr& weights,
                const TensorPtr& bias);

// Elementwise relu or sigmoid. The relu derivative at exactly 0 is 0.
TensorPtr activation(Tape& tape, const TensorPtr& input, Activation kind);

TensorPtr reshape(Tape& tape, const TensorPtr& input, std::vector<int> shape);

// 1-D slice [start, start+length).
TensorPtr narrow(Tape& tape, const TensorPtr& input, int start, int length);

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Tape& tape, const TensorPtr& a, double factor);
TensorPtr sum(Tape& tape, const TensorPtr& a);

// Elementwise clamp; gradient passes through strictly inside [lo, hi].
TensorPtr clamp(Tape& tape, const TensorPtr& a, double lo, double hi);

// z = mu + exp(0.5 * log_variance) * noise, with noise held constant.
TensorPtr gaussian_sample(Tape& tape, const TensorPtr& mu, const TensorPtr& log_variance,
                          const std::vector<double>& noise);

// logits = z[axis] * weights + bias; touches only coordinate `axis` of z.
TensorPtr axis_logits(Tape& tape, const TensorPtr& z, int axis, const TensorPtr& weights,
                      const TensorPtr& bias);

// --- the three loss primitives --------------------------------------------

// 0.5 * sum_c (mu_c^2 + exp(lv_c) - 1 - lv_c), the closed-form divergence of
// a diagonal Gaussian from the isotropic unit normal.
TensorPtr kl_divergence(Tape& tape, const TensorPtr& mu, const TensorPtr& log_variance);

// -sum [x log p + (1-x) log(1-p)] with p clamped to [1e-7, 1-1e-7] first.
TensorPtr bernoulli_nll(Tape& tape, const TensorPtr& probs, const Tensor& target);

// -log softmax(logits)[target], computed with the max-shift trick.
TensorPtr softmax_cross_entropy(Tape& tape, const TensorPtr& logits, int target);

// --- gradient checking ------------------------------------------------------

// Compares analytic gradients of f (which must rebuild the same scalar loss
// deterministically on every call) against central differences
// (f(p+eps) - f(p-eps)) / 2eps over every element of every listed parameter.
// Returns the worst discrepancy |a - n| / max(|a|, |n|, 1). Callers keep
// inputs away from relu kinks and pooling ties, where the loss is not
// differentiable.
double grad_check(const std::function<TensorPtr(Tape&)>& f,
                  const std::vector<TensorPtr>& params, double epsilon);

}  // namespace glatent
