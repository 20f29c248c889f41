#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ctpir/errors.hpp"

namespace ctpir {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class Tensor;

// Backward rule of one recorded op: given the op's output value and
// dL/d(output), accumulate into the gradient buffers of the inputs. Entries of
// `input_grads` are null for inputs that do not require a gradient.
using BackwardFn = std::function<void(std::span<const double> out_value,
                                      std::span<const double> out_grad,
                                      std::span<std::vector<double>* const> input_grads)>;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::uint64_t order = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

std::uint64_t next_order();
bool& grad_disabled();

}  // namespace detail

// While alive, ops on this thread record no backward graph.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_disabled()) { detail::grad_disabled() = true; }
  ~NoGradGuard() { detail::grad_disabled() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Dense row-major float64 array. Results of ops record their inputs so a
// scalar loss can be differentiated with backward(). Values are immutable
// once produced by an op; only leaves may be edited (optimizers, gradcheck).
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node().shape; }
  std::size_t rank() const { return node().shape.size(); }
  std::size_t size() const { return node().value.size(); }
  // Matrix view: rank-1 tensors are treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node().value; }
  double operator[](std::size_t i) const { return node().value[i]; }
  double at(std::size_t r, std::size_t c) const { return node().value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node().requires_grad; }
  bool is_leaf() const { return node().is_leaf; }
  bool has_grad() const { return !node().grad.empty(); }
  std::span<const double> grad() const { return node().grad; }
  void zero_grad() { node().grad.clear(); }

  // Leaf-only mutation (parameter updates, finite-difference probes).
  std::span<double> mutable_data();
  void set_requires_grad(bool on);

  Tensor detach() const;
  const char* op_name() const { return node().op; }
  std::uint64_t order() const { return node().order; }

  // Records a new op result. `backward` may be empty when no input requires
  // a gradient. Throws NumericError if `value` holds NaN/Inf.
  static Tensor make_op(const char* op, Shape shape, std::vector<double> value,
                        std::vector<Tensor> inputs, BackwardFn backward);

  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& node() const;

  std::shared_ptr<detail::Node> node_;
};

// Reverse-order record of every op reachable from a scalar loss.
class GradientTape {
 public:
  static GradientTape record(const Tensor& loss);

  std::size_t size() const { return ops_.size(); }
  // Runs each recorded backward rule exactly once, latest op first. Returns
  // the number of rules invoked.
  std::size_t replay();

 private:
  Tensor loss_;
  std::vector<std::shared_ptr<detail::Node>> ops_;
};

// Populates grad() on every requires_grad tensor reachable from `loss`.
// Leaf gradients accumulate across calls until zero_grad().
void backward(const Tensor& loss);

// Linear algebra and structure.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor transpose(const Tensor& x);

// Elementwise, equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// x (n×d) plus a row vector b (1×d or d) added to every row.
Tensor add_row(const Tensor& x, const Tensor& b);
// x times a learnable scalar tensor s (shape {1} or {}).
Tensor scale(const Tensor& x, const Tensor& s);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor log1p(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);

enum class Elementwise { add, mul, sigmoid, tanh, relu, softplus, exp, log };
Tensor elementwise(Elementwise kind, std::span<const Tensor> inputs);

// Reductions to shape {1}.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Sparse row mixing with constant coefficients: out.row(i) =
// sum_k coef[k] * x.row(src[k]) for k in [offsets[i], offsets[i+1]).
struct RowMix {
  std::size_t out_rows = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> src;
  std::vector<double> coef;

  void add_row(std::span<const std::size_t> sources, std::span<const double> coefs);
  void add_row_uniform(std::span<const std::size_t> sources, double coef);
};
Tensor mix_rows(const Tensor& x, const RowMix& mix);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

// exp arguments are clamped to [-kExpClamp, kExpClamp].
inline constexpr double kExpClamp = 30.0;

}  // namespace ctpir
