#include "ctpir/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace ctpir {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

void require_rank2(const char* op, const Tensor& x) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_str(x.shape()));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Elementwise unary op: `f(x)` forward, `df(x, y)` derivative given input and
// output.
template <typename F, typename DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  BackwardFn bw;
  if (x.requires_grad()) {
    bw = [x, df](std::span<const double> y, std::span<const double> g,
                 std::span<std::vector<double>* const> grads) {
      auto& gx = *grads[0];
      const auto in = x.data();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(in[i], y[i]);
    };
  }
  return Tensor::make_op(op, x.shape(), std::move(out), {x}, std::move(bw));
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace detail {
std::uint64_t next_order() {
  thread_local std::uint64_t counter = 0;
  return ++counter;
}

bool& grad_disabled() {
  thread_local bool disabled = false;
  return disabled;
}
}  // namespace detail

// ---- Tensor ---------------------------------------------------------------

detail::Node& Tensor::node() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return *node_;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in tensor data");
  }
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  n->order = detail::next_order();
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const auto n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return from({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return from({rows, cols}, std::move(values), requires_grad);
}

std::size_t Tensor::rows() const {
  const auto& s = node().shape;
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const auto& s = node().shape;
  if (s.size() == 2) return s[1];
  return s.empty() ? 1 : s[0];
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node().value[0];
}

std::span<double> Tensor::mutable_data() {
  if (!node().is_leaf) throw ContractError("only leaf tensors may be modified in place");
  return node().value;
}

void Tensor::set_requires_grad(bool on) {
  if (!node().is_leaf) throw ContractError("requires_grad can only be toggled on leaves");
  node().requires_grad = on;
}

Tensor Tensor::detach() const { return from(shape(), node().value, false); }

Tensor Tensor::make_op(const char* op, Shape shape, std::vector<double> value,
                       std::vector<Tensor> inputs, BackwardFn backward) {
  for (double v : value) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": produced a non-finite value");
  }
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->is_leaf = false;
  n->op = op;
  n->order = detail::next_order();
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (any && backward && !detail::grad_disabled()) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (auto& t : inputs) n->inputs.push_back(t.node_);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

// ---- tape -----------------------------------------------------------------

GradientTape GradientTape::record(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  GradientTape tape;
  tape.loss_ = loss;
  if (!loss.requires_grad()) return tape;

  std::unordered_set<const detail::Node*> seen;
  std::vector<std::shared_ptr<detail::Node>> stack{loss.node_ptr()};
  seen.insert(loss.node_ptr().get());
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    for (auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in);
    }
    tape.ops_.push_back(std::move(n));
  }
  // Creation order is a topological order of the DAG.
  std::sort(tape.ops_.begin(), tape.ops_.end(),
            [](const auto& a, const auto& b) { return a->order > b->order; });
  return tape;
}

std::size_t GradientTape::replay() {
  for (auto& n : ops_) {
    if (!n->is_leaf) {
      n->grad.assign(n->value.size(), 0.0);
    } else if (n->grad.size() != n->value.size()) {
      n->grad.assign(n->value.size(), 0.0);
    }
  }
  if (ops_.empty()) return 0;
  ops_.front()->grad[0] += 1.0;

  std::size_t invoked = 0;
  std::vector<std::vector<double>*> grads;
  for (auto& n : ops_) {
    if (!n->backward) continue;
    grads.clear();
    for (auto& in : n->inputs) grads.push_back(in->requires_grad ? &in->grad : nullptr);
    n->backward(n->value, n->grad, grads);
    ++invoked;
  }
  return invoked;
}

void backward(const Tensor& loss) { GradientTape::record(loss).replay(); }

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const auto m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  BackwardFn bw = [a, b, m, k, n](std::span<const double>, std::span<const double> g,
                                  std::span<std::vector<double>* const> grads) {
    ConstMap G(g.data(), m, n);
    if (grads[0]) {
      MutMap(grads[0]->data(), m, k).noalias() += G * ConstMap(b.data().data(), k, n).transpose();
    }
    if (grads[1]) {
      MutMap(grads[1]->data(), k, n).noalias() += ConstMap(a.data().data(), m, k).transpose() * G;
    }
  };
  return Tensor::make_op("matmul", {m, n}, std::move(out), {a, b}, std::move(bw));
}

Tensor transpose(const Tensor& x) {
  require_rank2("transpose", x);
  const auto m = x.shape()[0], n = x.shape()[1];
  std::vector<double> out(m * n);
  MutMap(out.data(), n, m) = ConstMap(x.data().data(), m, n).transpose();
  BackwardFn bw = [m, n](std::span<const double>, std::span<const double> g,
                         std::span<std::vector<double>* const> grads) {
    MutMap(grads[0]->data(), m, n) += ConstMap(g.data(), n, m).transpose();
  };
  return Tensor::make_op("transpose", {n, m}, std::move(out), {x}, std::move(bw));
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
  const auto fail = [&] {
    throw DimensionError("concat on axis " + std::to_string(axis) + ": incompatible shapes " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  };
  if (a.rank() != b.rank() || axis >= a.rank()) fail();
  for (std::size_t d = 0; d < a.rank(); ++d) {
    if (d != axis && a.shape()[d] != b.shape()[d]) fail();
  }
  Shape shape = a.shape();
  shape[axis] += b.shape()[axis];

  // Concatenation is a sequence of contiguous blocks: `outer` repetitions of
  // (block_a from a, block_b from b).
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= a.shape()[d];
  const std::size_t block_a = a.size() / outer, block_b = b.size() / outer;

  std::vector<double> out;
  out.reserve(a.size() + b.size());
  for (std::size_t o = 0; o < outer; ++o) {
    auto da = a.data().subspan(o * block_a, block_a);
    auto db = b.data().subspan(o * block_b, block_b);
    out.insert(out.end(), da.begin(), da.end());
    out.insert(out.end(), db.begin(), db.end());
  }
  BackwardFn bw = [outer, block_a, block_b](std::span<const double>, std::span<const double> g,
                                            std::span<std::vector<double>* const> grads) {
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = g.data() + o * (block_a + block_b);
      if (grads[0]) {
        double* dst = grads[0]->data() + o * block_a;
        for (std::size_t i = 0; i < block_a; ++i) dst[i] += src[i];
      }
      if (grads[1]) {
        double* dst = grads[1]->data() + o * block_b;
        for (std::size_t i = 0; i < block_b; ++i) dst[i] += src[block_a + i];
      }
    }
  };
  return Tensor::make_op("concat", std::move(shape), std::move(out), {a, b}, std::move(bw));
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2("slice_cols", x);
  const auto m = x.shape()[0], n = x.shape()[1];
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of bounds for " + shape_str(x.shape()));
  }
  const auto w = end - begin;
  std::vector<double> out(m * w);
  for (std::size_t r = 0; r < m; ++r) {
    std::copy_n(x.data().data() + r * n + begin, w, out.data() + r * w);
  }
  BackwardFn bw = [m, n, w, begin](std::span<const double>, std::span<const double> g,
                                   std::span<std::vector<double>* const> grads) {
    auto& gx = *grads[0];
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < w; ++c) gx[r * n + begin + c] += g[r * w + c];
    }
  };
  return Tensor::make_op("slice_cols", {m, w}, std::move(out), {x}, std::move(bw));
}

// ---- binary elementwise ---------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  BackwardFn bw = [](std::span<const double>, std::span<const double> g,
                     std::span<std::vector<double>* const> grads) {
    for (auto* gx : grads) {
      if (!gx) continue;
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    }
  };
  return Tensor::make_op("add", a.shape(), std::move(out), {a, b}, std::move(bw));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  BackwardFn bw = [](std::span<const double>, std::span<const double> g,
                     std::span<std::vector<double>* const> grads) {
    if (grads[0]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*grads[0])[i] += g[i];
    }
    if (grads[1]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*grads[1])[i] -= g[i];
    }
  };
  return Tensor::make_op("sub", a.shape(), std::move(out), {a, b}, std::move(bw));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  BackwardFn bw = [a, b](std::span<const double>, std::span<const double> g,
                         std::span<std::vector<double>* const> grads) {
    if (grads[0]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*grads[0])[i] += g[i] * b[i];
    }
    if (grads[1]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*grads[1])[i] += g[i] * a[i];
    }
  };
  return Tensor::make_op("mul", a.shape(), std::move(out), {a, b}, std::move(bw));
}

Tensor add_row(const Tensor& x, const Tensor& b) {
  const auto m = x.rows(), n = x.cols();
  if (b.size() != n || b.rows() != 1) {
    throw DimensionError("add_row: row vector " + shape_str(b.shape()) +
                         " does not match columns of " + shape_str(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += b[c];
  }
  BackwardFn bw = [m, n](std::span<const double>, std::span<const double> g,
                         std::span<std::vector<double>* const> grads) {
    if (grads[0]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*grads[0])[i] += g[i];
    }
    if (grads[1]) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) (*grads[1])[c] += g[r * n + c];
      }
    }
  };
  return Tensor::make_op("add_row", x.shape(), std::move(out), {x, b}, std::move(bw));
}

Tensor scale(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) throw DimensionError("scale: factor must be a scalar, got " + shape_str(s.shape()));
  const double c = s[0];
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x[i];
  BackwardFn bw = [x, c](std::span<const double>, std::span<const double> g,
                         std::span<std::vector<double>* const> grads) {
    if (grads[0]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*grads[0])[i] += c * g[i];
    }
    if (grads[1]) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
      (*grads[1])[0] += acc;
    }
  };
  return Tensor::make_op("scale", x.shape(), std::move(out), {x, s}, std::move(bw));
}

Tensor scale(const Tensor& x, double c) {
  return unary("scale_const", x, [c](double v) { return c * v; },
               [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary("add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

// ---- unary elementwise ----------------------------------------------------

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& x) {
  return unary("softplus", x, stable_softplus, [](double v, double) { return stable_sigmoid(v); });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(std::clamp(v, -kExpClamp, kExpClamp)); },
               [](double v, double y) { return std::abs(v) <= kExpClamp ? y : 0.0; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary("log", x, [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}

Tensor log1p(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > -1.0)) throw DomainError("log1p of value <= -1: " + std::to_string(v));
  }
  return unary("log1p", x, [](double v) { return std::log1p(v); },
               [](double v, double) { return 1.0 / (1.0 + v); });
}

Tensor abs(const Tensor& x) {
  return unary("abs", x, [](double v) { return std::abs(v); },
               [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
  }
  return unary("sqrt", x, [](double v) { return std::sqrt(v); },
               [](double, double y) { return 0.5 / y; });
}

Tensor elementwise(Elementwise kind, std::span<const Tensor> inputs) {
  const bool binary = kind == Elementwise::add || kind == Elementwise::mul;
  if (inputs.size() != (binary ? 2u : 1u)) {
    throw ContractError("elementwise: wrong number of inputs (" + std::to_string(inputs.size()) + ")");
  }
  switch (kind) {
    case Elementwise::add: return add(inputs[0], inputs[1]);
    case Elementwise::mul: return mul(inputs[0], inputs[1]);
    case Elementwise::sigmoid: return sigmoid(inputs[0]);
    case Elementwise::tanh: return tanh(inputs[0]);
    case Elementwise::relu: return relu(inputs[0]);
    case Elementwise::softplus: return softplus(inputs[0]);
    case Elementwise::exp: return exp(inputs[0]);
    case Elementwise::log: return log(inputs[0]);
  }
  throw ContractError("elementwise: unknown kind");
}

// ---- reductions -----------------------------------------------------------

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  BackwardFn bw = [](std::span<const double>, std::span<const double> g,
                     std::span<std::vector<double>* const> grads) {
    for (auto& v : *grads[0]) v += g[0];
  };
  return Tensor::make_op("sum", {1}, {acc}, {x}, std::move(bw));
}

Tensor mean(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double inv = 1.0 / static_cast<double>(x.size());
  BackwardFn bw = [inv](std::span<const double>, std::span<const double> g,
                        std::span<std::vector<double>* const> grads) {
    for (auto& v : *grads[0]) v += g[0] * inv;
  };
  return Tensor::make_op("mean", {1}, {acc * inv}, {x}, std::move(bw));
}

// ---- row mixing -----------------------------------------------------------

void RowMix::add_row(std::span<const std::size_t> sources, std::span<const double> coefs) {
  if (sources.size() != coefs.size()) throw ContractError("RowMix::add_row: sources/coefs length differ");
  src.insert(src.end(), sources.begin(), sources.end());
  coef.insert(coef.end(), coefs.begin(), coefs.end());
  offsets.push_back(src.size());
  ++out_rows;
}

void RowMix::add_row_uniform(std::span<const std::size_t> sources, double c) {
  src.insert(src.end(), sources.begin(), sources.end());
  coef.insert(coef.end(), sources.size(), c);
  offsets.push_back(src.size());
  ++out_rows;
}

Tensor mix_rows(const Tensor& x, const RowMix& mix) {
  require_rank2("mix_rows", x);
  const auto n = x.shape()[0], d = x.shape()[1];
  if (mix.out_rows == 0) throw DimensionError("mix_rows: no output rows");
  for (auto s : mix.src) {
    if (s >= n) {
      throw DimensionError("mix_rows: source row " + std::to_string(s) + " out of range for " +
                           shape_str(x.shape()));
    }
  }
  std::vector<double> out(mix.out_rows * d, 0.0);
  const double* in = x.data().data();
  for (std::size_t r = 0; r < mix.out_rows; ++r) {
    double* dst = out.data() + r * d;
    for (std::size_t k = mix.offsets[r]; k < mix.offsets[r + 1]; ++k) {
      const double c = mix.coef[k];
      const double* s = in + mix.src[k] * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += c * s[j];
    }
  }
  BackwardFn bw = [mix, d](std::span<const double>, std::span<const double> g,
                           std::span<std::vector<double>* const> grads) {
    auto& gx = *grads[0];
    for (std::size_t r = 0; r < mix.out_rows; ++r) {
      const double* src = g.data() + r * d;
      for (std::size_t k = mix.offsets[r]; k < mix.offsets[r + 1]; ++k) {
        const double c = mix.coef[k];
        double* dst = gx.data() + mix.src[k] * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += c * src[j];
      }
    }
  };
  return Tensor::make_op("mix_rows", {mix.out_rows, d}, std::move(out), {x}, std::move(bw));
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  RowMix mix;
  for (auto r : rows) mix.add_row_uniform(std::span<const std::size_t>(&r, 1), 1.0);
  return mix_rows(x, mix);
}

}  // namespace ctpir
