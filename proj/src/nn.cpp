#include "ctpir/nn.hpp"

#include <cmath>

namespace ctpir {

Tensor activate(Activation a, const Tensor& x) {
  switch (a) {
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::identity: return x;
  }
  return x;
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Tensor uniform_parameter(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = uniform_parameter({in, out}, bound, rng);
  l.bias = uniform_parameter({1, out}, bound, rng);
  return l;
}

Tensor Linear::forward(const Tensor& x) const { return add_row(matmul(x, weight), bias); }

Mlp Mlp::init(const std::vector<std::size_t>& dims, Rng& rng, Activation hidden) {
  if (dims.size() < 2) throw ConfigError("an MLP needs at least input and output sizes");
  Mlp m;
  m.hidden = hidden;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) m.layers.push_back(Linear::init(dims[i], dims[i + 1], rng));
  return m;
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) h = activate(hidden, h);
  }
  return h;
}

void ParameterSet::add(const std::string& prefix, const Linear& l) {
  add(prefix + ".weight", l.weight);
  add(prefix + ".bias", l.bias);
}

void ParameterSet::add(const std::string& prefix, const Mlp& m) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) add(prefix + "." + std::to_string(i), m.layers[i]);
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += t.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : items_) t.zero_grad();
}

nlohmann::json tensor_to_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}};
}

void tensor_assign_json(Tensor& t, const nlohmann::json& j, const std::string& name) {
  const auto shape = j.at("shape").get<Shape>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape != t.shape() || data.size() != t.size()) {
    throw DimensionError("parameter '" + name + "': stored shape " + shape_str(shape) + " does not match " +
                         shape_str(t.shape()));
  }
  auto dst = t.mutable_data();
  std::copy(data.begin(), data.end(), dst.begin());
}

void Sgd::step(ParameterSet& params) {
  for (auto& [name, t] : params.items()) {
    if (!t.has_grad()) continue;
    auto v = t.mutable_data();
    const auto g = t.grad();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr_ * g[i];
  }
}

void Adam::step(ParameterSet& params) {
  auto& items = params.items();
  if (m_.empty()) {
    for (const auto& [name, t] : items) {
      m_.emplace_back(t.size(), 0.0);
      v_.emplace_back(t.size(), 0.0);
    }
  }
  if (m_.size() != items.size()) throw ContractError("Adam: parameter set changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < items.size(); ++k) {
    auto& t = items[k].second;
    auto v = t.mutable_data();
    const bool has = t.has_grad();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double g = has ? t.grad()[i] : 0.0;
      m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
      v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
      v[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
    }
  }
}

}  // namespace ctpir
