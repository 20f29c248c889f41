#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ctpir/rng.hpp"
#include "ctpir/tensor.hpp"

namespace ctpir {

enum class Activation { relu, tanh, sigmoid, identity };

Tensor activate(Activation a, const Tensor& x);
Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// Leaf with i.i.d. uniform(-bound, bound) entries.
Tensor uniform_parameter(Shape shape, double bound, Rng& rng);

// y = x W + b with W stored (in × out).
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear init(std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

struct Mlp {
  std::vector<Linear> layers;
  Activation hidden = Activation::relu;

  // dims = {in, h1, ..., out}; the last layer is linear.
  static Mlp init(const std::vector<std::size_t>& dims, Rng& rng, Activation hidden = Activation::relu);
  Tensor forward(const Tensor& x) const;
};

// Named references to trainable leaves. Tensors share storage with the
// owning model, so optimizer steps update the model in place.
class ParameterSet {
 public:
  void add(std::string name, Tensor t) { items_.emplace_back(std::move(name), std::move(t)); }
  void add(const std::string& prefix, const Linear& l);
  void add(const std::string& prefix, const Mlp& m);

  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
  std::size_t count() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

nlohmann::json tensor_to_json(const Tensor& t);
// Loads into an existing leaf of identical shape.
void tensor_assign_json(Tensor& t, const nlohmann::json& j, const std::string& name);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Applies one update from the current grads; missing grads count as zero.
  virtual void step(ParameterSet& params) = 0;
  virtual void set_learning_rate(double lr) = 0;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(ParameterSet& params) override;
  void set_learning_rate(double lr) override { lr_ = lr; }

 private:
  double lr_;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParameterSet& params) override;
  void set_learning_rate(double lr) override { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace ctpir
