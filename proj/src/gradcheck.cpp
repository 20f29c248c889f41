#include "ctpir/gradcheck.hpp"

#include "ctpir/rng.hpp"

#include <algorithm>
#include <cmath>

namespace ctpir {

namespace {

double eval_scalar(const std::function<Tensor()>& f) {
  const Tensor y = f();
  if (y.size() != 1) throw ContractError("grad_check: function must return a scalar");
  const double v = y.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

double grad_check_params(const std::function<Tensor()>& f, std::span<Tensor> params, double eps) {
  for (auto& p : params) {
    if (!p.is_leaf()) throw ContractError("grad_check: parameters must be leaf tensors");
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    const Tensor y = f();
    backward(y);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
    if (analytic.back().empty()) analytic.back().assign(p.size(), 0.0);
    p.zero_grad();
  }

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double plus = eval_scalar(f);
      values[i] = saved - eps;
      const double minus = eval_scalar(f);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      worst = std::max(worst, relative_error(analytic[k][i], numeric));
    }
  }
  return worst;
}

double grad_check_directions(const std::function<Tensor()>& f, std::span<Tensor> params, std::uint64_t seed,
                             double eps) {
  for (auto& p : params) {
    if (!p.is_leaf()) throw ContractError("grad_check: parameters must be leaf tensors");
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    const Tensor y = f();
    backward(y);
  }
  Rng rng(seed);
  double worst = 0.0;
  for (auto& p : params) {
    std::vector<double> g(p.grad().begin(), p.grad().end());
    if (g.empty()) g.assign(p.size(), 0.0);
    p.zero_grad();
    auto values = p.mutable_data();
    const std::vector<double> saved(values.begin(), values.end());
    std::vector<double> dir(values.size());
    double analytic = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) {
      dir[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
      analytic += g[i] * dir[i];
    }
    for (std::size_t i = 0; i < dir.size(); ++i) values[i] = saved[i] + eps * dir[i];
    const double plus = eval_scalar(f);
    for (std::size_t i = 0; i < dir.size(); ++i) values[i] = saved[i] - eps * dir[i];
    const double minus = eval_scalar(f);
    std::copy(saved.begin(), saved.end(), values.begin());
    worst = std::max(worst, relative_error(analytic, (plus - minus) / (2.0 * eps)));
  }
  return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  Tensor leaf = Tensor::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
  Tensor params[] = {leaf};
  return grad_check_params([&] { return f(leaf); }, params, eps);
}

}  // namespace ctpir
