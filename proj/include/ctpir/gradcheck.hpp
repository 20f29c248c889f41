#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "ctpir/tensor.hpp"

namespace ctpir {

inline constexpr double kGradCheckEps = 1e-5;

// Compares reverse-mode gradients with central differences. The returned
// error is max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, 1e-8).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double eps = kGradCheckEps);

// Same check over every coordinate of several leaf parameters used inside `f`.
// Parameter values are restored before returning; their grads are cleared.
double grad_check_params(const std::function<Tensor()>& f, std::span<Tensor> params,
                         double eps = kGradCheckEps);

// Directional form for large parameter sets: for each parameter tensor,
// compares g·v with the central difference along a random ±1 direction v.
// Per-coordinate errors are dominated by rounding once a coordinate's
// gradient falls near 1e-8, which many-parameter models hit by chance.
double grad_check_directions(const std::function<Tensor()>& f, std::span<Tensor> params, std::uint64_t seed,
                             double eps = kGradCheckEps);

}  // namespace ctpir
