#pragma once

#include <array>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ctpir/nn.hpp"
#include "ctpir/series.hpp"
#include "ctpir/tensor.hpp"

namespace ctpir {

inline constexpr double kXiFloor = 1e-3;

// Four independent MLPs producing the raw values behind theta1, theta2,
// theta3 and xi.
struct ParamHeads {
  std::array<Mlp, 4> heads;

  // dims: input -> hidden... -> 1.
  static ParamHeads init(std::size_t input_dim, const std::vector<std::size_t>& hidden, Rng& rng);
  void add_to(ParameterSet& params) const;
};

struct TrajectoryParams {
  double theta1 = 1.0;  // ceiling
  double theta2 = 1.0;  // rise rate
  double theta3 = 0.0;  // lag midpoint in years after T
  double xi = 1.0;      // smoothness
};

// Column tensors (P × 1), one row per publication.
struct TrajectoryTensors {
  Tensor theta1, theta2, theta3, xi;
};

TrajectoryTensors logistic_params(const Tensor& momentum, const ParamHeads& heads);
TrajectoryParams logistic_params_value(std::span<const double> momentum, const ParamHeads& heads);

// theta1 / (1 + xi * exp(-theta2 * (t - theta3)))^(1/xi)
double citation_count(const TrajectoryParams& p, double t);
CitationSeries trajectory(const TrajectoryParams& p, int T, std::size_t N);

// Differentiable Richards curve: (P × 1) params, evaluated at `times` → (P × N).
Tensor richards_curve(const TrajectoryTensors& p, std::span<const double> times);

struct LognormalParams {
  double scale = 1.0;
  double mu = 0.0;
  double sigma = 1.0;
};

struct LognormalTensors {
  Tensor scale, mu, sigma;
};

double standard_normal_cdf(double z);
CitationSeries lognormal_trajectory(const LognormalParams& p, int T, std::size_t N);
// scale = softplus(head 0), mu = head 2, sigma = softplus(head 3) + 1e-3.
LognormalTensors lognormal_params(const Tensor& momentum, const ParamHeads& heads);
Tensor lognormal_curve(const LognormalTensors& p, std::span<const double> times);

// Log-count errors with log1p(count); both require non-negative counts.
double male(std::span<const CitationSeries> pred, std::span<const CitationSeries> obs);
double rmsle(std::span<const CitationSeries> pred, std::span<const CitationSeries> obs);
Tensor male_loss(const Tensor& pred, const Tensor& obs);
Tensor rmsle_loss(const Tensor& pred, const Tensor& obs);

// Rows "year,publication_id,predicted,observed" for every predicted year.
void write_trajectory_csv(std::ostream& out, const std::map<std::string, CitationSeries>& predicted,
                          const std::map<std::string, CitationSeries>& observed);

}  // namespace ctpir
