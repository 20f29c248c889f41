#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ctpir {

struct GradCheckResult {
  std::string name;
  std::uint64_t seed = 0;
  double error = 0.0;
};

// Central-difference checks of every differentiable op and of the layer,
// encoder, head and end-to-end compositions on small random instances.
std::vector<GradCheckResult> run_gradient_suite(std::span<const std::uint64_t> seeds);

}  // namespace ctpir
