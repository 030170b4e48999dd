#pragma once

#include <cstdint>
#include <vector>

#include "diffgmm/grad/params.hpp"

namespace diffgmm::grad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;

  static AdamState zeros_like(const ParamStore& params);
};

/// One bias-corrected Adam update of every parameter.
void adam_step(ParamStore& params, const Gradients& grads, AdamState& state, const AdamConfig& cfg);

}  // namespace diffgmm::grad
