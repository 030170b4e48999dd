#include "diffgmm/grad/adam.hpp"

#include <cmath>

#include "diffgmm/errors.hpp"

namespace diffgmm::grad {

AdamState AdamState::zeros_like(const ParamStore& params) {
  AdamState s;
  for (const auto& p : params.all()) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(ParamStore& params, const Gradients& grads, AdamState& state, const AdamConfig& cfg) {
  if (grads.per_param.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw_shape("adam_step: parameter, gradient and state counts differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].values;
    const auto& g = grads.per_param[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (g.size() != w.size() || m.size() != w.size() || v.size() != w.size()) {
      throw_shape("adam_step: array size mismatch for " + params[i].name);
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace diffgmm::grad
