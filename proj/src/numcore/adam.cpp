#include <cmath>

#include "hamworld/errors.hpp"
#include "hamworld/numcore.hpp"

namespace hamworld {

void adam_update(AdamState& state, std::span<double> params, std::span<const double> grads,
                 std::span<const std::uint8_t> decay_mask) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw ConfigError("adam_update: shape mismatch (params " + std::to_string(n) + ", grads " +
                      std::to_string(grads.size()) + ", state " +
                      std::to_string(state.m.size()) + ")");
  }
  if (!decay_mask.empty() && decay_mask.size() != n) {
    throw ConfigError("adam_update: decay mask length mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adam_update: non-finite gradient at index " + std::to_string(i) +
                         "; update skipped");
    }
  }

  const AdamConfig& c = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    double step = c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    if (c.weight_decay > 0.0 && (decay_mask.empty() || decay_mask[i] != 0)) {
      step += c.lr * c.weight_decay * params[i];
    }
    params[i] -= step;
  }
}

}  // namespace hamworld
