#include <cmath>
#include <numbers>

#include "hamworld/errors.hpp"
#include "hamworld/hamodel.hpp"

namespace hamworld {

Vec DiagGaussian::variance() const {
  Vec v(log_var.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(log_var[i]);
  return v;
}

double DiagGaussian::log_prob(std::span<const double> x) const {
  if (x.size() != mean.size()) throw ConfigError("DiagGaussian::log_prob: length mismatch");
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i] - mean[i];
    s += log2pi + log_var[i] + r * r * std::exp(-log_var[i]);
  }
  return -0.5 * s;
}

void PriorVariance::validate() const {
  for (double v : log_var) {
    if (!std::isfinite(v) || !(std::exp(v) > 0.0)) {
      throw NumericError("PriorVariance: log-variance must be finite with positive exp");
    }
  }
}

void ema_update(TargetHamiltonian& target, const HamiltonianNet& online, double rho) {
  if (!(target.net.spec() == online.spec())) {
    throw ConfigError("ema_update: target and online specs differ");
  }
  if (rho < 0.0 || rho > 1.0) throw ConfigError("ema_update: rho must lie in [0, 1]");
  auto& t = target.net.params().raw();
  const auto& o = online.params().raw();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rho * t[i] + (1.0 - rho) * o[i];
}

DiagGaussian prior_predict(const HamiltonianNet& h, const InputMatrixNet& g,
                           const PriorVariance& prior, const IntegratorConfig& cfg,
                           const PhaseState& z, std::span<const double> a) {
  if (prior.log_var.size() != 2 * z.dof()) {
    throw ConfigError("prior_predict: prior variance length must be 2*N*d");
  }
  const LearnedField field(h, g);
  DiagGaussian out;
  out.mean = integrate_step(field, cfg, z, a).flat();
  out.log_var = prior.log_var;
  return out;
}

void euler_mean_vjp(const HamiltonianNet& h, const InputMatrixNet& g, const PhaseState& z,
                    std::span<const double> a, double dt, std::span<const double> upstream,
                    std::span<double> h_grad, std::span<double> g_grad,
                    std::span<double> z_grad) {
  const std::size_t k = z.dof();
  if (upstream.size() != 2 * k) throw ConfigError("euler_mean_vjp: upstream length mismatch");
  if (a.size() != g.action_dim()) throw ConfigError("euler_mean_vjp: action length mismatch");
  if (!z_grad.empty() && z_grad.size() != 2 * k) {
    throw ConfigError("euler_mean_vjp: z_grad length mismatch");
  }
  const auto c_q = upstream.subspan(0, k);
  const auto c_p = upstream.subspan(k, k);

  // The H-dependent part of cᵀμ is dt·∇_z H·v with v = (−c_p, c_q).
  Vec vq(k), vp(k);
  for (std::size_t i = 0; i < k; ++i) {
    vq[i] = -c_p[i];
    vp[i] = c_q[i];
  }
  const Vec x = invariant_features(z);
  const Vec u = feature_jvp(z, vq, vp);
  TangentTape ttape;
  mlp_jvp(h.spec(), h.params(), x, u, ttape);
  tangent_backprop_accumulate(h.spec(), h.params(), ttape, {}, std::span<const double>(&dt, 1),
                              h_grad);

  // g part: dt·c_pᵀ G(q) a.
  const std::size_t A = a.size();
  Vec up(k * A);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < A; ++c) up[r * A + c] = dt * c_p[r] * a[c];
  }
  MlpTape tape;
  mlp_forward(g.spec(), g.params(), z.q, tape);
  if (z_grad.empty()) {
    backprop_accumulate(g.spec(), g.params(), tape, up, g_grad);
    return;
  }
  Vec dq_g;
  backprop_accumulate(g.spec(), g.params(), tape, up, g_grad, &dq_g);

  // ∂/∂z of cᵀμ: identity part, dt·∇²H·v, and the g(q) term.
  const PhaseGradients hv = h.hessian_vector(z, vq, vp);
  for (std::size_t i = 0; i < k; ++i) {
    z_grad[i] += c_q[i] + dt * hv.dq[i] + dq_g[i];
    z_grad[k + i] += c_p[i] + dt * hv.dp[i];
  }
}

}  // namespace hamworld
