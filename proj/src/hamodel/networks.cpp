#include <cmath>

#include "hamworld/errors.hpp"
#include "hamworld/hamodel.hpp"

namespace hamworld {
namespace {

std::vector<std::size_t> widths(std::size_t in, const NetSizes& sizes, std::size_t out) {
  if (sizes.hidden < 1 || sizes.hidden_layers < 1) {
    throw ConfigError("network sizes must be positive");
  }
  std::vector<std::size_t> w{in};
  for (std::size_t i = 0; i < sizes.hidden_layers; ++i) w.push_back(sizes.hidden);
  w.push_back(out);
  return w;
}

}  // namespace

HamiltonianNet::HamiltonianNet(std::size_t n, std::size_t d, MlpSpec trunk, ParamVector params)
    : n_(n), d_(d), spec_(std::move(trunk)), params_(std::move(params)) {
  spec_.validate();
  if (spec_.input_width() != feature_count(n_) || spec_.output_width() != 1) {
    throw ConfigError("HamiltonianNet: trunk must map " + std::to_string(feature_count(n_)) +
                      " features to 1 output");
  }
  if (params_.size() != spec_.param_count()) {
    throw ConfigError("HamiltonianNet: parameter count mismatch");
  }
}

HamiltonianNet HamiltonianNet::create(std::size_t n, std::size_t d, const NetSizes& sizes,
                                      Rng& rng) {
  MlpSpec spec = MlpSpec::make(widths(feature_count(n), sizes, 1), Activation::elu);
  ParamVector params = init_params(spec, rng);
  return HamiltonianNet(n, d, std::move(spec), std::move(params));
}

double HamiltonianNet::evaluate(const PhaseState& z) const {
  const Vec x = invariant_features(z);
  const double h = mlp_forward(spec_, params_, x)[0];
  if (!std::isfinite(h)) throw NumericError("HamiltonianNet: non-finite output");
  return h;
}

PhaseGradients HamiltonianNet::gradients(const PhaseState& z) const {
  const Vec x = invariant_features(z);
  MlpTape tape;
  mlp_forward(spec_, params_, x, tape);
  const double one = 1.0;
  const Vec c = input_gradient(spec_, params_, tape, std::span<const double>(&one, 1));
  PhaseGradients g;
  g.dq.assign(z.dof(), 0.0);
  g.dp.assign(z.dof(), 0.0);
  feature_vjp(z, c, g.dq, g.dp);
  if (!all_finite(g.dq) || !all_finite(g.dp)) {
    throw NumericError("HamiltonianNet: non-finite gradient");
  }
  return g;
}

PhaseGradients HamiltonianNet::hessian_vector(const PhaseState& z, std::span<const double> vq,
                                              std::span<const double> vp) const {
  const Vec x = invariant_features(z);
  const Vec u = feature_jvp(z, vq, vp);
  TangentTape tape;
  mlp_jvp(spec_, params_, x, u, tape);
  // Input gradient of the trunk (c) and its derivative along u (∇²f·u).
  const double one = 1.0;
  Vec scratch(spec_.param_count(), 0.0);
  Vec c, c_dot;
  tangent_backprop_accumulate(spec_, params_, tape, std::span<const double>(&one, 1), {}, scratch,
                              &c);
  tangent_backprop_accumulate(spec_, params_, tape, {}, std::span<const double>(&one, 1), scratch,
                              &c_dot);
  PhaseGradients hv;
  hv.dq.assign(z.dof(), 0.0);
  hv.dp.assign(z.dof(), 0.0);
  feature_vjp_tangent(z, c, c_dot, vq, vp, hv.dq, hv.dp);
  if (!all_finite(hv.dq) || !all_finite(hv.dp)) {
    throw NumericError("HamiltonianNet: non-finite Hessian-vector product");
  }
  return hv;
}

InputMatrixNet::InputMatrixNet(std::size_t n, std::size_t d, std::size_t action_dim,
                               MlpSpec spec, ParamVector params)
    : n_(n), d_(d), a_(action_dim), spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (spec_.input_width() != n_ * d_ || spec_.output_width() != n_ * d_ * a_) {
    throw ConfigError("InputMatrixNet: spec must map N*d to N*d*A");
  }
  if (params_.size() != spec_.param_count()) {
    throw ConfigError("InputMatrixNet: parameter count mismatch");
  }
}

InputMatrixNet InputMatrixNet::create(std::size_t n, std::size_t d, std::size_t action_dim,
                                      const NetSizes& sizes, Rng& rng) {
  if (action_dim < 1) throw ConfigError("InputMatrixNet: action dim must be >= 1");
  MlpSpec spec = MlpSpec::make(widths(n * d, sizes, n * d * action_dim), Activation::elu);
  ParamVector params = init_params(spec, rng, kInputMatrixInitScale);
  return InputMatrixNet(n, d, action_dim, std::move(spec), std::move(params));
}

Matrix InputMatrixNet::evaluate(std::span<const double> q) const {
  if (q.size() != n_ * d_) throw ConfigError("InputMatrixNet: Q length mismatch");
  Matrix m(n_ * d_, a_);
  m.data = mlp_forward(spec_, params_, q);
  if (!all_finite(m.data)) throw NumericError("InputMatrixNet: non-finite output");
  return m;
}

}  // namespace hamworld
