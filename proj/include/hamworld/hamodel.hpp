#pragma once

// Learned controlled-Hamiltonian physics: an SE(2)-invariant Hamiltonian
// (invariant features + MLP trunk), the input-matrix network g(q), the
// state-independent Gaussian transition prior and the EMA target copy.

#include <cstddef>
#include <span>

#include "hamworld/dynamics.hpp"
#include "hamworld/numcore.hpp"

namespace hamworld {

// Radial projections divide by sqrt(|q_i − q_j|² + δ²), which keeps them
// smooth (and their curvature bounded) when two points pass close by.
inline constexpr double kRadialSoftening = 0.25;

// Feature layout for N objects with P = N(N−1)/2 pairs (i < j, index order):
//   [P distances |q_i−q_j|] [N squared momentum norms |p_i|²]
//   [P inner products p_i·p_j] [2P radial projections p_i·û_ij, p_j·û_ij]
// with û_ij = (q_i − q_j)/sqrt(|q_i − q_j|² + δ²).
std::size_t feature_count(std::size_t n);
Vec invariant_features(const PhaseState& z);

// Jᵀ·feature_grad accumulated into (dq, dp), which must be sized N·d.
void feature_vjp(const PhaseState& z, std::span<const double> feature_grad, Vec& dq, Vec& dp);

// Directional derivative of feature_vjp(z, c) along z → z + ε(vq, vp) with
// c → c + ε·c_dot, accumulated into (tq, tp).
void feature_vjp_tangent(const PhaseState& z, std::span<const double> c,
                         std::span<const double> c_dot, std::span<const double> vq,
                         std::span<const double> vp, Vec& tq, Vec& tp);

// J·(vq, vp).
Vec feature_jvp(const PhaseState& z, std::span<const double> vq, std::span<const double> vp);

struct NetSizes {
  std::size_t hidden = 64;
  std::size_t hidden_layers = 2;
};

class HamiltonianNet {
 public:
  HamiltonianNet() = default;
  HamiltonianNet(std::size_t n, std::size_t d, MlpSpec trunk, ParamVector params);

  static HamiltonianNet create(std::size_t n, std::size_t d, const NetSizes& sizes, Rng& rng);

  double evaluate(const PhaseState& z) const;
  PhaseGradients gradients(const PhaseState& z) const;
  // ∇²H(z)·(vq, vp).
  PhaseGradients hessian_vector(const PhaseState& z, std::span<const double> vq,
                                std::span<const double> vp) const;

  std::size_t objects() const { return n_; }
  std::size_t dims() const { return d_; }
  const MlpSpec& spec() const { return spec_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  MlpSpec spec_;
  ParamVector params_;
};

// Flattened Q (N·d) → (N·d) × A matrix, row-major in the output vector.
class InputMatrixNet {
 public:
  InputMatrixNet() = default;
  InputMatrixNet(std::size_t n, std::size_t d, std::size_t action_dim, MlpSpec spec,
                 ParamVector params);

  // Final layer scaled down by 1e-3 so the initial dynamics are nearly autonomous.
  static InputMatrixNet create(std::size_t n, std::size_t d, std::size_t action_dim,
                               const NetSizes& sizes, Rng& rng);

  Matrix evaluate(std::span<const double> q) const;

  std::size_t action_dim() const { return a_; }
  std::size_t objects() const { return n_; }
  std::size_t dims() const { return d_; }
  const MlpSpec& spec() const { return spec_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::size_t a_ = 0;
  MlpSpec spec_;
  ParamVector params_;
};

inline constexpr double kInputMatrixInitScale = 1e-3;

// Non-owning view of the learned (H, g) pair as a vector field.
class LearnedField final : public VectorField {
 public:
  LearnedField(const HamiltonianNet& h, const InputMatrixNet& g) : h_(h), g_(g) {}

  double hamiltonian(const PhaseState& z) const override { return h_.evaluate(z); }
  PhaseGradients gradients(const PhaseState& z) const override { return h_.gradients(z); }
  Matrix input_matrix(const PhaseState& z) const override { return g_.evaluate(z.q); }
  std::size_t action_dim() const override { return g_.action_dim(); }

 private:
  const HamiltonianNet& h_;
  const InputMatrixNet& g_;
};

struct DiagGaussian {
  Vec mean;
  Vec log_var;

  Vec variance() const;
  double log_prob(std::span<const double> x) const;
};

// Shared, state-independent diagonal log-variance (length 2·N·d).
struct PriorVariance {
  Vec log_var;

  explicit PriorVariance(std::size_t dim = 0, double init = 0.0) : log_var(dim, init) {}
  void validate() const;
  bool operator==(const PriorVariance&) const = default;
};

struct TargetHamiltonian {
  HamiltonianNet net;
  double decay = 0.99;
};

// target ← ρ·target + (1 − ρ)·online.
void ema_update(TargetHamiltonian& target, const HamiltonianNet& online, double rho);

// Mean: one integrator step of the learned field; covariance diag(exp(log_var)).
DiagGaussian prior_predict(const HamiltonianNet& h, const InputMatrixNet& g,
                           const PriorVariance& prior, const IntegratorConfig& cfg,
                           const PhaseState& z, std::span<const double> a);

// Vector–Jacobian product of the Euler prior mean
//   μ = [q + dt·∂H/∂p,  p + dt·(−∂H/∂q + g(q)a)]
// with respect to the H and g parameters, for upstream ∂L/∂μ (length 2·N·d).
// The action is a constant; when z_grad is given, ∂L/∂z (flattened, length
// 2·N·d) is accumulated into it.
void euler_mean_vjp(const HamiltonianNet& h, const InputMatrixNet& g, const PhaseState& z,
                    std::span<const double> a, double dt, std::span<const double> upstream,
                    std::span<double> h_grad, std::span<double> g_grad,
                    std::span<double> z_grad = {});

}  // namespace hamworld
