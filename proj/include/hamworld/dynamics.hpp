#pragma once

// Phase-space states, controlled-Hamiltonian vector fields, the explicit
// Euler and leapfrog-with-control integrators, rollouts and the external
// power diagnostic dH/dt = (∂H/∂p)ᵀ g(q) a.

#include <array>
#include <atomic>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hamworld/numcore.hpp"

namespace hamworld {

// N objects × d dims of coordinates Q and momenta P, row-major (object-major).
struct PhaseState {
  std::size_t n = 0;
  std::size_t d = 0;
  Vec q;
  Vec p;

  PhaseState() = default;
  PhaseState(std::size_t objects, std::size_t dims)
      : n(objects), d(dims), q(objects * dims, 0.0), p(objects * dims, 0.0) {}

  std::size_t dof() const { return n * d; }
  double& qa(std::size_t i, std::size_t k) { return q[i * d + k]; }
  double qa(std::size_t i, std::size_t k) const { return q[i * d + k]; }
  double& pa(std::size_t i, std::size_t k) { return p[i * d + k]; }
  double pa(std::size_t i, std::size_t k) const { return p[i * d + k]; }

  // [Q flattened, P flattened], length 2·N·d.
  Vec flat() const;
  static PhaseState from_flat(std::size_t objects, std::size_t dims, std::span<const double> z);

  void validate() const;  // shape + finiteness
  bool finite() const;
  bool operator==(const PhaseState&) const = default;
};

struct PhaseGradients {
  Vec dq;  // ∂H/∂Q
  Vec dp;  // ∂H/∂P
};

// Dense row-major matrix, used for the (N·d) × A input matrix g(q).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  Vec apply(std::span<const double> x) const;
};

// The pair (H, g) that defines the controlled dynamics. Implementations are
// either learned networks or ground-truth physics.
class VectorField {
 public:
  virtual ~VectorField() = default;
  virtual double hamiltonian(const PhaseState& z) const = 0;
  virtual PhaseGradients gradients(const PhaseState& z) const = 0;
  virtual Matrix input_matrix(const PhaseState& z) const = 0;  // reads z.q only
  virtual std::size_t action_dim() const = 0;
};

// Field from closures; convenient for analytic test systems.
class FunctionField final : public VectorField {
 public:
  using HFn = std::function<double(const PhaseState&)>;
  using GradFn = std::function<PhaseGradients(const PhaseState&)>;
  using GFn = std::function<Matrix(const PhaseState&)>;

  FunctionField(HFn h, GradFn grad, GFn g, std::size_t action_dim)
      : h_(std::move(h)), grad_(std::move(grad)), g_(std::move(g)), action_dim_(action_dim) {}

  double hamiltonian(const PhaseState& z) const override { return h_(z); }
  PhaseGradients gradients(const PhaseState& z) const override { return grad_(z); }
  Matrix input_matrix(const PhaseState& z) const override { return g_(z); }
  std::size_t action_dim() const override { return action_dim_; }

 private:
  HFn h_;
  GradFn grad_;
  GFn g_;
  std::size_t action_dim_;
};

// H = ½Σ p² / m + ½ k Σ q² with identity actuation (A = N·d). k = 0 gives
// the free particle.
FunctionField quadratic_field(std::size_t n, std::size_t d, double stiffness, double mass = 1.0);

enum class Scheme { euler, leapfrog };

std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view name);

struct IntegratorConfig {
  Scheme scheme = Scheme::leapfrog;
  double dt = 0.1;
  void validate() const;
};

// Where an integrator call happens. Counters let tests assert that training
// only ever integrates with Euler and imagination only with leapfrog.
enum class IntegratorPhase { unspecified = 0, training, imagination, evaluation, ablation };
constexpr std::size_t kIntegratorPhaseCount = 5;

struct IntegratorCounters {
  std::array<std::array<std::atomic<std::uint64_t>, 2>, kIntegratorPhaseCount> counts{};

  std::uint64_t get(IntegratorPhase phase, Scheme s) const {
    return counts[static_cast<std::size_t>(phase)][static_cast<std::size_t>(s)].load();
  }
  void reset();
};

IntegratorCounters& integrator_counters();

// RAII phase tag for the calling thread.
class ScopedIntegratorPhase {
 public:
  explicit ScopedIntegratorPhase(IntegratorPhase phase);
  ~ScopedIntegratorPhase();
  ScopedIntegratorPhase(const ScopedIntegratorPhase&) = delete;
  ScopedIntegratorPhase& operator=(const ScopedIntegratorPhase&) = delete;

 private:
  IntegratorPhase previous_;
};

IntegratorPhase current_integrator_phase();

// q' = q + dt·∂H/∂p ;  p' = p + dt·(−∂H/∂q + g(q)a), all at (q, p).
PhaseState euler_step(const VectorField& field, const PhaseState& z, std::span<const double> a,
                      double dt);

// Three-stage leapfrog with the control held constant over the step:
//   p½ = p + dt/2·(−∂H/∂q(q, p) + g(q)a)
//   q' = q + dt·∂H/∂p(q, p½)
//   p' = p½ + dt/2·(−∂H/∂q(q', p½) + g(q')a)
PhaseState leapfrog_step(const VectorField& field, const PhaseState& z,
                         std::span<const double> a, double dt);

PhaseState integrate_step(const VectorField& field, const IntegratorConfig& cfg,
                          const PhaseState& z, std::span<const double> a);

// dH/dt contributed by the control: (∂H/∂p)ᵀ g(q) a.
double external_power(const VectorField& field, const PhaseState& z, std::span<const double> a);

struct TrajectoryRecord {
  std::size_t t = 0;
  PhaseState state;
  Vec action;  // action applied after this state; empty on the final record
  double h = 0.0;
};

struct PhaseTrajectory {
  std::vector<TrajectoryRecord> records;

  std::size_t size() const { return records.size(); }
  Vec h_series() const;
};

struct RolloutResult {
  PhaseTrajectory trajectory;
  std::optional<std::size_t> failed_at;  // step index whose integration failed
  std::string error;
  bool ok() const { return !failed_at.has_value(); }
};

RolloutResult rollout(const VectorField& field, const IntegratorConfig& cfg, const PhaseState& z0,
                      const std::vector<Vec>& actions);

// One JSON object per line: {"t","q","p","a","h"}.
std::string trajectory_to_jsonl(const PhaseTrajectory& traj);
PhaseTrajectory trajectory_from_jsonl(const std::string& text);

}  // namespace hamworld
