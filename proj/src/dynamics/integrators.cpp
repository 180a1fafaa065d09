#include <cmath>
#include <sstream>

#include "hamworld/dynamics.hpp"
#include "hamworld/errors.hpp"

namespace hamworld {
namespace {

thread_local IntegratorPhase t_phase = IntegratorPhase::unspecified;

void count(Scheme s) {
  integrator_counters()
      .counts[static_cast<std::size_t>(t_phase)][static_cast<std::size_t>(s)]
      .fetch_add(1, std::memory_order_relaxed);
}

std::string describe(const PhaseState& z) {
  std::ostringstream os;
  os.precision(6);
  os << "q=[";
  for (std::size_t i = 0; i < z.q.size(); ++i) os << (i ? "," : "") << z.q[i];
  os << "] p=[";
  for (std::size_t i = 0; i < z.p.size(); ++i) os << (i ? "," : "") << z.p[i];
  os << "]";
  return os.str();
}

void require_finite(const PhaseGradients& g, const PhaseState& z, const char* where) {
  if (!all_finite(g.dq) || !all_finite(g.dp)) {
    throw NumericError(std::string(where) + ": non-finite Hamiltonian gradient at " +
                       describe(z));
  }
}

void check_shapes(const VectorField& field, const PhaseState& z, std::span<const double> a) {
  if (z.q.size() != z.n * z.d || z.p.size() != z.n * z.d) {
    throw ConfigError("integrator: malformed PhaseState");
  }
  if (a.size() != field.action_dim()) {
    throw ConfigError("integrator: action length " + std::to_string(a.size()) +
                      " does not match field action dim " + std::to_string(field.action_dim()));
  }
}

// g(q)·a with a shape check against the state.
Vec forcing(const VectorField& field, const PhaseState& z, std::span<const double> a) {
  const Matrix g = field.input_matrix(z);
  if (g.rows != z.dof() || g.cols != a.size()) {
    throw ConfigError("integrator: input matrix has shape " + std::to_string(g.rows) + "x" +
                      std::to_string(g.cols) + ", expected " + std::to_string(z.dof()) + "x" +
                      std::to_string(a.size()));
  }
  Vec f = g.apply(a);
  if (!all_finite(f)) throw NumericError("integrator: non-finite forcing at " + describe(z));
  return f;
}

}  // namespace

void IntegratorCounters::reset() {
  for (auto& row : counts) {
    for (auto& c : row) c.store(0);
  }
}

IntegratorCounters& integrator_counters() {
  static IntegratorCounters counters;
  return counters;
}

ScopedIntegratorPhase::ScopedIntegratorPhase(IntegratorPhase phase) : previous_(t_phase) {
  t_phase = phase;
}

ScopedIntegratorPhase::~ScopedIntegratorPhase() { t_phase = previous_; }

IntegratorPhase current_integrator_phase() { return t_phase; }

std::string_view to_string(Scheme s) { return s == Scheme::euler ? "euler" : "leapfrog"; }

Scheme scheme_from_string(std::string_view name) {
  if (name == "euler") return Scheme::euler;
  if (name == "leapfrog") return Scheme::leapfrog;
  throw ConfigError("unknown integrator scheme '" + std::string(name) + "'");
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("integrator dt must be > 0");
}

PhaseState euler_step(const VectorField& field, const PhaseState& z, std::span<const double> a,
                      double dt) {
  check_shapes(field, z, a);
  count(Scheme::euler);
  const PhaseGradients g = field.gradients(z);
  require_finite(g, z, "euler_step");
  const Vec f = forcing(field, z, a);
  PhaseState out = z;
  for (std::size_t i = 0; i < z.dof(); ++i) {
    out.q[i] = z.q[i] + dt * g.dp[i];
    out.p[i] = z.p[i] + dt * (-g.dq[i] + f[i]);
  }
  if (!out.finite()) throw NumericError("euler_step: non-finite result from " + describe(z));
  return out;
}

PhaseState leapfrog_step(const VectorField& field, const PhaseState& z,
                         std::span<const double> a, double dt) {
  check_shapes(field, z, a);
  count(Scheme::leapfrog);
  const std::size_t k = z.dof();
  const double half = 0.5 * dt;

  const PhaseGradients g0 = field.gradients(z);
  require_finite(g0, z, "leapfrog_step");
  const Vec f0 = forcing(field, z, a);
  PhaseState mid = z;
  for (std::size_t i = 0; i < k; ++i) mid.p[i] = z.p[i] + half * (-g0.dq[i] + f0[i]);

  const PhaseGradients g1 = field.gradients(mid);
  require_finite(g1, mid, "leapfrog_step");
  PhaseState out = mid;
  for (std::size_t i = 0; i < k; ++i) out.q[i] = z.q[i] + dt * g1.dp[i];

  // Second kick at (q', p½).
  PhaseState probe = out;
  const PhaseGradients g2 = field.gradients(probe);
  require_finite(g2, probe, "leapfrog_step");
  const Vec f1 = forcing(field, probe, a);
  for (std::size_t i = 0; i < k; ++i) out.p[i] = mid.p[i] + half * (-g2.dq[i] + f1[i]);

  if (!out.finite()) throw NumericError("leapfrog_step: non-finite result from " + describe(z));
  return out;
}

PhaseState integrate_step(const VectorField& field, const IntegratorConfig& cfg,
                          const PhaseState& z, std::span<const double> a) {
  return cfg.scheme == Scheme::euler ? euler_step(field, z, a, cfg.dt)
                                     : leapfrog_step(field, z, a, cfg.dt);
}

double external_power(const VectorField& field, const PhaseState& z, std::span<const double> a) {
  check_shapes(field, z, a);
  const PhaseGradients g = field.gradients(z);
  require_finite(g, z, "external_power");
  const Vec f = forcing(field, z, a);
  return dot(g.dp, f);
}

RolloutResult rollout(const VectorField& field, const IntegratorConfig& cfg, const PhaseState& z0,
                      const std::vector<Vec>& actions) {
  if (actions.empty()) throw ConfigError("rollout: needs at least one action");
  cfg.validate();
  RolloutResult result;
  auto& recs = result.trajectory.records;
  recs.reserve(actions.size() + 1);
  PhaseState z = z0;
  try {
    recs.push_back({0, z, actions[0], field.hamiltonian(z)});
    for (std::size_t t = 0; t < actions.size(); ++t) {
      PhaseState next = integrate_step(field, cfg, z, actions[t]);
      const double h = field.hamiltonian(next);
      if (!std::isfinite(h)) throw NumericError("rollout: non-finite Hamiltonian");
      Vec next_action = t + 1 < actions.size() ? actions[t + 1] : Vec{};
      recs.push_back({t + 1, next, std::move(next_action), h});
      z = std::move(next);
    }
  } catch (const NumericError& e) {
    result.failed_at = recs.empty() ? 0 : recs.size() - 1;
    result.error = e.what();
    if (!recs.empty()) recs.back().action.clear();
  }
  return result;
}

}  // namespace hamworld
