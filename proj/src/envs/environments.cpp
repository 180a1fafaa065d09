#include <cmath>
#include <numbers>

#include "hamworld/envs.hpp"
#include "hamworld/errors.hpp"

namespace hamworld {
namespace {

struct Physics {
  EnvKind kind;
  double m;
  double g;  // gravity / stiffness / G depending on kind
};

Physics physics(const EnvConfig& cfg) {
  switch (cfg.kind) {
    case EnvKind::pendulum:
      return {cfg.kind, cfg.mass_scale, kPendulumGravity * cfg.gravity_scale};
    case EnvKind::spring_chain:
      return {cfg.kind, cfg.mass_scale, kSpringStiffness * cfg.gravity_scale};
    case EnvKind::two_body:
      return {cfg.kind, cfg.mass_scale, cfg.gravity_scale};
  }
  return {cfg.kind, 1.0, 1.0};
}

// ∂H/∂p; every env has separable kinetic energy.
void velocity(const Physics& ph, std::span<const double> p, Vec& out) {
  out.resize(p.size());
  const double inv = ph.kind == EnvKind::pendulum
                         ? 1.0 / (ph.m * kPendulumLength * kPendulumLength)
                         : 1.0 / ph.m;
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * inv;
}

double separation(std::span<const double> q) {
  return std::hypot(q[0] - q[2], q[1] - q[3]);
}

// ∂V/∂q.
void potential_gradient(const Physics& ph, std::span<const double> q, Vec& out) {
  out.assign(q.size(), 0.0);
  switch (ph.kind) {
    case EnvKind::pendulum:
      out[0] = ph.m * ph.g * kPendulumLength * std::sin(q[0]);
      break;
    case EnvKind::spring_chain:
      for (std::size_t i = 0; i + 1 < q.size() / 2; ++i) {
        const double dx = q[2 * i] - q[2 * i + 2];
        const double dy = q[2 * i + 1] - q[2 * i + 3];
        const double r = std::hypot(dx, dy);
        if (r < 1e-12) throw NumericError("spring_chain: coincident masses");
        const double f = ph.g * (r - kSpringRest) / r;
        out[2 * i] += f * dx;
        out[2 * i + 1] += f * dy;
        out[2 * i + 2] -= f * dx;
        out[2 * i + 3] -= f * dy;
      }
      break;
    case EnvKind::two_body: {
      const double r = separation(q);
      if (!(r >= kTwoBodyMinSeparation)) {
        throw NumericError("two_body: close encounter, separation " + std::to_string(r));
      }
      const double c = ph.g * ph.m * ph.m / (r * r * r);
      const double dx = q[0] - q[2];
      const double dy = q[1] - q[3];
      out[0] = c * dx;
      out[1] = c * dy;
      out[2] = -c * dx;
      out[3] = -c * dy;
      break;
    }
  }
}

// g(q)·a; the input matrix is constant for every env.
Matrix input_matrix(EnvKind kind, std::size_t dof) {
  switch (kind) {
    case EnvKind::pendulum: {
      Matrix g(1, 1);
      g(0, 0) = 1.0;
      return g;
    }
    case EnvKind::spring_chain: {
      Matrix g(dof, 2);
      g(dof - 2, 0) = 1.0;
      g(dof - 1, 1) = 1.0;
      return g;
    }
    case EnvKind::two_body: {
      Matrix g(dof, 2);
      g(0, 0) = 1.0;
      g(1, 1) = 1.0;
      return g;
    }
  }
  return Matrix();
}

double hamiltonian(const Physics& ph, const PhaseState& s) {
  double h = 0.0;
  switch (ph.kind) {
    case EnvKind::pendulum:
      h = s.p[0] * s.p[0] / (2.0 * ph.m * kPendulumLength * kPendulumLength) +
          ph.m * ph.g * kPendulumLength * (1.0 - std::cos(s.q[0]));
      break;
    case EnvKind::spring_chain:
      for (double v : s.p) h += v * v / (2.0 * ph.m);
      for (std::size_t i = 0; i + 1 < s.n; ++i) {
        const double r = std::hypot(s.qa(i, 0) - s.qa(i + 1, 0), s.qa(i, 1) - s.qa(i + 1, 1));
        h += 0.5 * ph.g * (r - kSpringRest) * (r - kSpringRest);
      }
      break;
    case EnvKind::two_body: {
      for (double v : s.p) h += v * v / (2.0 * ph.m);
      const double r = separation(s.q);
      if (!(r > 0.0)) throw NumericError("two_body: coincident bodies");
      h -= ph.g * ph.m * ph.m / r;
      break;
    }
  }
  return h;
}

void check_state(const EnvConfig& cfg, const PhaseState& s) {
  if (s.n != cfg.native_objects() || s.d != cfg.native_dims() ||
      s.q.size() != s.n * s.d || s.p.size() != s.n * s.d) {
    throw ConfigError("env: state shape does not match env kind " +
                      std::string(to_string(cfg.kind)));
  }
}

}  // namespace

std::string_view to_string(EnvKind k) {
  switch (k) {
    case EnvKind::pendulum:
      return "pendulum";
    case EnvKind::spring_chain:
      return "spring_chain";
    case EnvKind::two_body:
      return "two_body";
  }
  return "pendulum";
}

EnvKind env_kind_from_string(std::string_view name) {
  if (name == "pendulum") return EnvKind::pendulum;
  if (name == "spring_chain") return EnvKind::spring_chain;
  if (name == "two_body") return EnvKind::two_body;
  throw ConfigError("unknown env kind '" + std::string(name) +
                    "' (expected pendulum, spring_chain or two_body)");
}

void EnvConfig::validate() const {
  if (!(gravity_scale > 0.0)) throw ConfigError("env.gravity_scale must be > 0");
  if (!(mass_scale > 0.0)) throw ConfigError("env.mass_scale must be > 0");
  if (!(damping >= 0.0)) throw ConfigError("env.damping must be >= 0");
  if (!(obs_noise_std >= 0.0)) throw ConfigError("env.obs_noise_std must be >= 0");
  if (!(dt > 0.0)) throw ConfigError("env.dt must be > 0");
  if (substeps < 1) throw ConfigError("env.substeps must be >= 1");
  if (!(action_bound > 0.0)) throw ConfigError("env.action_bound must be > 0");
  if (!(reset_angle >= 0.0) || !(reset_momentum >= 0.0)) {
    throw ConfigError("env reset bounds must be >= 0");
  }
  if (!(view_translation >= 0.0)) throw ConfigError("env.view_translation must be >= 0");
  if (episode_length < 2) throw ConfigError("env.episode_length must be >= 2");
}

std::size_t EnvConfig::native_objects() const {
  switch (kind) {
    case EnvKind::pendulum:
      return 1;
    case EnvKind::spring_chain:
      return 3;
    case EnvKind::two_body:
      return 2;
  }
  return 1;
}

std::size_t EnvConfig::native_dims() const { return kind == EnvKind::pendulum ? 1 : 2; }

std::size_t EnvConfig::latent_objects() const {
  return kind == EnvKind::pendulum ? 3 : native_objects();
}

std::size_t EnvConfig::action_dim() const { return kind == EnvKind::pendulum ? 1 : 2; }

double true_hamiltonian(const EnvConfig& cfg, const PhaseState& s) {
  check_state(cfg, s);
  return hamiltonian(physics(cfg), s);
}

std::unique_ptr<VectorField> true_field(const EnvConfig& cfg) {
  cfg.validate();
  const Physics ph = physics(cfg);
  const std::size_t dof = cfg.native_objects() * cfg.native_dims();
  auto h = [ph](const PhaseState& s) { return hamiltonian(ph, s); };
  auto grad = [ph](const PhaseState& s) {
    PhaseGradients g;
    potential_gradient(ph, s.q, g.dq);
    velocity(ph, s.p, g.dp);
    return g;
  };
  const Matrix gm = input_matrix(cfg.kind, dof);
  auto gfn = [gm](const PhaseState&) { return gm; };
  return std::make_unique<FunctionField>(h, grad, gfn, cfg.action_dim());
}

PhaseState env_reset(const EnvConfig& cfg, Rng& rng) {
  cfg.validate();
  PhaseState s(cfg.native_objects(), cfg.native_dims());
  const double pb = cfg.reset_momentum;
  switch (cfg.kind) {
    case EnvKind::pendulum:
      s.q[0] = rng.uniform(-cfg.reset_angle, cfg.reset_angle);
      s.p[0] = rng.uniform(-pb, pb);
      break;
    case EnvKind::spring_chain: {
      for (std::size_t i = 0; i < s.n; ++i) {
        s.qa(i, 0) = (static_cast<double>(i) - 1.0) * kSpringRest + rng.uniform(-0.2, 0.2);
        s.qa(i, 1) = rng.uniform(-0.2, 0.2);
        s.pa(i, 0) = rng.uniform(-pb, pb);
        s.pa(i, 1) = rng.uniform(-pb, pb);
      }
      // Zero total momentum so the chain stays near the origin.
      for (std::size_t k = 0; k < 2; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) mean += s.pa(i, k);
        mean /= static_cast<double>(s.n);
        for (std::size_t i = 0; i < s.n; ++i) s.pa(i, k) -= mean;
      }
      break;
    }
    case EnvKind::two_body: {
      const Physics ph = physics(cfg);
      // Rejection keeps bodies well clear of the coincidence guard.
      double r = 0.0;
      do {
        r = rng.uniform(1.0, 1.5);
      } while (r < 100.0 * kTwoBodyMinSeparation);
      const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double ux = std::cos(ang), uy = std::sin(ang);
      s.qa(0, 0) = 0.5 * r * ux;
      s.qa(0, 1) = 0.5 * r * uy;
      s.qa(1, 0) = -0.5 * r * ux;
      s.qa(1, 1) = -0.5 * r * uy;
      // Relative speed near circular: v_rel² = G(m1+m2)/r, each body v_rel/2.
      const double v_rel = std::sqrt(ph.g * 2.0 * ph.m / r) * rng.uniform(0.85, 1.05);
      const double v = 0.5 * v_rel;
      s.pa(0, 0) = -ph.m * v * uy;
      s.pa(0, 1) = ph.m * v * ux;
      s.pa(1, 0) = ph.m * v * uy;
      s.pa(1, 1) = -ph.m * v * ux;
      break;
    }
  }
  return s;
}

PhaseState env_step(const EnvConfig& cfg, const PhaseState& s, std::span<const double> a) {
  check_state(cfg, s);
  if (a.size() != cfg.action_dim()) {
    throw ConfigError("env_step: action length " + std::to_string(a.size()) + ", expected " +
                      std::to_string(cfg.action_dim()));
  }
  if (!s.finite() || !all_finite(a)) throw NumericError("env_step: non-finite input");
  const Physics ph = physics(cfg);
  const std::size_t dof = s.dof();
  const Vec forcing = input_matrix(cfg.kind, dof).apply(a);

  PhaseState z = s;
  Vec dv, vel;
  auto kick = [&](double h) {
    potential_gradient(ph, z.q, dv);
    if (cfg.damping > 0.0) velocity(ph, z.p, vel);
    for (std::size_t i = 0; i < dof; ++i) {
      double f = -dv[i] + forcing[i];
      if (cfg.damping > 0.0) f -= cfg.damping * vel[i];
      z.p[i] += h * f;
    }
  };
  auto leapfrog = [&](double h) {
    kick(0.5 * h);
    velocity(ph, z.p, vel);
    for (std::size_t i = 0; i < dof; ++i) z.q[i] += h * vel[i];
    kick(0.5 * h);
  };

  const double cbrt2 = std::cbrt(2.0);
  const double w1 = 1.0 / (2.0 - cbrt2);
  const double w0 = -cbrt2 / (2.0 - cbrt2);
  const double h = cfg.dt / static_cast<double>(cfg.substeps);
  for (std::size_t k = 0; k < cfg.substeps; ++k) {
    leapfrog(w1 * h);
    leapfrog(w0 * h);
    leapfrog(w1 * h);
  }
  if (!z.finite()) throw NumericError("env_step: state blew up");
  if (cfg.kind == EnvKind::two_body && separation(z.q) < kTwoBodyMinSeparation) {
    throw NumericError("two_body: close encounter");
  }
  return z;
}

}  // namespace hamworld
