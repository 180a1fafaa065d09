#include <gtest/gtest.h>

#include <cmath>

#include "hamworld/envs.hpp"
#include "hamworld/errors.hpp"

using namespace hamworld;

namespace {

EnvConfig make(EnvKind kind) {
  EnvConfig c;
  c.kind = kind;
  return c;
}

PhaseState pend(double phi, double p) {
  PhaseState s(1, 1);
  s.q[0] = phi;
  s.p[0] = p;
  return s;
}

// Zero-up crossings of φ over a long free swing, converted to a period.
double measured_period(const EnvConfig& cfg, double phi0) {
  PhaseState s = pend(phi0, 0.0);
  const Vec a{0.0};
  std::vector<double> crossings;
  for (int t = 0; t < 4000 && crossings.size() < 6; ++t) {
    const PhaseState n = env_step(cfg, s, a);
    if (s.q[0] < 0.0 && n.q[0] >= 0.0) {
      const double frac = -s.q[0] / (n.q[0] - s.q[0]);
      crossings.push_back((t + frac) * cfg.dt);
    }
    s = n;
  }
  return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

double pair_distance(const Vec& obs, std::size_t i, std::size_t j) {
  return std::hypot(obs[2 * i] - obs[2 * j], obs[2 * i + 1] - obs[2 * j + 1]);
}

}  // namespace

TEST(Pendulum, HangingAtRestIsAFixedPoint) {
  const EnvConfig cfg = make(EnvKind::pendulum);
  const PhaseState s = env_step(cfg, pend(0.0, 0.0), Vec{0.0});
  EXPECT_EQ(s.q[0], 0.0);
  EXPECT_EQ(s.p[0], 0.0);
  EXPECT_EQ(true_hamiltonian(cfg, pend(0.0, 0.0)), 0.0);
}

TEST(Pendulum, ClosedFormEnergy) {
  EnvConfig cfg = make(EnvKind::pendulum);
  cfg.mass_scale = 2.0;
  cfg.gravity_scale = 1.5;
  const PhaseState s = pend(0.6, 0.8);
  const double expected = 0.64 / (2 * 2.0) + 2.0 * 1.5 * (1 - std::cos(0.6));
  EXPECT_NEAR(true_hamiltonian(cfg, s), expected, 1e-14);
}

TEST(Pendulum, StepConservesEnergyWithoutControl) {
  const EnvConfig cfg = make(EnvKind::pendulum);
  PhaseState s = pend(1.0, 0.2);
  const double h0 = true_hamiltonian(cfg, s);
  for (int t = 0; t < 1000; ++t) s = env_step(cfg, s, Vec{0.0});
  EXPECT_NEAR(true_hamiltonian(cfg, s), h0, 1e-8);
}

TEST(Pendulum, HeavierGravityShortensPeriodBySqrt) {
  EnvConfig base = make(EnvKind::pendulum);
  base.dt = 0.05;
  EnvConfig heavy = base;
  heavy.gravity_scale = 1.5;
  const double ratio = measured_period(base, 0.05) / measured_period(heavy, 0.05);
  EXPECT_NEAR(ratio, std::sqrt(1.5), 2e-3);
}

TEST(Pendulum, GravityRaisesPotentialMonotonically) {
  EnvConfig cfg = make(EnvKind::pendulum);
  double prev = 0.0;
  for (double g : {0.5, 1.0, 1.5, 2.0}) {
    cfg.gravity_scale = g;
    const double h = true_hamiltonian(cfg, pend(0.7, 0.0));
    EXPECT_GT(h, prev);
    prev = h;
  }
}

TEST(Pendulum, ResetRespectsBounds) {
  const EnvConfig cfg = make(EnvKind::pendulum);
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const PhaseState s = env_reset(cfg, rng);
    EXPECT_LE(std::abs(s.p[0]), cfg.reset_momentum);
    EXPECT_LE(std::abs(s.q[0]), cfg.reset_angle);
  }
}

TEST(Pendulum, DampingDissipates) {
  EnvConfig cfg = make(EnvKind::pendulum);
  cfg.damping = 0.2;
  PhaseState s = pend(1.0, 0.0);
  const double h0 = true_hamiltonian(cfg, s);
  for (int t = 0; t < 200; ++t) s = env_step(cfg, s, Vec{0.0});
  EXPECT_LT(true_hamiltonian(cfg, s), 0.5 * h0);
}

TEST(SpringChain, EnergyAndMomentumConserved) {
  const EnvConfig cfg = make(EnvKind::spring_chain);
  Rng rng(5);
  PhaseState s = env_reset(cfg, rng);
  const double h0 = true_hamiltonian(cfg, s);
  for (int t = 0; t < 500; ++t) s = env_step(cfg, s, Vec{0.0, 0.0});
  EXPECT_NEAR(true_hamiltonian(cfg, s), h0, 1e-7);
  double px = 0.0, py = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    px += s.pa(i, 0);
    py += s.pa(i, 1);
  }
  EXPECT_NEAR(px, 0.0, 1e-10);
  EXPECT_NEAR(py, 0.0, 1e-10);
}

TEST(TwoBody, EnergyConservedOnBoundOrbit) {
  const EnvConfig cfg = make(EnvKind::two_body);
  Rng rng(6);
  PhaseState s = env_reset(cfg, rng);
  const double h0 = true_hamiltonian(cfg, s);
  for (int t = 0; t < 200; ++t) s = env_step(cfg, s, Vec{0.0, 0.0});
  EXPECT_NEAR(true_hamiltonian(cfg, s), h0, 1e-5 * (1 + std::abs(h0)));
}

TEST(EnvStep, RejectsWrongActionLength) {
  const EnvConfig cfg = make(EnvKind::pendulum);
  EXPECT_THROW(env_step(cfg, pend(0, 0), Vec{0.0, 0.0}), ConfigError);
  EXPECT_THROW(env_step(cfg, pend(NAN, 0), Vec{0.0}), NumericError);
}

TEST(EnvConfig, ValidationErrors) {
  EnvConfig cfg;
  cfg.gravity_scale = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = EnvConfig{};
  cfg.damping = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(env_kind_from_string("cartpole"), ConfigError);
}

TEST(Observation, IdentityViewShowsPositionsAndVelocities) {
  EnvConfig cfg = make(EnvKind::pendulum);
  const Observation o = observe_clean(pend(0.0, 0.5), ViewTransform{}, cfg);
  // pivot (0,0), bob (0,−1), rest marker (0,−2); bob velocity (ω, 0).
  EXPECT_EQ(o.values, (Vec{0, 0, 0, -1, 0, -2, 0, 0, 0.5, 0, 0, 0}));

  EnvConfig chain = make(EnvKind::spring_chain);
  chain.mass_scale = 2.0;
  Rng rng(7);
  const PhaseState s = env_reset(chain, rng);
  const Observation oc = observe_clean(s, ViewTransform{}, chain);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(oc.values[i], s.q[i]);
    EXPECT_EQ(oc.values[6 + i], s.p[i] / 2.0);
  }
}

TEST(Observation, ViewsPreserveInterPointDistances) {
  const EnvConfig cfg = make(EnvKind::spring_chain);
  Rng rng(8);
  const PhaseState s = env_reset(cfg, rng);
  const Observation a = observe_clean(s, sample_view(rng, cfg, ViewMode::training), cfg);
  const Observation b = observe_clean(s, sample_view(rng, cfg, ViewMode::ood), cfg);
  EXPECT_NE(a.view_id, b.view_id);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      EXPECT_NEAR(pair_distance(a.values, i, j), pair_distance(b.values, i, j), 1e-12);
    }
  }
}

TEST(Observation, NoiseHasConfiguredScale) {
  EnvConfig cfg = make(EnvKind::pendulum);
  cfg.obs_noise_std = 0.1;
  Rng rng(9);
  const PhaseState s = pend(0.3, 0.1);
  const Observation clean = observe_clean(s, ViewTransform{}, cfg);
  double sq = 0.0;
  std::size_t n = 0;
  for (int k = 0; k < 2000; ++k) {
    const Observation o = observe(s, ViewTransform{}, cfg, rng);
    for (std::size_t i = 0; i < o.values.size(); ++i, ++n) {
      sq += (o.values[i] - clean.values[i]) * (o.values[i] - clean.values[i]);
    }
  }
  EXPECT_NEAR(std::sqrt(sq / n), 0.1, 0.003);
}

TEST(SampleView, ModesCoverDisjointAngleRanges) {
  const EnvConfig cfg;
  Rng rng(10);
  for (int i = 0; i < 2000; ++i) {
    const ViewTransform t = sample_view(rng, cfg, ViewMode::training);
    EXPECT_GE(t.theta, 0.0);
    EXPECT_LE(t.theta, M_PI / 2);
    EXPECT_LE(std::abs(t.tx), cfg.view_translation);
    const ViewTransform o = sample_view(rng, cfg, ViewMode::ood);
    EXPECT_GT(o.theta, M_PI / 2);
    EXPECT_LE(o.theta, M_PI);
  }
  Rng r1(77), r2(77);
  EXPECT_EQ(view_id(sample_view(r1, cfg, ViewMode::training)),
            view_id(sample_view(r2, cfg, ViewMode::training)));
}

TEST(TransformObservation, RotatesVelocitiesWithoutTranslation) {
  const Vec obs{1, 0, 0, 0, 1, 0, 0, 0};
  const Vec out = transform_observation(obs, 2, M_PI / 2, 3.0, 4.0);
  EXPECT_NEAR(out[0], 3.0, 1e-15);
  EXPECT_NEAR(out[1], 5.0, 1e-15);
  EXPECT_NEAR(out[4], 0.0, 1e-15);
  EXPECT_NEAR(out[5], 1.0, 1e-15);
}
