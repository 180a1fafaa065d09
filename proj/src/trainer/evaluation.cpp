#include <algorithm>
#include <cmath>

#include "hamworld/errors.hpp"
#include "hamworld/trainer.hpp"

namespace hamworld {
namespace {

Vec zeros(std::size_t n) { return Vec(n, 0.0); }

Vec identity_observation(const EnvConfig& cfg, const PhaseState& s) {
  return observe_clean(s, ViewTransform{}, cfg).values;
}

}  // namespace

double energy_drift(std::span<const double> h) {
  if (h.size() < 2) throw ConfigError("energy_drift: needs at least 2 values");
  double mean = 0.0;
  for (double v : h) mean += v;
  mean /= static_cast<double>(h.size());
  double var = 0.0;
  for (double v : h) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(h.size()));
}

double energy_drift(const PhaseTrajectory& traj) {
  const Vec h = traj.h_series();
  return energy_drift(h);
}

std::vector<Vec> WorldModelPredictor::predict(std::span<const double> obs0,
                                              const std::vector<Vec>& actions) const {
  ScopedIntegratorPhase phase(IntegratorPhase::evaluation);
  const LearnedField field(m_.h, m_.g);
  PhaseState z = m_.latent(m_.encoder.encode(obs0).mean);
  std::vector<Vec> out;
  out.reserve(actions.size());
  for (const Vec& a : actions) {
    try {
      z = integrate_step(field, cfg_, z, a);
    } catch (const NumericError&) {
      // A diverged rollout keeps predicting its last finite decode.
      out.push_back(out.empty() ? m_.decoder.decode(z.flat()) : out.back());
      continue;
    }
    out.push_back(m_.decoder.decode(z.flat()));
  }
  return out;
}

PhaseState recover_state(const EnvConfig& cfg, std::span<const double> obs) {
  if (obs.size() != cfg.obs_dim()) throw ConfigError("recover_state: observation length");
  const std::size_t n = cfg.latent_objects();
  if (cfg.kind == EnvKind::pendulum) {
    const double x = obs[2] - obs[0], y = obs[3] - obs[1];
    const double phi = std::atan2(x, -y);
    const double vx = obs[2 * n + 2] - obs[2 * n], vy = obs[2 * n + 3] - obs[2 * n + 1];
    const double omega = (vx * std::cos(phi) + vy * std::sin(phi)) / kPendulumLength;
    PhaseState s(1, 1);
    s.q[0] = phi;
    s.p[0] = cfg.mass_scale * kPendulumLength * kPendulumLength * omega;
    return s;
  }
  PhaseState s(n, 2);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    s.q[i] = obs[i];
    s.p[i] = cfg.mass_scale * obs[2 * n + i];
  }
  return s;
}

std::vector<Vec> EnvOraclePredictor::predict(std::span<const double> obs0,
                                             const std::vector<Vec>& actions) const {
  PhaseState s = recover_state(cfg_, obs0);
  std::vector<Vec> out;
  for (const Vec& a : actions) {
    s = env_step(cfg_, s, a);
    out.push_back(identity_observation(cfg_, s));
  }
  return out;
}

TrueFieldPredictor::TrueFieldPredictor(EnvConfig cfg, IntegratorConfig integ)
    : cfg_(std::move(cfg)), integ_(integ), field_(true_field(cfg_)) {}

std::vector<Vec> TrueFieldPredictor::predict(std::span<const double> obs0,
                                             const std::vector<Vec>& actions) const {
  ScopedIntegratorPhase phase(IntegratorPhase::ablation);
  PhaseState s = recover_state(cfg_, obs0);
  std::vector<Vec> out;
  for (const Vec& a : actions) {
    try {
      s = integrate_step(*field_, integ_, s, a);
      out.push_back(identity_observation(cfg_, s));
    } catch (const NumericError&) {
      out.push_back(out.empty() ? Vec(obs0.begin(), obs0.end()) : out.back());
    }
  }
  return out;
}

PredictionReport prediction_mse(const ObservationPredictor& predictor, const EnvConfig& env,
                                std::size_t horizon, std::size_t episodes, Rng& rng) {
  if (horizon < 1 || episodes < 1) throw ConfigError("prediction_mse: horizon and episodes >= 1");
  PredictionReport rep;
  rep.per_step.assign(horizon, 0.0);
  const std::vector<Vec> actions(horizon, zeros(env.action_dim()));
  for (std::size_t e = 0; e < episodes; ++e) {
    PhaseState s = env_reset(env, rng);
    const Vec obs0 = observe(s, ViewTransform{}, env, rng).values;
    const std::vector<Vec> pred = predictor.predict(obs0, actions);
    for (std::size_t t = 0; t < horizon; ++t) {
      s = env_step(env, s, actions[t]);
      const Vec truth = identity_observation(env, s);
      double se = 0.0;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = pred[t][i] - truth[i];
        se += d * d;
      }
      rep.per_step[t] += se / static_cast<double>(truth.size());
    }
  }
  double total = 0.0;
  for (double& v : rep.per_step) {
    v /= static_cast<double>(episodes);
    total += v;
  }
  rep.mse = total / static_cast<double>(horizon);
  return rep;
}

Vec learned_energy_drift(const WorldModel& m, const EnvConfig& env, const IntegratorConfig& integ,
                         std::size_t horizon, std::size_t episodes, Rng& rng) {
  ScopedIntegratorPhase phase(IntegratorPhase::evaluation);
  const LearnedField field(m.h, m.g);
  const std::vector<Vec> actions(horizon, zeros(m.action_dim));
  Vec out;
  for (std::size_t e = 0; e < episodes; ++e) {
    const PhaseState s = env_reset(env, rng);
    const Vec obs0 = observe(s, ViewTransform{}, env, rng).values;
    const PhaseState z0 = m.latent(m.encoder.encode(obs0).mean);
    const RolloutResult r = rollout(field, integ, z0, actions);
    const Vec h = r.trajectory.h_series();
    out.push_back(h.size() >= 2 ? energy_drift(h) : INFINITY);
  }
  return out;
}

double learned_energy_range(const WorldModel& m, const EnvConfig& env,
                            const IntegratorConfig& integ, std::size_t horizon,
                            std::size_t episodes, Rng& rng) {
  ScopedIntegratorPhase phase(IntegratorPhase::evaluation);
  const LearnedField field(m.h, m.g);
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    const PhaseState s = env_reset(env, rng);
    const Vec obs0 = observe(s, ViewTransform{}, env, rng).values;
    const PhaseState z0 = m.latent(m.encoder.encode(obs0).mean);
    std::vector<Vec> actions(horizon, Vec(m.action_dim));
    for (auto& a : actions) {
      for (double& v : a) v = rng.uniform(-env.action_bound, env.action_bound);
    }
    const Vec h = rollout(field, integ, z0, actions).trajectory.h_series();
    const auto [lo, hi] = std::minmax_element(h.begin(), h.end());
    total += *hi - *lo;
  }
  return total / static_cast<double>(episodes);
}

}  // namespace hamworld
