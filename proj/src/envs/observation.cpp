#include <cmath>
#include <cstring>
#include <numbers>

#include "hamworld/envs.hpp"
#include "hamworld/errors.hpp"

namespace hamworld {

EmbeddedState embed(const EnvConfig& cfg, const PhaseState& s) {
  EmbeddedState e;
  const std::size_t n = cfg.latent_objects();
  e.positions.assign(2 * n, 0.0);
  e.velocities.assign(2 * n, 0.0);
  if (cfg.kind == EnvKind::pendulum) {
    if (s.q.size() != 1 || s.p.size() != 1) throw ConfigError("embed: pendulum state is 1x1");
    const double phi = s.q[0];
    const double omega = s.p[0] / (cfg.mass_scale * kPendulumLength * kPendulumLength);
    e.positions[2] = kPendulumLength * std::sin(phi);
    e.positions[3] = -kPendulumLength * std::cos(phi);
    e.positions[5] = -2.0 * kPendulumLength;
    e.velocities[2] = kPendulumLength * omega * std::cos(phi);
    e.velocities[3] = kPendulumLength * omega * std::sin(phi);
    return e;
  }
  if (s.q.size() != 2 * n || s.p.size() != 2 * n) throw ConfigError("embed: state shape");
  e.positions = s.q;
  for (std::size_t i = 0; i < 2 * n; ++i) e.velocities[i] = s.p[i] / cfg.mass_scale;
  return e;
}

ViewTransform sample_view(Rng& rng, const EnvConfig& cfg, ViewMode mode) {
  ViewTransform v;
  const double half = 0.5 * std::numbers::pi;
  if (mode == ViewMode::training) {
    v.theta = half * rng.uniform();  // [0, π/2)
  } else {
    // (π/2, π]: reflect a [0, 1) draw so the upper end is attainable.
    v.theta = std::numbers::pi - half * rng.uniform();
    if (v.theta <= half) v.theta = std::nextafter(half, 4.0);
  }
  v.tx = rng.uniform(-cfg.view_translation, cfg.view_translation);
  v.ty = rng.uniform(-cfg.view_translation, cfg.view_translation);
  return v;
}

Vec transform_observation(std::span<const double> obs, std::size_t objects, double theta,
                          double tx, double ty) {
  if (obs.size() != 4 * objects) throw ConfigError("transform_observation: length mismatch");
  const double c = std::cos(theta), s = std::sin(theta);
  Vec out(obs.size());
  for (std::size_t i = 0; i < objects; ++i) {
    const double x = obs[2 * i], y = obs[2 * i + 1];
    out[2 * i] = c * x - s * y + tx;
    out[2 * i + 1] = s * x + c * y + ty;
    const std::size_t o = 2 * objects + 2 * i;
    const double vx = obs[o], vy = obs[o + 1];
    out[o] = c * vx - s * vy;
    out[o + 1] = s * vx + c * vy;
  }
  return out;
}

std::uint64_t view_id(const ViewTransform& v) {
  char bytes[3 * sizeof(double)];
  std::memcpy(bytes, &v.theta, sizeof(double));
  std::memcpy(bytes + sizeof(double), &v.tx, sizeof(double));
  std::memcpy(bytes + 2 * sizeof(double), &v.ty, sizeof(double));
  return fnv1a64(std::string_view(bytes, sizeof(bytes)));
}

Observation observe_clean(const PhaseState& s, const ViewTransform& view, const EnvConfig& cfg) {
  const EmbeddedState e = embed(cfg, s);
  Vec raw = e.positions;
  raw.insert(raw.end(), e.velocities.begin(), e.velocities.end());
  Observation o;
  o.values = transform_observation(raw, cfg.latent_objects(), view.theta, view.tx, view.ty);
  o.view_id = view_id(view);
  return o;
}

Observation observe(const PhaseState& s, const ViewTransform& view, const EnvConfig& cfg,
                    Rng& rng) {
  Observation o = observe_clean(s, view, cfg);
  if (cfg.obs_noise_std > 0.0) {
    for (double& v : o.values) v += cfg.obs_noise_std * rng.normal();
  }
  return o;
}

}  // namespace hamworld
