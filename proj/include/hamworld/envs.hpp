#pragma once

// Ground-truth toy physics with closed-form Hamiltonians and a planar
// rigid-view observation model.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>

#include "hamworld/dynamics.hpp"
#include "hamworld/numcore.hpp"

namespace hamworld {

enum class EnvKind { pendulum, spring_chain, two_body };

std::string_view to_string(EnvKind k);
EnvKind env_kind_from_string(std::string_view name);

struct EnvConfig {
  EnvKind kind = EnvKind::pendulum;
  double gravity_scale = 1.0;  // pendulum g, spring stiffness, two-body G
  double mass_scale = 1.0;
  double damping = 0.0;
  double obs_noise_std = 0.01;
  double dt = 0.1;
  std::size_t substeps = 10;
  double action_bound = 1.0;
  double reset_angle = 1.0;       // pendulum |φ| bound at reset
  double reset_momentum = 0.5;    // |p| bound at reset
  double view_translation = 1.0;  // |t_x|, |t_y| bound for sampled views
  std::size_t episode_length = 200;
  std::uint64_t seed = 0;

  void validate() const;

  // Coordinates the true stepper integrates in.
  std::size_t native_objects() const;
  std::size_t native_dims() const;
  // Object layout seen by the observation model and the latent state.
  std::size_t latent_objects() const;
  std::size_t latent_dims() const { return 2; }
  std::size_t action_dim() const;
  std::size_t obs_dim() const { return 2 * latent_objects() * latent_dims(); }
};

inline constexpr double kPendulumLength = 1.0;
inline constexpr double kPendulumGravity = 1.0;
inline constexpr double kSpringStiffness = 1.0;
inline constexpr double kSpringRest = 1.0;
// Two-body steps abort below this separation.
inline constexpr double kTwoBodyMinSeparation = 1e-3;

// Closed-form energy in native coordinates:
//   pendulum      p²/(2mL²) + m·g·L·(1 − cos φ)
//   spring_chain  Σ|p_i|²/(2m) + Σ k/2·(|q_i − q_{i+1}| − L)²
//   two_body      Σ|p_i|²/(2m) − G·m²/|q_1 − q_2|
double true_hamiltonian(const EnvConfig& cfg, const PhaseState& s);

// The env's (H, g) pair in native coordinates.
std::unique_ptr<VectorField> true_field(const EnvConfig& cfg);

PhaseState env_reset(const EnvConfig& cfg, Rng& rng);

// One agent step: cfg.substeps fourth-order symplectic substeps (a Yoshida
// composition of leapfrog) with the action held constant. Damping, when
// non-zero, enters as −c·q̇ in the momentum kicks.
PhaseState env_step(const EnvConfig& cfg, const PhaseState& s, std::span<const double> a);

// Embedded object layout (positions, velocities) under the identity view.
// The pendulum is shown as pivot, bob and a rest marker at pivot + (0, −2L),
// which the bob never reaches.
struct EmbeddedState {
  Vec positions;   // latent_objects × 2
  Vec velocities;  // latent_objects × 2
};
EmbeddedState embed(const EnvConfig& cfg, const PhaseState& s);

struct ViewTransform {
  double theta = 0.0;
  double tx = 0.0;
  double ty = 0.0;
};

enum class ViewMode { training, ood };

// training: θ ∈ [0, π/2]; ood: θ ∈ (π/2, π]; translation uniform in the box.
ViewTransform sample_view(Rng& rng, const EnvConfig& cfg, ViewMode mode);

struct Observation {
  Vec values;  // [R·pos + t (N·2), R·vel (N·2)]
  std::uint64_t view_id = 0;
};

Observation observe(const PhaseState& s, const ViewTransform& view, const EnvConfig& cfg,
                    Rng& rng);
Observation observe_clean(const PhaseState& s, const ViewTransform& view, const EnvConfig& cfg);

// Rigid transform of an observation vector: positions R·x + t, velocities R·v.
Vec transform_observation(std::span<const double> obs, std::size_t objects, double theta,
                          double tx, double ty);

std::uint64_t view_id(const ViewTransform& v);

}  // namespace hamworld
