#pragma once

// Observation encoder/decoder around the latent phase state, rigid-view
// augmentations, the contrastive view-robustness loss and the KL-balanced
// sequence objective.

#include <cstddef>
#include <span>
#include <vector>

#include "hamworld/hamodel.hpp"
#include "hamworld/numcore.hpp"

namespace hamworld {

struct AugmentConfig {
  double rotation = 0.785;   // ± jitter, radians
  double translation = 0.5;  // ± jitter per axis
  double noise_std = 0.01;
  double mask_prob = 0.0;    // per-coordinate dropout
  void validate() const;
};

// One rigid jitter. A sequence shares a single draw so augmentation never
// varies along the time axis.
struct AugmentDraw {
  double theta = 0.0;
  double tx = 0.0;
  double ty = 0.0;
};
AugmentDraw draw_augment(const AugmentConfig& cfg, Rng& rng);

// Rigid transform + noise + coordinate dropout on an observation laid out as
// [positions (objects×2), velocities (objects×2)].
Vec augment(std::span<const double> obs, std::size_t objects, const AugmentConfig& cfg, Rng& rng);
Vec augment_with(std::span<const double> obs, std::size_t objects, const AugmentDraw& draw,
                 const AugmentConfig& cfg, Rng& rng);

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 4.0;

struct EncoderPass {
  MlpTape tape;
  DiagGaussian posterior;
  std::vector<std::uint8_t> clamped;  // log-var entries pinned by the clamp
};

class EncoderNet {
 public:
  EncoderNet() = default;
  EncoderNet(std::size_t latent_dim, MlpSpec spec, ParamVector params);
  static EncoderNet create(std::size_t obs_dim, std::size_t latent_dim, const NetSizes& sizes,
                           Rng& rng);

  DiagGaussian encode(std::span<const double> obs) const;
  EncoderPass forward(std::span<const double> obs) const;
  // Accumulates parameter gradients for upstream (∂L/∂mean, ∂L/∂log_var).
  void backward(const EncoderPass& pass, std::span<const double> d_mean,
                std::span<const double> d_log_var, std::span<double> param_grad) const;

  std::size_t latent_dim() const { return latent_; }
  const MlpSpec& spec() const { return spec_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

 private:
  std::size_t latent_ = 0;
  MlpSpec spec_;
  ParamVector params_;
};

// mean + exp(log_var/2)·eps.
Vec reparameterize(const DiagGaussian& g, std::span<const double> eps);

class DecoderNet {
 public:
  DecoderNet() = default;
  DecoderNet(MlpSpec spec, ParamVector params);
  static DecoderNet create(std::size_t latent_dim, std::size_t obs_dim, const NetSizes& sizes,
                           Rng& rng);

  Vec decode(std::span<const double> z) const;
  Vec decode(std::span<const double> z, MlpTape& tape) const;

  const MlpSpec& spec() const { return spec_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

 private:
  MlpSpec spec_;
  ParamVector params_;
};

struct LossWeights {
  double beta_dyn = 0.5;
  double beta_rep = 0.1;
  double gamma = 1.0;
  double tau = 0.07;
  double lambda_s = 0.01;
  double free_nats = 1.0;
  void validate() const;
};

// Symmetric in-batch contrastive loss over the 2K embeddings {a_i} ∪ {b_i}:
// each anchor's positive is its partner view and the other 2(K−1) are
// negatives, so every denominator has 2K−1 terms. Cosine similarity / τ.
struct InfoNceResult {
  double loss = 0.0;
  std::vector<Vec> grad_a;
  std::vector<Vec> grad_b;
};
InfoNceResult info_nce(const std::vector<Vec>& a, const std::vector<Vec>& b, double tau,
                       bool with_grad = true);

double gaussian_kl(const DiagGaussian& q, const DiagGaussian& p);

// Both terms carry the same KL value clamped below at free_nats; they differ
// only in which side receives gradients.
struct KlSplit {
  double kl = 0.0;
  double l_dyn = 0.0;
  double l_rep = 0.0;
  bool active = false;  // KL above the free-nats floor
};
KlSplit split_kl(const DiagGaussian& posterior, const DiagGaussian& prior, double free_nats);

struct KlGradients {
  // ∂L_dyn flows to the prior only.
  Vec dyn_prior_mean;
  Vec dyn_prior_log_var;
  // ∂L_rep flows to the posterior only.
  Vec rep_post_mean;
  Vec rep_post_log_var;
};
KlGradients split_kl_gradients(const DiagGaussian& posterior, const DiagGaussian& prior,
                               double free_nats);

// ½|obs − pred|² + (D/2)·log 2π.
double reconstruction_nll(std::span<const double> pred, std::span<const double> obs);
double reconstruction_loss(const DecoderNet& dec, std::span<const double> z,
                           std::span<const double> obs);

// L_pred + β_dyn·L_dyn + β_rep·L_rep + γ·L_vr for one time index.
double elbo_total(double l_pred, double l_dyn, double l_rep, double l_vr, const LossWeights& w);

}  // namespace hamworld
