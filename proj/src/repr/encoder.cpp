#include <algorithm>
#include <cmath>

#include "hamworld/envs.hpp"
#include "hamworld/errors.hpp"
#include "hamworld/repr.hpp"

namespace hamworld {
namespace {

std::vector<std::size_t> widths(std::size_t in, const NetSizes& sizes, std::size_t out) {
  std::vector<std::size_t> w{in};
  for (std::size_t i = 0; i < sizes.hidden_layers; ++i) w.push_back(sizes.hidden);
  w.push_back(out);
  return w;
}

}  // namespace

void AugmentConfig::validate() const {
  if (!(rotation >= 0.0) || !(translation >= 0.0) || !(noise_std >= 0.0)) {
    throw ConfigError("augment ranges must be >= 0");
  }
  if (!(mask_prob >= 0.0 && mask_prob < 1.0)) {
    throw ConfigError("augment.mask_prob must lie in [0, 1)");
  }
}

AugmentDraw draw_augment(const AugmentConfig& cfg, Rng& rng) {
  AugmentDraw d;
  if (cfg.rotation > 0.0) d.theta = rng.uniform(-cfg.rotation, cfg.rotation);
  if (cfg.translation > 0.0) {
    d.tx = rng.uniform(-cfg.translation, cfg.translation);
    d.ty = rng.uniform(-cfg.translation, cfg.translation);
  }
  return d;
}

Vec augment(std::span<const double> obs, std::size_t objects, const AugmentConfig& cfg,
            Rng& rng) {
  const AugmentDraw d = draw_augment(cfg, rng);
  return augment_with(obs, objects, d, cfg, rng);
}

Vec augment_with(std::span<const double> obs, std::size_t objects, const AugmentDraw& draw,
                 const AugmentConfig& cfg, Rng& rng) {
  Vec out = transform_observation(obs, objects, draw.theta, draw.tx, draw.ty);
  if (cfg.noise_std > 0.0) {
    for (double& v : out) v += cfg.noise_std * rng.normal();
  }
  if (cfg.mask_prob > 0.0) {
    for (double& v : out) {
      if (rng.uniform() < cfg.mask_prob) v = 0.0;
    }
  }
  return out;
}

EncoderNet::EncoderNet(std::size_t latent_dim, MlpSpec spec, ParamVector params)
    : latent_(latent_dim), spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (spec_.output_width() != 2 * latent_) {
    throw ConfigError("EncoderNet: output width must be 2 * latent dim");
  }
  if (params_.size() != spec_.param_count()) throw ConfigError("EncoderNet: parameter count");
}

EncoderNet EncoderNet::create(std::size_t obs_dim, std::size_t latent_dim, const NetSizes& sizes,
                              Rng& rng) {
  MlpSpec spec = MlpSpec::make(widths(obs_dim, sizes, 2 * latent_dim), Activation::elu);
  ParamVector params = init_params(spec, rng);
  return EncoderNet(latent_dim, std::move(spec), std::move(params));
}

EncoderPass EncoderNet::forward(std::span<const double> obs) const {
  EncoderPass pass;
  const Vec out = mlp_forward(spec_, params_, obs, pass.tape);
  pass.posterior.mean.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(latent_));
  pass.posterior.log_var.resize(latent_);
  pass.clamped.assign(latent_, 0);
  for (std::size_t i = 0; i < latent_; ++i) {
    const double lv = out[latent_ + i];
    const double c = std::clamp(lv, kLogVarMin, kLogVarMax);
    pass.clamped[i] = c != lv;
    pass.posterior.log_var[i] = c;
  }
  if (!all_finite(pass.posterior.mean) || !all_finite(pass.posterior.log_var)) {
    throw NumericError("EncoderNet: non-finite output");
  }
  return pass;
}

DiagGaussian EncoderNet::encode(std::span<const double> obs) const {
  return forward(obs).posterior;
}

void EncoderNet::backward(const EncoderPass& pass, std::span<const double> d_mean,
                          std::span<const double> d_log_var, std::span<double> param_grad) const {
  Vec up(2 * latent_, 0.0);
  for (std::size_t i = 0; i < latent_; ++i) {
    if (!d_mean.empty()) up[i] = d_mean[i];
    if (!d_log_var.empty() && !pass.clamped[i]) up[latent_ + i] = d_log_var[i];
  }
  backprop_accumulate(spec_, params_, pass.tape, up, param_grad);
}

Vec reparameterize(const DiagGaussian& g, std::span<const double> eps) {
  if (eps.size() != g.mean.size()) throw ConfigError("reparameterize: eps length mismatch");
  Vec z(g.mean.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = g.mean[i] + std::exp(0.5 * g.log_var[i]) * eps[i];
  return z;
}

DecoderNet::DecoderNet(MlpSpec spec, ParamVector params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (params_.size() != spec_.param_count()) throw ConfigError("DecoderNet: parameter count");
}

DecoderNet DecoderNet::create(std::size_t latent_dim, std::size_t obs_dim, const NetSizes& sizes,
                              Rng& rng) {
  MlpSpec spec = MlpSpec::make(widths(latent_dim, sizes, obs_dim), Activation::elu);
  ParamVector params = init_params(spec, rng);
  return DecoderNet(std::move(spec), std::move(params));
}

Vec DecoderNet::decode(std::span<const double> z) const { return mlp_forward(spec_, params_, z); }

Vec DecoderNet::decode(std::span<const double> z, MlpTape& tape) const {
  return mlp_forward(spec_, params_, z, tape);
}

}  // namespace hamworld
