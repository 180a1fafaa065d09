#include <cmath>

#include "hamworld/errors.hpp"
#include "hamworld/trainer.hpp"

namespace hamworld {

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2 (in-batch negatives)");
  if (seq_len < 2) throw ConfigError("train.seq_len must be >= 2");
  if (update_every < 1 || replan_every < 1 || eval_every < 1 || adapt_eval_every < 1) {
    throw ConfigError("train cadences must be >= 1");
  }
  if (eval_episodes < 1 || eval_horizon < 1) throw ConfigError("train eval sizes must be >= 1");
  if (buffer_capacity < seq_len) throw ConfigError("train.buffer_capacity must be >= seq_len");
  if (!(world_lr > 0.0) || !(finetune_lr > 0.0)) throw ConfigError("learning rates must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(grad_clip > 0.0)) throw ConfigError("train.grad_clip must be > 0");
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) throw ConfigError("train.ema_decay must be in [0,1]");
  if (!std::isfinite(prior_log_var_init)) throw ConfigError("train.prior_log_var_init must be finite");
  train_integrator.validate();
  imagine_integrator.validate();
  if (train_integrator.scheme != Scheme::euler) {
    throw ConfigError("integrator.train must be euler");
  }
  if (imagine_integrator.scheme != Scheme::leapfrog) {
    throw ConfigError("integrator.imagine must be leapfrog");
  }
}

WorldModel WorldModel::create(const EnvConfig& env, const NetSizes& sizes, double ema_decay,
                              double prior_log_var_init, Rng& rng) {
  WorldModel m;
  m.objects = env.latent_objects();
  m.dims = env.latent_dims();
  m.action_dim = env.action_dim();
  m.obs_dim = env.obs_dim();
  Rng r_enc = rng.split("encoder"), r_dec = rng.split("decoder");
  Rng r_h = rng.split("hamiltonian"), r_g = rng.split("input-matrix");
  m.encoder = EncoderNet::create(m.obs_dim, m.latent_dim(), sizes, r_enc);
  m.decoder = DecoderNet::create(m.latent_dim(), m.obs_dim, sizes, r_dec);
  m.h = HamiltonianNet::create(m.objects, m.dims, sizes, r_h);
  m.g = InputMatrixNet::create(m.objects, m.dims, m.action_dim, sizes, r_g);
  m.prior = PriorVariance(m.latent_dim(), prior_log_var_init);
  m.target.net = m.h;
  m.target.decay = ema_decay;
  return m;
}

std::size_t WorldModel::param_count() const {
  return encoder.params().size() + decoder.params().size() + h.params().size() +
         g.params().size() + prior.log_var.size();
}

bool WorldModel::operator==(const WorldModel& o) const {
  return objects == o.objects && dims == o.dims && action_dim == o.action_dim &&
         obs_dim == o.obs_dim && encoder.spec() == o.encoder.spec() &&
         encoder.params() == o.encoder.params() && decoder.spec() == o.decoder.spec() &&
         decoder.params() == o.decoder.params() && h.spec() == o.h.spec() &&
         h.params() == o.h.params() && g.spec() == o.g.spec() && g.params() == o.g.params() &&
         prior == o.prior && target.net.params() == o.target.net.params() &&
         target.decay == o.target.decay;
}

WorldOptimizer WorldOptimizer::create(const WorldModel& m, double lr, double weight_decay) {
  AdamConfig c;
  c.lr = lr;
  c.weight_decay = weight_decay;
  WorldOptimizer o;
  o.encoder = AdamState(m.encoder.params().size(), c);
  o.decoder = AdamState(m.decoder.params().size(), c);
  o.h = AdamState(m.h.params().size(), c);
  o.g = AdamState(m.g.params().size(), c);
  o.prior = AdamState(m.prior.log_var.size(), c);
  return o;
}

void WorldOptimizer::set_lr(double lr) {
  for (AdamState* s : {&encoder, &decoder, &h, &g, &prior}) s->config.lr = lr;
}

WorldGradients WorldGradients::zeros(const WorldModel& m) {
  WorldGradients g;
  g.encoder.assign(m.encoder.params().size(), 0.0);
  g.decoder.assign(m.decoder.params().size(), 0.0);
  g.h.assign(m.h.params().size(), 0.0);
  g.g.assign(m.g.params().size(), 0.0);
  g.prior.assign(m.prior.log_var.size(), 0.0);
  return g;
}

double WorldGradients::norm() const {
  double s = 0.0;
  for (const Vec* v : {&encoder, &decoder, &h, &g, &prior}) s += dot(*v, *v);
  return std::sqrt(s);
}

bool WorldGradients::finite() const {
  for (const Vec* v : {&encoder, &decoder, &h, &g, &prior}) {
    if (!all_finite(*v)) return false;
  }
  return true;
}

void WorldGradients::scale(double c) {
  for (Vec* v : {&encoder, &decoder, &h, &g, &prior}) {
    for (double& x : *v) x *= c;
  }
}

BatchNoise draw_batch_noise(const SequenceBatch& batch, std::size_t objects,
                            std::size_t latent_dim, const AugmentConfig& aug, Rng& rng) {
  BatchNoise n;
  const std::size_t B = batch.size(), T = batch.length();
  n.view_a.resize(B);
  n.view_b.resize(B);
  n.eps.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    const AugmentDraw da = draw_augment(aug, rng);
    const AugmentDraw db = draw_augment(aug, rng);
    for (std::size_t t = 0; t < T; ++t) {
      n.view_a[b].push_back(augment_with(batch.obs[b][t], objects, da, aug, rng));
      n.view_b[b].push_back(augment_with(batch.obs[b][t], objects, db, aug, rng));
      Vec e(latent_dim);
      for (double& x : e) x = rng.normal();
      n.eps[b].push_back(std::move(e));
    }
  }
  return n;
}

}  // namespace hamworld
