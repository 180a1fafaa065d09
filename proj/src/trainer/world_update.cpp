#include <cmath>

#include "hamworld/errors.hpp"
#include "hamworld/trainer.hpp"

namespace hamworld {

LossRecord world_loss(const WorldModel& m, const SequenceBatch& batch, const BatchNoise& noise,
                      const IntegratorConfig& train_integrator, const LossWeights& w,
                      WorldGradients* grads, const TrainableGroups& groups,
                      const WorldModel* stop_grad) {
  const WorldModel& sg = stop_grad != nullptr ? *stop_grad : m;
  const bool separate_sg = &sg != &m;
  const std::size_t B = batch.size(), T = batch.length();
  if (B < 2 || T < 2) throw ConfigError("world_loss: needs B >= 2 windows of T >= 2 steps");
  if (noise.view_a.size() != B || noise.eps.size() != B) {
    throw ConfigError("world_loss: noise does not match batch");
  }
  ScopedIntegratorPhase phase(IntegratorPhase::training);
  const std::size_t D = m.latent_dim();
  const double s = 1.0 / static_cast<double>(B);
  const LearnedField field(m.h, m.g);
  const LearnedField sg_field(sg.h, sg.g);
  const bool need_enc = grads != nullptr && groups.encoder;
  const bool need_dec = grads != nullptr && (groups.decoder || groups.encoder);
  const bool need_dyn = grads != nullptr && groups.dynamics;

  std::vector<std::vector<EncoderPass>> pass_a(B), pass_b(B);
  std::vector<std::vector<DiagGaussian>> sg_post(B);
  std::vector<std::vector<Vec>> dmean_a(B, std::vector<Vec>(T, Vec(D, 0.0)));
  std::vector<std::vector<Vec>> dlv_a(B, std::vector<Vec>(T, Vec(D, 0.0)));
  Vec dec_scratch, dyn_scratch_h, dyn_scratch_g;
  if (need_dec && !groups.decoder) dec_scratch.assign(m.decoder.params().size(), 0.0);

  LossRecord rec;
  for (std::size_t b = 0; b < B; ++b) {
    pass_a[b].reserve(T);
    pass_b[b].reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      pass_a[b].push_back(m.encoder.forward(noise.view_a[b][t]));
      pass_b[b].push_back(m.encoder.forward(noise.view_b[b][t]));
      const DiagGaussian& post = pass_a[b][t].posterior;
      sg_post[b].push_back(separate_sg ? sg.encoder.encode(noise.view_a[b][t]) : post);

      // Reconstruction of the augmented view from a reparameterized sample.
      const Vec z = reparameterize(post, noise.eps[b][t]);
      MlpTape dtape;
      const Vec pred = m.decoder.decode(z, dtape);
      rec.l_pred += s * reconstruction_nll(pred, noise.view_a[b][t]);
      if (need_dec) {
        Vec up(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) up[i] = s * (pred[i] - noise.view_a[b][t][i]);
        Vec dz;
        std::span<double> pg = groups.decoder ? std::span<double>(grads->decoder)
                                              : std::span<double>(dec_scratch);
        backprop_accumulate(m.decoder.spec(), m.decoder.params(), dtape, up, pg, &dz);
        for (std::size_t i = 0; i < D; ++i) {
          dmean_a[b][t][i] += dz[i];
          dlv_a[b][t][i] += dz[i] * noise.eps[b][t][i] * 0.5 * std::exp(0.5 * post.log_var[i]);
        }
      }

      if (t == 0) continue;
      // Prior from the posterior mean one step back; the encoder sees this
      // path only through L_dyn.
      const PhaseState z_prev = m.latent(pass_a[b][t - 1].posterior.mean);
      const Vec& a_prev = batch.actions[b][t - 1];
      DiagGaussian prior;
      prior.mean = euler_step(field, z_prev, a_prev, train_integrator.dt).flat();
      prior.log_var = m.prior.log_var;
      const KlSplit kl = split_kl(post, prior, w.free_nats);
      if (!separate_sg) {
        rec.l_dyn += s * kl.l_dyn;
        rec.l_rep += s * kl.l_rep;
      } else {
        DiagGaussian sg_prior;
        sg_prior.mean =
            euler_step(sg_field, m.latent(sg_post[b][t - 1].mean), a_prev, train_integrator.dt)
                .flat();
        sg_prior.log_var = sg.prior.log_var;
        rec.l_dyn += s * split_kl(sg_post[b][t], prior, w.free_nats).l_dyn;
        rec.l_rep += s * split_kl(post, sg_prior, w.free_nats).l_rep;
      }
      if (grads == nullptr || !kl.active) continue;
      const KlGradients kg = split_kl_gradients(post, prior, w.free_nats);
      if (need_dyn || need_enc) {
        Vec up(D);
        for (std::size_t i = 0; i < D; ++i) up[i] = s * w.beta_dyn * kg.dyn_prior_mean[i];
        if (!need_dyn) {
          dyn_scratch_h.assign(m.h.params().size(), 0.0);
          dyn_scratch_g.assign(m.g.params().size(), 0.0);
        }
        euler_mean_vjp(m.h, m.g, z_prev, a_prev, train_integrator.dt, up,
                       need_dyn ? std::span<double>(grads->h) : std::span<double>(dyn_scratch_h),
                       need_dyn ? std::span<double>(grads->g) : std::span<double>(dyn_scratch_g),
                       need_enc ? std::span<double>(dmean_a[b][t - 1]) : std::span<double>());
      }
      if (need_dyn) {
        for (std::size_t i = 0; i < D; ++i) grads->prior[i] += s * w.beta_dyn * kg.dyn_prior_log_var[i];
      }
      for (std::size_t i = 0; i < D; ++i) {
        dmean_a[b][t][i] += s * w.beta_rep * kg.rep_post_mean[i];
        dlv_a[b][t][i] += s * w.beta_rep * kg.rep_post_log_var[i];
      }
    }
  }

  // View-robustness term per time index across windows.
  std::vector<std::vector<Vec>> dmean_b(B, std::vector<Vec>(T, Vec(D, 0.0)));
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<Vec> ea(B), eb(B);
    for (std::size_t b = 0; b < B; ++b) {
      ea[b] = pass_a[b][t].posterior.mean;
      eb[b] = pass_b[b][t].posterior.mean;
    }
    const InfoNceResult nce = info_nce(ea, eb, w.tau, need_enc);
    rec.l_vr += nce.loss;
    if (!need_enc) continue;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < D; ++i) {
        dmean_a[b][t][i] += w.gamma * nce.grad_a[b][i];
        dmean_b[b][t][i] += w.gamma * nce.grad_b[b][i];
      }
    }
  }

  if (need_enc) {
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t t = 0; t < T; ++t) {
        m.encoder.backward(pass_a[b][t], dmean_a[b][t], dlv_a[b][t], grads->encoder);
        m.encoder.backward(pass_b[b][t], dmean_b[b][t], {}, grads->encoder);
      }
    }
  }

  rec.total = rec.l_pred + w.beta_dyn * rec.l_dyn + w.beta_rep * rec.l_rep + w.gamma * rec.l_vr;
  return rec;
}

LossRecord world_model_update(WorldModel& m, WorldOptimizer& opt, const SequenceBatch& batch,
                              const TrainConfig& cfg, const LossWeights& w,
                              const AugmentConfig& aug, Rng& rng, const TrainableGroups& groups) {
  const BatchNoise noise = draw_batch_noise(batch, m.objects, m.latent_dim(), aug, rng);
  WorldGradients grads = WorldGradients::zeros(m);
  LossRecord rec;
  try {
    rec = world_loss(m, batch, noise, cfg.train_integrator, w, &grads, groups);
  } catch (const NumericError&) {
    rec.total = NAN;
  }
  if (!std::isfinite(rec.total) || !grads.finite()) {
    rec.skipped = true;
    return rec;
  }
  const double n = grads.norm();
  rec.grad_norm = n;
  if (n > cfg.grad_clip) grads.scale(cfg.grad_clip / n);

  if (groups.encoder) {
    adam_update(opt.encoder, m.encoder.params().values(), grads.encoder,
                m.encoder.params().decay_mask());
  }
  if (groups.decoder) {
    adam_update(opt.decoder, m.decoder.params().values(), grads.decoder,
                m.decoder.params().decay_mask());
  }
  if (groups.dynamics) {
    adam_update(opt.h, m.h.params().values(), grads.h, m.h.params().decay_mask());
    adam_update(opt.g, m.g.params().values(), grads.g, m.g.params().decay_mask());
    const std::vector<std::uint8_t> no_decay(m.prior.log_var.size(), 0);
    adam_update(opt.prior, m.prior.log_var, grads.prior, no_decay);
    ema_update(m.target, m.h, m.target.decay);
  }
  return rec;
}

}  // namespace hamworld
