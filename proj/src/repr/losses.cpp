#include <algorithm>
#include <cmath>
#include <numbers>

#include "hamworld/errors.hpp"
#include "hamworld/repr.hpp"

namespace hamworld {

void LossWeights::validate() const {
  if (!(beta_dyn >= 0.0) || !(beta_rep >= 0.0) || !(gamma >= 0.0) || !(lambda_s >= 0.0)) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("loss.tau must lie in (0, 1]");
  if (!(free_nats >= 0.0)) throw ConfigError("loss.free_nats must be >= 0");
}

InfoNceResult info_nce(const std::vector<Vec>& a, const std::vector<Vec>& b, double tau,
                       bool with_grad) {
  const std::size_t K = a.size();
  if (K < 2 || b.size() != K) throw ConfigError("info_nce: needs K >= 2 pairs");
  if (!(tau > 0.0)) throw ConfigError("info_nce: tau must be > 0");
  const std::size_t M = 2 * K;
  const std::size_t D = a[0].size();
  std::vector<const Vec*> e(M);
  for (std::size_t i = 0; i < K; ++i) {
    e[i] = &a[i];
    e[K + i] = &b[i];
  }
  std::vector<Vec> n(M);
  Vec len(M);
  for (std::size_t i = 0; i < M; ++i) {
    if (e[i]->size() != D) throw ConfigError("info_nce: embedding lengths differ");
    len[i] = norm(*e[i]);
    if (!(len[i] > 0.0) || !std::isfinite(len[i])) {
      throw NumericError("info_nce: zero-norm or non-finite embedding at index " +
                         std::to_string(i));
    }
    n[i].resize(D);
    for (std::size_t k = 0; k < D; ++k) n[i][k] = (*e[i])[k] / len[i];
  }
  std::vector<Vec> S(M, Vec(M, 0.0));
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t k = i + 1; k < M; ++k) {
      S[i][k] = S[k][i] = dot(n[i], n[k]) / tau;
    }
  }

  InfoNceResult r;
  std::vector<Vec> G(M, Vec(M, 0.0));  // ∂L/∂S
  double total = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const std::size_t pos = (i + K) % M;
    double mx = -INFINITY;
    for (std::size_t k = 0; k < M; ++k) {
      if (k != i) mx = std::max(mx, S[i][k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < M; ++k) {
      if (k != i) z += std::exp(S[i][k] - mx);
    }
    total += -S[i][pos] + mx + std::log(z);
    if (with_grad) {
      for (std::size_t k = 0; k < M; ++k) {
        if (k == i) continue;
        G[i][k] = (std::exp(S[i][k] - mx) / z - (k == pos ? 1.0 : 0.0)) / static_cast<double>(M);
      }
    }
  }
  r.loss = total / static_cast<double>(M);
  if (!with_grad) return r;

  r.grad_a.assign(K, Vec(D, 0.0));
  r.grad_b.assign(K, Vec(D, 0.0));
  for (std::size_t i = 0; i < M; ++i) {
    Vec gn(D, 0.0);
    for (std::size_t k = 0; k < M; ++k) {
      if (k == i) continue;
      const double c = (G[i][k] + G[k][i]) / tau;
      if (c == 0.0) continue;
      for (std::size_t d = 0; d < D; ++d) gn[d] += c * n[k][d];
    }
    const double proj = dot(n[i], gn);
    Vec& out = i < K ? r.grad_a[i] : r.grad_b[i - K];
    for (std::size_t d = 0; d < D; ++d) out[d] = (gn[d] - n[i][d] * proj) / len[i];
  }
  return r;
}

double gaussian_kl(const DiagGaussian& q, const DiagGaussian& p) {
  const std::size_t D = q.mean.size();
  if (q.log_var.size() != D || p.mean.size() != D || p.log_var.size() != D) {
    throw ConfigError("gaussian_kl: dimension mismatch");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < D; ++i) {
    const double vq = std::exp(q.log_var[i]);
    const double vp = std::exp(p.log_var[i]);
    if (!(vq > 0.0) || !(vp > 0.0) || !std::isfinite(vq) || !std::isfinite(vp)) {
      throw NumericError("gaussian_kl: non-positive variance at index " + std::to_string(i));
    }
    const double d = q.mean[i] - p.mean[i];
    kl += 0.5 * (p.log_var[i] - q.log_var[i] + (vq + d * d) / vp - 1.0);
  }
  return kl;
}

KlSplit split_kl(const DiagGaussian& posterior, const DiagGaussian& prior, double free_nats) {
  KlSplit s;
  s.kl = gaussian_kl(posterior, prior);
  s.active = s.kl > free_nats;
  s.l_dyn = std::max(s.kl, free_nats);
  s.l_rep = s.l_dyn;
  return s;
}

KlGradients split_kl_gradients(const DiagGaussian& posterior, const DiagGaussian& prior,
                               double free_nats) {
  const std::size_t D = posterior.mean.size();
  KlGradients g;
  g.dyn_prior_mean.assign(D, 0.0);
  g.dyn_prior_log_var.assign(D, 0.0);
  g.rep_post_mean.assign(D, 0.0);
  g.rep_post_log_var.assign(D, 0.0);
  if (!split_kl(posterior, prior, free_nats).active) return g;
  for (std::size_t i = 0; i < D; ++i) {
    const double vq = std::exp(posterior.log_var[i]);
    const double vp = std::exp(prior.log_var[i]);
    const double d = posterior.mean[i] - prior.mean[i];
    g.dyn_prior_mean[i] = -d / vp;
    g.dyn_prior_log_var[i] = 0.5 * (1.0 - (vq + d * d) / vp);
    g.rep_post_mean[i] = d / vp;
    g.rep_post_log_var[i] = 0.5 * (vq / vp - 1.0);
  }
  return g;
}

double reconstruction_nll(std::span<const double> pred, std::span<const double> obs) {
  if (pred.size() != obs.size()) throw ConfigError("reconstruction: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double r = obs[i] - pred[i];
    s += r * r;
  }
  return 0.5 * s + 0.5 * static_cast<double>(obs.size()) * std::log(2.0 * std::numbers::pi);
}

double reconstruction_loss(const DecoderNet& dec, std::span<const double> z,
                           std::span<const double> obs) {
  return reconstruction_nll(dec.decode(z), obs);
}

double elbo_total(double l_pred, double l_dyn, double l_rep, double l_vr, const LossWeights& w) {
  return l_pred + w.beta_dyn * l_dyn + w.beta_rep * l_rep + w.gamma * l_vr;
}

}  // namespace hamworld
