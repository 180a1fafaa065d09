#include <cmath>

#include "hamworld/errors.hpp"
#include "hamworld/trainer.hpp"

namespace hamworld {
namespace {

// Parameter count of [in → w → w → out].
std::size_t two_layer_count(std::size_t in, std::size_t w, std::size_t out) {
  return (in + 1) * w + (w + 1) * w + (w + 1) * out;
}

Vec concat(std::span<const double> a, std::span<const double> b) {
  Vec x(a.begin(), a.end());
  x.insert(x.end(), b.begin(), b.end());
  return x;
}

}  // namespace

MlpBaseline MlpBaseline::create(std::size_t obs_dim, std::size_t action_dim,
                                std::size_t target_params, double lr, Rng& rng) {
  if (obs_dim == 0) throw ConfigError("MlpBaseline: obs_dim must be > 0");
  const std::size_t in = obs_dim + action_dim;
  std::size_t best = 1;
  std::size_t best_gap = SIZE_MAX;
  for (std::size_t w = 1; w < 4096; ++w) {
    const std::size_t c = two_layer_count(in, w, obs_dim);
    const std::size_t gap = c > target_params ? c - target_params : target_params - c;
    if (gap < best_gap) {
      best_gap = gap;
      best = w;
    }
    if (c > target_params) break;
  }
  MlpBaseline b;
  b.obs_dim = obs_dim;
  b.action_dim = action_dim;
  b.spec = MlpSpec::make({in, best, best, obs_dim}, Activation::elu);
  b.params = init_params(b.spec, rng);
  AdamConfig c;
  c.lr = lr;
  b.optimizer = AdamState(b.params.size(), c);
  return b;
}

double MlpBaseline::loss(const SequenceBatch& batch, Vec* grad) const {
  const std::size_t B = batch.size(), T = batch.length();
  if (B == 0 || T < 2) throw ConfigError("MlpBaseline: batch needs windows of length >= 2");
  const double n = static_cast<double>(B * (T - 1) * obs_dim);
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const Vec& o = batch.obs[b][t];
      const Vec& o1 = batch.obs[b][t + 1];
      MlpTape tape;
      const Vec delta = mlp_forward(spec, params, concat(o, batch.actions[b][t]), tape);
      Vec up(obs_dim);
      for (std::size_t i = 0; i < obs_dim; ++i) {
        const double e = o[i] + delta[i] - o1[i];
        loss += e * e / n;
        up[i] = 2.0 * e / n;
      }
      if (grad != nullptr) backprop_accumulate(spec, params, tape, up, *grad);
    }
  }
  return loss;
}

double MlpBaseline::train_step(const SequenceBatch& batch) {
  Vec grad(params.size(), 0.0);
  const double l = loss(batch, &grad);
  if (std::isfinite(l) && all_finite(grad)) {
    adam_update(optimizer, params.values(), grad, params.decay_mask());
  }
  return l;
}

std::vector<Vec> BaselinePredictor::predict(std::span<const double> obs0,
                                            const std::vector<Vec>& actions) const {
  Vec o(obs0.begin(), obs0.end());
  std::vector<Vec> out;
  out.reserve(actions.size());
  for (const Vec& a : actions) {
    const Vec delta = mlp_forward(b_.spec, b_.params, concat(o, a));
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += delta[i];
    out.push_back(o);
  }
  return out;
}

}  // namespace hamworld
