#include <algorithm>
#include <cmath>

#include "hamworld/errors.hpp"
#include "hamworld/explore.hpp"

namespace hamworld {
namespace {

std::vector<std::size_t> widths(std::size_t in, const NetSizes& sizes, std::size_t extra,
                                std::size_t out) {
  std::vector<std::size_t> w{in};
  for (std::size_t i = 0; i < sizes.hidden_layers + extra; ++i) w.push_back(sizes.hidden);
  w.push_back(out);
  return w;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

RndPair RndPair::create(std::size_t obs_dim, const NetSizes& sizes, Rng& rng, std::size_t k,
                        double lr) {
  RndPair r;
  Rng trng = rng.split("rnd-target");
  Rng prng = rng.split("rnd-predictor");
  r.target_spec = MlpSpec::make(widths(obs_dim, sizes, 0, k), Activation::elu);
  r.target = init_params(r.target_spec, trng);
  r.predictor_spec = MlpSpec::make(widths(obs_dim, sizes, 1, k), Activation::elu);
  r.predictor = init_params(r.predictor_spec, prng);
  AdamConfig cfg;
  cfg.lr = lr;
  r.optimizer = AdamState(r.predictor.size(), cfg);
  return r;
}

double rnd_bonus(const RndPair& pair, std::span<const double> obs) {
  const Vec t = mlp_forward(pair.target_spec, pair.target, obs);
  const Vec p = mlp_forward(pair.predictor_spec, pair.predictor, obs);
  return sq_dist(t, p);
}

double RndPair::loss(const std::vector<Vec>& obs, Vec* grad) const {
  if (obs.empty()) return 0.0;
  double mean = 0.0;
  const double inv = 1.0 / static_cast<double>(obs.size());
  MlpTape tape;
  for (const Vec& o : obs) {
    const Vec t = mlp_forward(target_spec, target, o);
    const Vec p = mlp_forward(predictor_spec, predictor, o, tape);
    mean += sq_dist(t, p) * inv;
    if (grad == nullptr) continue;
    Vec up(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) up[i] = 2.0 * (p[i] - t[i]) * inv;
    backprop_accumulate(predictor_spec, predictor, tape, up, *grad);
  }
  return mean;
}

double RndPair::train_step(const std::vector<Vec>& obs) {
  if (obs.empty()) return 0.0;
  Vec grad(predictor.size(), 0.0);
  const double mean = loss(obs, &grad);
  adam_update(optimizer, predictor.values(), grad, predictor.decay_mask());
  return mean;
}

void RunningStd::update(double r) {
  if (!std::isfinite(r)) throw NumericError("RunningStd: non-finite reward");
  ++count_;
  const double delta = r - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (r - mean_);
}

double RunningStd::std() const {
  if (count_ == 0) return floor_;
  const double var = std::max(m2_, 0.0) / static_cast<double>(count_);
  return std::max(std::sqrt(var), floor_);
}

double RunningStd::normalize(double r) {
  update(r);
  return r / std();
}

void AnnealSchedule::validate() const {
  if (t_anneal < 1) throw ConfigError("anneal.t_anneal must be >= 1");
}

double anneal_weight(std::size_t t, const AnnealSchedule& schedule) {
  schedule.validate();
  const double w = static_cast<double>(t) / static_cast<double>(schedule.t_anneal);
  return std::clamp(w, 0.0, 1.0);
}

double r_sym_from_values(double h_t, double h_t1, std::span<const double> a_t,
                         std::span<const double> a_prev, double lambda_s) {
  if (a_t.size() != a_prev.size()) throw ConfigError("r_sym: action lengths differ");
  return std::abs(h_t1 - h_t) - lambda_s * sq_dist(a_t, a_prev);
}

double r_sym(const HamiltonianNet& h_target, const PhaseState& z_t, const PhaseState& z_t1,
             std::span<const double> a_t, std::span<const double> a_prev, double lambda_s) {
  return r_sym_from_values(h_target.evaluate(z_t), h_target.evaluate(z_t1), a_t, a_prev,
                           lambda_s);
}

double blend(double w, double rnd_normalized, double sym_normalized) {
  return (1.0 - w) * rnd_normalized + w * sym_normalized;
}

RewardEngine::RewardEngine(RndPair rnd, AnnealSchedule schedule, double lambda_s)
    : rnd_(std::move(rnd)), schedule_(schedule), lambda_s_(lambda_s) {
  schedule_.validate();
  if (!(lambda_s_ >= 0.0)) throw ConfigError("lambda_s must be >= 0");
}

RewardSample RewardEngine::blended_reward(const HamiltonianNet& h_target,
                                          std::span<const double> obs_t1, const PhaseState& z_t,
                                          const PhaseState& z_t1, std::span<const double> a_t,
                                          std::span<const double> a_prev, std::size_t t) {
  RewardSample s;
  s.step = t;
  s.w = anneal_weight(t, schedule_);
  s.raw_rnd = rnd_bonus(rnd_, obs_t1);
  s.raw_sym = r_sym(h_target, z_t, z_t1, a_t, a_prev, lambda_s_);
  s.norm_rnd = rnd_std_.normalize(s.raw_rnd);
  s.norm_sym = sym_std_.normalize(s.raw_sym);
  s.blended = blend(s.w, s.norm_rnd, s.norm_sym);
  return s;
}

double RewardEngine::imagined_reward(double raw_rnd, double raw_sym, std::size_t t) const {
  const double w = anneal_weight(t, schedule_);
  return blend(w, rnd_std_.scale(raw_rnd), sym_std_.scale(raw_sym));
}

}  // namespace hamworld
