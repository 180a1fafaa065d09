#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hamworld/config.hpp"
#include "hamworld/errors.hpp"
#include "hamworld/trainer.hpp"

namespace hamworld {
namespace {

// Smooth exploration noise: a stationary AR(1) process per action channel.
constexpr double kSmoothRho = 0.9;
constexpr double kSmoothScale = 0.5;

Vec smooth_action(const Vec& prev, double bound, Rng& rng) {
  Vec a(prev.size());
  const double s = kSmoothScale * bound * std::sqrt(1.0 - kSmoothRho * kSmoothRho);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = std::clamp(kSmoothRho * prev[i] + s * rng.normal(), -bound, bound);
  }
  return a;
}

double sq_dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double median(Vec v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MetricsRow evaluate_row(const WorldModel& m, const RunConfig& cfg, std::size_t step,
                        std::size_t updates, double loss, Rng eval_rng) {
  MetricsRow row;
  row.step = step;
  row.updates = updates;
  row.w = anneal_weight(step, cfg.anneal);
  row.loss = loss;
  const std::size_t H = cfg.train.eval_horizon, E = cfg.train.eval_episodes;
  IntegratorConfig euler = cfg.train.imagine_integrator;
  euler.scheme = Scheme::euler;
  // Identical initial states for both schemes.
  Rng r1 = eval_rng.split("drift"), r2 = eval_rng.split("drift");
  row.sigma_leapfrog = median(learned_energy_drift(m, cfg.env, cfg.train.imagine_integrator, H, E, r1));
  row.sigma_euler = median(learned_energy_drift(m, cfg.env, euler, H, E, r2));
  Rng r3 = eval_rng.split("mse");
  row.mse = prediction_mse(WorldModelPredictor(m, cfg.train.imagine_integrator), cfg.env, H, E, r3).mse;
  return row;
}

struct Collector {
  const EnvConfig& env;
  Rng rng;
  PhaseState state;
  ViewTransform view;
  Vec obs;
  Vec a_prev;
  std::size_t ep_t = 0;
  bool need_reset = true;
  double jerk_sum = 0.0;
  std::size_t jerk_n = 0;

  void reset(ReplayBuffer& buffer) {
    state = env_reset(env, rng);
    view = sample_view(rng, env, ViewMode::training);
    obs = observe(state, view, env, rng).values;
    a_prev.assign(env.action_dim(), 0.0);
    ep_t = 0;
    need_reset = false;
    buffer.begin_episode();
  }

  // Applies a; returns false when the env blew up and the episode was cut.
  bool step(ReplayBuffer& buffer, const Vec& a, Vec& obs_next) {
    PhaseState next;
    try {
      next = env_step(env, state, a);
    } catch (const NumericError&) {
      need_reset = true;
      return false;
    }
    obs_next = observe(next, view, env, rng).values;
    buffer.add(StepRecord{obs, a, view_id(view), state});
    if (ep_t > 0) {
      jerk_sum += sq_dist(a, a_prev);
      ++jerk_n;
    }
    a_prev = a;
    obs = obs_next;
    state = std::move(next);
    if (++ep_t >= env.episode_length) need_reset = true;
    return true;
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string_view to_string(AdaptMode m) {
  switch (m) {
    case AdaptMode::finetune: return "finetune";
    case AdaptMode::zero_shot: return "zero-shot";
    case AdaptMode::from_scratch: return "from-scratch";
  }
  return "?";
}

AdaptMode adapt_mode_from_string(std::string_view s) {
  if (s == "finetune") return AdaptMode::finetune;
  if (s == "zero-shot" || s == "zero_shot") return AdaptMode::zero_shot;
  if (s == "from-scratch" || s == "from_scratch") return AdaptMode::from_scratch;
  throw ConfigError("unknown adapt mode '" + std::string(s) + "' (finetune|zero-shot|from-scratch)");
}

PretrainResult pretrain(const RunConfig& cfg) {
  cfg.validate();
  const Rng root(cfg.seed);
  Rng r_model = root.split("model"), r_rnd = root.split("rnd");
  Rng r_train = root.split("train"), r_plan = root.split("planner"), r_policy = root.split("policy");
  const Rng r_eval = root.split("eval");
  const TrainConfig& tc = cfg.train;

  PretrainResult res{
      WorldModel::create(cfg.env, cfg.model, tc.ema_decay, tc.prior_log_var_init, r_model),
      {},
      RewardEngine(RndPair::create(cfg.env.obs_dim(), cfg.model, r_rnd, kRndEmbedding, cfg.rnd_lr),
                   cfg.anneal, cfg.loss.lambda_s),
      ReplayBuffer(tc.buffer_capacity),
      0, 0, {}, {}, {}, {}, {}};
  res.optimizer = WorldOptimizer::create(res.model, tc.world_lr, tc.weight_decay);
  WorldModel& m = res.model;

  Collector col{cfg.env, root.split("env"), {}, {}, {}, {}};
  std::vector<Vec> plan;
  std::size_t plan_pos = 0;
  double loss_sum = 0.0;
  std::size_t loss_n = 0;
  const std::size_t A = cfg.env.action_dim();

  for (std::size_t t = 0; t < tc.pretrain_steps;) {
    if (col.need_reset) {
      col.reset(res.buffer);
      plan.clear();
    }
    Vec a;
    if (t < tc.warmup_steps) {
      a = smooth_action(col.a_prev, cfg.env.action_bound, r_policy);
    } else {
      if (plan.empty() || plan_pos >= tc.replan_every) {
        ScopedIntegratorPhase phase(IntegratorPhase::imagination);
        const LearnedField field(m.h, m.g);
        const IntegratorConfig integ = tc.imagine_integrator;
        const StepFn step = [&](const PhaseState& z, std::span<const double> u) {
          return integrate_step(field, integ, z, u);
        };
        const std::size_t now = t;
        const TransitionRewardFn reward = [&](const PhaseState& z, const PhaseState& z1,
                                              std::span<const double> u,
                                              std::span<const double> u_prev) {
          const double raw_rnd = rnd_bonus(res.rewards.rnd(), m.decoder.decode(z1.flat()));
          const double raw_sym = r_sym(m.target.net, z, z1, u, u_prev, cfg.loss.lambda_s);
          return res.rewards.imagined_reward(raw_rnd, raw_sym, now);
        };
        std::vector<Vec> warm;
        if (!plan.empty()) {
          warm.assign(plan.begin() + static_cast<std::ptrdiff_t>(std::min(plan_pos, plan.size())),
                      plan.end());
          warm.resize(cfg.planner.horizon, Vec(A, 0.0));
        }
        const PhaseState z0 = m.latent(m.encoder.encode(col.obs).mean);
        const CemResult r = plan_cem(step, reward, z0, col.a_prev, A, cfg.planner, r_plan,
                                     warm.empty() ? nullptr : &warm);
        plan = r.actions;
        plan_pos = 0;
      }
      a = plan[plan_pos++];
    }

    const Vec obs_t = col.obs, a_prev = col.a_prev;
    Vec obs_t1;
    if (!col.step(res.buffer, a, obs_t1)) {
      res.incidents.push_back({t, "env blowup; episode truncated"});
      continue;
    }
    {
      const PhaseState z_t = m.latent(m.encoder.encode(obs_t).mean);
      const PhaseState z_t1 = m.latent(m.encoder.encode(obs_t1).mean);
      RewardSample s = res.rewards.blended_reward(m.target.net, obs_t1, z_t, z_t1, a, a_prev, t);
      res.exploration.push_back(s);
    }
    ++t;
    res.env_steps = t;

    if (t % tc.update_every == 0) {
      SequenceBatch batch;
      bool ready = true;
      try {
        batch = res.buffer.sample_sequences(tc.batch_size, tc.seq_len, r_train);
      } catch (const NotReady&) {
        ready = false;
      }
      if (ready) {
        LossRecord rec = world_model_update(m, res.optimizer, batch, tc, cfg.loss, cfg.augment, r_train);
        rec.step = t;
        if (rec.skipped) {
          res.incidents.push_back({t, "non-finite loss or gradient; update skipped"});
        } else {
          ++res.updates;
          loss_sum += rec.total;
          ++loss_n;
        }
        res.losses.push_back(rec);
        std::vector<Vec> fresh;
        for (const auto& w : batch.obs) fresh.push_back(w.back());
        res.rewards.rnd().train_step(fresh);
      }
    }

    if (t % tc.eval_every == 0 || t == tc.pretrain_steps) {
      const double mean_loss = loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0;
      res.metrics.push_back(evaluate_row(m, cfg, t, res.updates, mean_loss, r_eval.split(t)));
      loss_sum = 0.0;
      loss_n = 0;
    }
  }
  res.collection.transitions = res.buffer.steps();
  res.collection.mean_action_jerk =
      col.jerk_n ? col.jerk_sum / static_cast<double>(col.jerk_n) : 0.0;
  return res;
}

ReplayBuffer collect_adaptation_data(const RunConfig& cfg) {
  cfg.validate();
  const EnvConfig env = cfg.adapt_env();
  const Rng root = Rng(cfg.seed).split("adapt-data");
  Rng r_policy = root.split("policy");
  ReplayBuffer buffer(std::max(cfg.train.buffer_capacity, cfg.train.adapt_steps));
  Collector col{env, root.split("env"), {}, {}, {}, {}};
  for (std::size_t t = 0; t < cfg.train.adapt_steps;) {
    if (col.need_reset) col.reset(buffer);
    const Vec a = smooth_action(col.a_prev, env.action_bound, r_policy);
    Vec obs_next;
    if (col.step(buffer, a, obs_next)) ++t;
  }
  return buffer;
}

AdaptResult adapt(const WorldModel& pretrained, const RunConfig& cfg, AdaptMode mode,
                  const ReplayBuffer& data) {
  cfg.validate();
  const TrainConfig& tc = cfg.train;
  const EnvConfig env = cfg.adapt_env();
  const Rng root = Rng(cfg.seed).split("adapt");
  AdaptResult res;
  TrainableGroups groups;
  double lr = tc.world_lr;
  if (mode == AdaptMode::from_scratch) {
    Rng r_model = Rng(cfg.seed).split("model");
    res.model = WorldModel::create(env, cfg.model, tc.ema_decay, tc.prior_log_var_init, r_model);
  } else {
    res.model = pretrained;
    if (res.model.obs_dim != env.obs_dim() || res.model.action_dim != env.action_dim()) {
      throw ConfigError("adapt: model shape does not match the adaptation env");
    }
    groups = TrainableGroups{false, false, true};
    lr = tc.finetune_lr;
  }
  res.optimizer = WorldOptimizer::create(res.model, lr, tc.weight_decay);

  const Rng r_eval = root.split("eval");
  auto evaluate = [&](std::size_t updates) {
    Rng r = r_eval;
    const double mse =
        prediction_mse(WorldModelPredictor(res.model, tc.imagine_integrator), env,
                       tc.eval_horizon, tc.eval_episodes, r).mse;
    res.curve.push_back({updates, mse});
  };
  evaluate(0);
  if (mode == AdaptMode::zero_shot) return res;

  Rng r_train = root.split("train");
  const std::size_t total = tc.adapt_steps / tc.update_every;
  for (std::size_t u = 1; u <= total; ++u) {
    const SequenceBatch batch = data.sample_sequences(tc.batch_size, tc.seq_len, r_train);
    LossRecord rec = world_model_update(res.model, res.optimizer, batch, tc, cfg.loss, cfg.augment,
                                        r_train, groups);
    rec.step = u;
    if (rec.skipped) res.incidents.push_back({u, "non-finite loss or gradient; update skipped"});
    res.losses.push_back(rec);
    res.updates = u;
    if (u % tc.adapt_eval_every == 0 || u == total) evaluate(u);
  }
  return res;
}

std::optional<std::size_t> steps_to_threshold(const std::vector<AdaptPoint>& curve,
                                              double threshold) {
  for (const AdaptPoint& p : curve) {
    if (p.mse <= threshold) return p.updates;
  }
  return std::nullopt;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os << "step,updates,w,sigma_leapfrog,sigma_euler,mse,loss\n";
  for (const MetricsRow& r : rows) {
    os << r.step << ',' << r.updates << ',' << fmt(r.w) << ',' << fmt(r.sigma_leapfrog) << ','
       << fmt(r.sigma_euler) << ',' << fmt(r.mse) << ',' << fmt(r.loss) << '\n';
  }
  return os.str();
}

std::string loss_csv(const std::vector<LossRecord>& rows) {
  std::ostringstream os;
  os << "step,l_pred,l_dyn,l_rep,l_vr,total,grad_norm,skipped\n";
  for (const LossRecord& r : rows) {
    os << r.step << ',' << fmt(r.l_pred) << ',' << fmt(r.l_dyn) << ',' << fmt(r.l_rep) << ','
       << fmt(r.l_vr) << ',' << fmt(r.total) << ',' << fmt(r.grad_norm) << ','
       << (r.skipped ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string exploration_csv(const std::vector<RewardSample>& rows) {
  std::ostringstream os;
  os << "step,w,raw_rnd,raw_sym,norm_rnd,norm_sym,blended\n";
  for (const RewardSample& r : rows) {
    os << r.step << ',' << fmt(r.w) << ',' << fmt(r.raw_rnd) << ',' << fmt(r.raw_sym) << ','
       << fmt(r.norm_rnd) << ',' << fmt(r.norm_sym) << ',' << fmt(r.blended) << '\n';
  }
  return os.str();
}

std::string adaptation_csv(const std::vector<AdaptPoint>& rows) {
  std::ostringstream os;
  os << "updates,mse\n";
  for (const AdaptPoint& r : rows) os << r.updates << ',' << fmt(r.mse) << '\n';
  return os.str();
}

}  // namespace hamworld
