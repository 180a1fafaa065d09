#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "hamworld/errors.hpp"
#include "hamworld/explore.hpp"

namespace hamworld {

void CemConfig::validate() const {
  if (horizon < 1) throw ConfigError("planner.horizon must be >= 1");
  if (population < 1) throw ConfigError("planner.population must be >= 1");
  if (elites < 1 || elites > population) {
    throw ConfigError("planner.elites must lie in [1, population]");
  }
  if (iterations < 1) throw ConfigError("planner.iterations must be >= 1");
  if (!(init_std > 0.0) || !(noise_floor > 0.0)) {
    throw ConfigError("planner std values must be > 0");
  }
  if (!(action_bound > 0.0)) throw ConfigError("planner.action_bound must be > 0");
  if (workers < 1) throw ConfigError("planner.workers must be >= 1");
}

namespace {

using Plan = std::vector<Vec>;

double evaluate_plan(const StepFn& step, const TransitionRewardFn& reward, const PhaseState& z0,
                     std::span<const double> a_prev, const Plan& plan) {
  try {
    PhaseState z = z0;
    Vec prev(a_prev.begin(), a_prev.end());
    double ret = 0.0;
    for (const Vec& a : plan) {
      PhaseState z1 = step(z, a);
      ret += reward(z, z1, a, prev);
      prev = a;
      z = std::move(z1);
    }
    return std::isfinite(ret) ? ret : -INFINITY;
  } catch (const NumericError&) {
    return -INFINITY;
  }
}

}  // namespace

CemResult plan_cem(const StepFn& step, const TransitionRewardFn& reward, const PhaseState& z0,
                   std::span<const double> a_prev, std::size_t action_dim, const CemConfig& cfg,
                   Rng& rng, const std::vector<Vec>* initial_mean) {
  cfg.validate();
  if (a_prev.size() != action_dim) throw ConfigError("plan_cem: a_prev length mismatch");
  const std::size_t H = cfg.horizon;
  Plan mean(H, Vec(action_dim, 0.0));
  if (initial_mean != nullptr) {
    if (initial_mean->size() != H) throw ConfigError("plan_cem: initial mean horizon mismatch");
    mean = *initial_mean;
  }
  Plan stdev(H, Vec(action_dim, cfg.init_std));

  CemResult result;
  const IntegratorPhase phase = current_integrator_phase();
  std::vector<Plan> cand(cfg.population, Plan(H, Vec(action_dim)));
  Vec returns(cfg.population);
  double best = -INFINITY;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (auto& c : cand) {
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t k = 0; k < action_dim; ++k) {
          const double v = mean[h][k] + stdev[h][k] * rng.normal();
          c[h][k] = std::clamp(v, -cfg.action_bound, cfg.action_bound);
        }
      }
    }
    auto work = [&](std::size_t lo, std::size_t hi) {
      ScopedIntegratorPhase tag(phase);
      for (std::size_t i = lo; i < hi; ++i) returns[i] = evaluate_plan(step, reward, z0, a_prev, cand[i]);
    };
    const std::size_t W = std::min(cfg.workers, cfg.population);
    if (W <= 1) {
      work(0, cfg.population);
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (cfg.population + W - 1) / W;
      for (std::size_t w = 0; w < W; ++w) {
        const std::size_t lo = w * chunk, hi = std::min(cfg.population, lo + chunk);
        if (lo < hi) pool.emplace_back(work, lo, hi);
      }
      for (auto& t : pool) t.join();
    }

    std::vector<std::size_t> order(cfg.population);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return returns[a] > returns[b]; });
    best = std::max(best, returns[order[0]]);

    const bool flat = std::all_of(returns.begin(), returns.end(),
                                  [&](double r) { return r == returns[0]; });
    if (!flat && std::isfinite(returns[order[cfg.elites - 1]])) {
      const double inv = 1.0 / static_cast<double>(cfg.elites);
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t k = 0; k < action_dim; ++k) {
          double m = 0.0;
          for (std::size_t e = 0; e < cfg.elites; ++e) m += cand[order[e]][h][k];
          m *= inv;
          double v = 0.0;
          for (std::size_t e = 0; e < cfg.elites; ++e) {
            const double d = cand[order[e]][h][k] - m;
            v += d * d;
          }
          mean[h][k] = m;
          stdev[h][k] = std::max(std::sqrt(v * inv), cfg.noise_floor);
        }
      }
    }
    result.mean_trace.push_back(mean);
  }
  result.actions = mean;
  result.expected_return = best;
  return result;
}

}  // namespace hamworld
