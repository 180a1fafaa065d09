#pragma once

// Intrinsic rewards (energy-change probing with an action-smoothness
// penalty, random-network distillation), running-std normalization, the
// linear anneal between them and a cross-entropy-method planner.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hamworld/dynamics.hpp"
#include "hamworld/hamodel.hpp"
#include "hamworld/numcore.hpp"

namespace hamworld {

inline constexpr std::size_t kRndEmbedding = 16;

struct RndPair {
  MlpSpec target_spec;
  ParamVector target;  // frozen after construction
  MlpSpec predictor_spec;
  ParamVector predictor;
  AdamState optimizer;

  // Target: obs → hidden×layers → k. Predictor has one extra hidden layer.
  static RndPair create(std::size_t obs_dim, const NetSizes& sizes, Rng& rng,
                        std::size_t k = kRndEmbedding, double lr = 1e-4);

  // Mean bonus over obs; accumulates its predictor gradient when given.
  double loss(const std::vector<Vec>& obs, Vec* grad = nullptr) const;
  // Mean bonus over obs before the step; one Adam step on the predictor.
  double train_step(const std::vector<Vec>& obs);
};

// |target(obs) − predictor(obs)|².
double rnd_bonus(const RndPair& pair, std::span<const double> obs);

class RunningStd {
 public:
  explicit RunningStd(double floor = 1e-8) : floor_(floor) {}

  void update(double r);
  double std() const;  // population std, floored
  // Updates with r first, then returns r / std().
  double normalize(double r);
  // r / std() without updating.
  double scale(double r) const { return r / std(); }

  std::uint64_t count() const { return count_; }
  double mean() const { return mean_; }
  double m2() const { return m2_; }
  double floor() const { return floor_; }
  void restore(std::uint64_t count, double mean, double m2) {
    count_ = count;
    mean_ = mean;
    m2_ = m2;
  }

 private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double floor_;
};

struct AnnealSchedule {
  std::size_t t_anneal = 5000;
  void validate() const;
};

// clip(t / T_anneal, 0, 1).
double anneal_weight(std::size_t t, const AnnealSchedule& schedule);

// |H(z_t1) − H(z_t)| − λ_s·|a_t − a_prev|².
double r_sym(const HamiltonianNet& h_target, const PhaseState& z_t, const PhaseState& z_t1,
             std::span<const double> a_t, std::span<const double> a_prev, double lambda_s);
double r_sym_from_values(double h_t, double h_t1, std::span<const double> a_t,
                         std::span<const double> a_prev, double lambda_s);

// (1 − w)·rnd + w·sym.
double blend(double w, double rnd_normalized, double sym_normalized);

struct RewardSample {
  std::size_t step = 0;
  double w = 0.0;
  double raw_rnd = 0.0;
  double raw_sym = 0.0;
  double norm_rnd = 0.0;
  double norm_sym = 0.0;
  double blended = 0.0;
};

class RewardEngine {
 public:
  RewardEngine() = default;
  RewardEngine(RndPair rnd, AnnealSchedule schedule, double lambda_s);

  // Realized transition: both trackers are updated before normalizing.
  RewardSample blended_reward(const HamiltonianNet& h_target, std::span<const double> obs_t1,
                              const PhaseState& z_t, const PhaseState& z_t1,
                              std::span<const double> a_t, std::span<const double> a_prev,
                              std::size_t t);

  // Imagined transition: trackers read, not written.
  double imagined_reward(double raw_rnd, double raw_sym, std::size_t t) const;

  RndPair& rnd() { return rnd_; }
  const RndPair& rnd() const { return rnd_; }
  RunningStd& rnd_tracker() { return rnd_std_; }
  RunningStd& sym_tracker() { return sym_std_; }
  const RunningStd& rnd_tracker() const { return rnd_std_; }
  const RunningStd& sym_tracker() const { return sym_std_; }
  const AnnealSchedule& schedule() const { return schedule_; }
  double lambda_s() const { return lambda_s_; }

 private:
  RndPair rnd_;
  RunningStd rnd_std_;
  RunningStd sym_std_;
  AnnealSchedule schedule_;
  double lambda_s_ = 0.01;
};

struct CemConfig {
  std::size_t population = 64;
  std::size_t elites = 8;
  std::size_t iterations = 5;
  std::size_t horizon = 15;
  double init_std = 0.5;
  double noise_floor = 1e-3;
  double action_bound = 1.0;
  std::size_t workers = 1;
  void validate() const;
};

using StepFn = std::function<PhaseState(const PhaseState&, std::span<const double>)>;
// Reward for the transition z → z1 under action a, given the previous action.
using TransitionRewardFn = std::function<double(const PhaseState& z, const PhaseState& z1,
                                                std::span<const double> a,
                                                std::span<const double> a_prev)>;

struct CemResult {
  std::vector<Vec> actions;                   // final elite mean, length horizon
  double expected_return = 0.0;               // return of the best candidate
  std::vector<std::vector<Vec>> mean_trace;   // elite mean after each iteration
};

// Candidate noise is drawn sequentially from rng before evaluation, so results
// are identical for any worker count. Candidates whose rollout fails score −∞.
CemResult plan_cem(const StepFn& step, const TransitionRewardFn& reward, const PhaseState& z0,
                   std::span<const double> a_prev, std::size_t action_dim, const CemConfig& cfg,
                   Rng& rng, const std::vector<Vec>* initial_mean = nullptr);

}  // namespace hamworld
