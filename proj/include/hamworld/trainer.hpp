#pragma once

// Replay storage, the world-model objective and its update, the two-phase
// pretrain/adapt procedure, evaluation metrics and checkpoints.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hamworld/dynamics.hpp"
#include "hamworld/envs.hpp"
#include "hamworld/explore.hpp"
#include "hamworld/hamodel.hpp"
#include "hamworld/numcore.hpp"
#include "hamworld/repr.hpp"

namespace hamworld {

// ---------------------------------------------------------------- replay

struct StepRecord {
  Vec obs;
  Vec action;  // applied after obs
  std::uint64_t view = 0;
  PhaseState truth;  // evaluation only
};

struct SequenceBatch {
  std::vector<std::vector<Vec>> obs;      // B × T
  std::vector<std::vector<Vec>> actions;  // B × T
  std::size_t size() const { return obs.size(); }
  std::size_t length() const { return obs.empty() ? 0 : obs.front().size(); }
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_steps = 100000);

  void begin_episode();
  void add(StepRecord record);

  std::size_t steps() const { return steps_; }
  std::size_t episodes() const { return episodes_.size(); }
  std::size_t episode_length(std::size_t e) const { return episodes_.at(e).size(); }
  std::size_t capacity() const { return capacity_; }

  // B contiguous windows of length T drawn uniformly over all valid start
  // positions; windows never cross episode boundaries. Throws NotReady when
  // no episode is long enough.
  SequenceBatch sample_sequences(std::size_t batch, std::size_t length, Rng& rng) const;

  // Observation/action of one record, for training-side consumers.
  const Vec& observation(std::size_t e, std::size_t t) const { return episodes_.at(e).at(t).obs; }
  const Vec& action(std::size_t e, std::size_t t) const { return episodes_.at(e).at(t).action; }

  // Ground-truth snapshot; must never feed a training loss.
  const PhaseState& truth_for_evaluation(std::size_t e, std::size_t t) const {
    return episodes_.at(e).at(t).truth;
  }

 private:
  void evict();

  std::size_t capacity_;
  std::size_t steps_ = 0;
  std::deque<std::vector<StepRecord>> episodes_;
};

// ---------------------------------------------------------------- config

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t seq_len = 16;
  std::size_t pretrain_steps = 50000;  // env steps
  std::size_t adapt_steps = 5000;      // env steps
  std::size_t update_every = 4;        // env steps per world-model update
  std::size_t replan_every = 4;        // env steps between planner calls
  std::size_t warmup_steps = 1000;     // random smooth actions before planning
  std::size_t eval_every = 5000;       // env steps between metric rows
  std::size_t eval_episodes = 4;
  std::size_t eval_horizon = 100;
  std::size_t adapt_eval_every = 125;  // gradient steps between adaptation evals
  std::size_t buffer_capacity = 100000;
  double world_lr = 1e-4;
  double finetune_lr = 1e-5;
  double weight_decay = 1e-6;
  double grad_clip = 100.0;
  double ema_decay = 0.99;
  double prior_log_var_init = -2.0;
  IntegratorConfig train_integrator{Scheme::euler, 0.1};
  IntegratorConfig imagine_integrator{Scheme::leapfrog, 0.1};

  void validate() const;
};

// ---------------------------------------------------------------- model

struct WorldModel {
  std::size_t objects = 0;
  std::size_t dims = 0;
  std::size_t action_dim = 0;
  std::size_t obs_dim = 0;
  EncoderNet encoder;
  DecoderNet decoder;
  HamiltonianNet h;
  InputMatrixNet g;
  PriorVariance prior;
  TargetHamiltonian target;

  static WorldModel create(const EnvConfig& env, const NetSizes& sizes, double ema_decay,
                           double prior_log_var_init, Rng& rng);

  std::size_t latent_dim() const { return 2 * objects * dims; }
  std::size_t param_count() const;  // trainable parameters
  PhaseState latent(std::span<const double> flat) const {
    return PhaseState::from_flat(objects, dims, flat);
  }
  bool operator==(const WorldModel& o) const;
};

struct WorldOptimizer {
  AdamState encoder;
  AdamState decoder;
  AdamState h;
  AdamState g;
  AdamState prior;

  static WorldOptimizer create(const WorldModel& m, double lr, double weight_decay);
  void set_lr(double lr);
  bool operator==(const WorldOptimizer&) const = default;
};

// Which groups receive gradient steps.
struct TrainableGroups {
  bool encoder = true;
  bool decoder = true;
  bool dynamics = true;  // H, g and Σ
};

// Augmented views and reparameterization noise for one batch, drawn up front
// so the loss is a deterministic function of the parameters.
struct BatchNoise {
  std::vector<std::vector<Vec>> view_a;  // B × T augmented observations
  std::vector<std::vector<Vec>> view_b;
  std::vector<std::vector<Vec>> eps;     // B × T latent noise
};
BatchNoise draw_batch_noise(const SequenceBatch& batch, std::size_t objects,
                            std::size_t latent_dim, const AugmentConfig& aug, Rng& rng);

struct LossRecord {
  std::size_t step = 0;
  double l_pred = 0.0;
  double l_dyn = 0.0;
  double l_rep = 0.0;
  double l_vr = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
  bool skipped = false;
};

struct WorldGradients {
  Vec encoder;
  Vec decoder;
  Vec h;
  Vec g;
  Vec prior;

  static WorldGradients zeros(const WorldModel& m);
  double norm() const;
  bool finite() const;
  void scale(double c);
};

// Sequence objective summed over time and averaged over windows:
//   Σ_t [L_pred + β_dyn·L_dyn + β_rep·L_rep] + γ·Σ_t L_vr(t)
// with the prior at t predicted by one training-integrator step from the
// posterior mean at t−1. L_dyn differentiates through that input; L_rep
// treats the whole prior as a constant.
//
// stop_grad, when given, supplies every stop-gradient quantity (the
// posterior inside L_dyn, the prior inside L_rep). With
// stop_grad == &m this is the ordinary loss; holding it fixed while
// perturbing m makes the returned gradient the exact derivative of total.
LossRecord world_loss(const WorldModel& m, const SequenceBatch& batch, const BatchNoise& noise,
                      const IntegratorConfig& train_integrator, const LossWeights& w,
                      WorldGradients* grads, const TrainableGroups& groups = {},
                      const WorldModel* stop_grad = nullptr);

// One optimizer step: loss, global-norm clip, Adam, then EMA target update.
// Non-finite loss or gradients skip the step and set skipped.
LossRecord world_model_update(WorldModel& m, WorldOptimizer& opt, const SequenceBatch& batch,
                              const TrainConfig& cfg, const LossWeights& w,
                              const AugmentConfig& aug, Rng& rng,
                              const TrainableGroups& groups = {});

// ---------------------------------------------------------------- evaluation

// Population standard deviation of the h series.
double energy_drift(const PhaseTrajectory& traj);
double energy_drift(std::span<const double> h_series);

// Something that predicts future observations from one observation.
class ObservationPredictor {
 public:
  virtual ~ObservationPredictor() = default;
  // Returns predicted observations for steps 1..|actions|.
  virtual std::vector<Vec> predict(std::span<const double> obs0,
                                   const std::vector<Vec>& actions) const = 0;
};

// Encode (posterior mean), roll the learned field, decode every step.
class WorldModelPredictor final : public ObservationPredictor {
 public:
  WorldModelPredictor(const WorldModel& m, IntegratorConfig cfg) : m_(m), cfg_(cfg) {}
  std::vector<Vec> predict(std::span<const double> obs0,
                           const std::vector<Vec>& actions) const override;

 private:
  const WorldModel& m_;
  IntegratorConfig cfg_;
};

// Inverse of the identity-view observation map.
PhaseState recover_state(const EnvConfig& cfg, std::span<const double> obs);

// Exact env stepping behind a perfect encoder/decoder.
class EnvOraclePredictor final : public ObservationPredictor {
 public:
  explicit EnvOraclePredictor(EnvConfig cfg) : cfg_(std::move(cfg)) {}
  std::vector<Vec> predict(std::span<const double> obs0,
                           const std::vector<Vec>& actions) const override;

 private:
  EnvConfig cfg_;
};

// The env's own (H, g) integrated at the agent dt with a chosen scheme.
class TrueFieldPredictor final : public ObservationPredictor {
 public:
  TrueFieldPredictor(EnvConfig cfg, IntegratorConfig integ);
  std::vector<Vec> predict(std::span<const double> obs0,
                           const std::vector<Vec>& actions) const override;

 private:
  EnvConfig cfg_;
  IntegratorConfig integ_;
  std::unique_ptr<VectorField> field_;
};

struct PredictionReport {
  double mse = 0.0;     // mean over episodes, steps and coordinates
  Vec per_step;         // mean over episodes and coordinates, length H
};

// Reset n episodes, predict H zero-action steps from the first observation
// and compare with the env's noise-free identity-view observations.
PredictionReport prediction_mse(const ObservationPredictor& predictor, const EnvConfig& env,
                                std::size_t horizon, std::size_t episodes, Rng& rng);

// Zero-action rollouts of the learned field from encoded reset observations;
// returns σ_H per episode.
Vec learned_energy_drift(const WorldModel& m, const EnvConfig& env, const IntegratorConfig& integ,
                         std::size_t horizon, std::size_t episodes, Rng& rng);

// Range of H_φ along rollouts under uniformly random actions.
double learned_energy_range(const WorldModel& m, const EnvConfig& env,
                            const IntegratorConfig& integ, std::size_t horizon,
                            std::size_t episodes, Rng& rng);

// ---------------------------------------------------------------- baseline

// Unstructured next-observation MLP on [obs, a] → Δobs.
struct MlpBaseline {
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  MlpSpec spec;
  ParamVector params;
  AdamState optimizer;

  // Two hidden layers sized so the parameter count is as close as possible
  // to target_params.
  static MlpBaseline create(std::size_t obs_dim, std::size_t action_dim,
                            std::size_t target_params, double lr, Rng& rng);
  // Mean one-step squared error over all transitions; accumulates its
  // gradient into grad when given.
  double loss(const SequenceBatch& batch, Vec* grad = nullptr) const;
  // One Adam step on loss(); returns the pre-step loss.
  double train_step(const SequenceBatch& batch);
};

class BaselinePredictor final : public ObservationPredictor {
 public:
  explicit BaselinePredictor(const MlpBaseline& b) : b_(b) {}
  std::vector<Vec> predict(std::span<const double> obs0,
                           const std::vector<Vec>& actions) const override;

 private:
  const MlpBaseline& b_;
};

// ---------------------------------------------------------------- pipeline

struct RunConfig;  // config.hpp

struct MetricsRow {
  std::size_t step = 0;
  std::size_t updates = 0;
  double w = 0.0;
  double sigma_leapfrog = 0.0;
  double sigma_euler = 0.0;
  double mse = 0.0;
  double loss = 0.0;
};

struct Incident {
  std::size_t step = 0;
  std::string what;
};

struct CollectionStats {
  std::size_t transitions = 0;
  double mean_action_jerk = 0.0;  // mean |a_t − a_{t−1}|² within episodes
};

struct PretrainResult {
  WorldModel model;
  WorldOptimizer optimizer;
  RewardEngine rewards;
  ReplayBuffer buffer;
  std::size_t env_steps = 0;
  std::size_t updates = 0;
  std::vector<MetricsRow> metrics;
  std::vector<LossRecord> losses;
  std::vector<RewardSample> exploration;
  std::vector<Incident> incidents;
  CollectionStats collection;
};

PretrainResult pretrain(const RunConfig& cfg);

enum class AdaptMode { finetune, zero_shot, from_scratch };
std::string_view to_string(AdaptMode m);
AdaptMode adapt_mode_from_string(std::string_view s);

struct AdaptPoint {
  std::size_t updates = 0;
  double mse = 0.0;
};

struct AdaptResult {
  WorldModel model;
  WorldOptimizer optimizer;
  std::vector<AdaptPoint> curve;
  std::vector<LossRecord> losses;
  std::vector<Incident> incidents;
  std::size_t updates = 0;
};

// Collects new-env data with a seeded smooth random policy; identical for
// every mode given the same config.
ReplayBuffer collect_adaptation_data(const RunConfig& cfg);

// finetune: encoder and decoder frozen, H/g/Σ at the fine-tune lr.
// zero_shot: evaluation only. from_scratch: fresh model, all groups, world lr.
AdaptResult adapt(const WorldModel& pretrained, const RunConfig& cfg, AdaptMode mode,
                  const ReplayBuffer& data);

// Number of gradient steps at the first curve point with mse ≤ threshold,
// or nullopt if never reached.
std::optional<std::size_t> steps_to_threshold(const std::vector<AdaptPoint>& curve,
                                              double threshold);

// ---------------------------------------------------------------- checkpoints

struct Checkpoint {
  WorldModel model;
  WorldOptimizer optimizer;
  std::size_t step = 0;
  std::string config_hash;
};

std::string checkpoint_to_json(const Checkpoint& c);
// Throws CorruptFile on malformed input and CheckpointMismatch when
// expected_hash is non-empty and differs.
Checkpoint checkpoint_from_json(const std::string& text, const std::string& expected_hash = "");
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path, const std::string& expected_hash = "");

// ---------------------------------------------------------------- csv

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::string loss_csv(const std::vector<LossRecord>& rows);
std::string exploration_csv(const std::vector<RewardSample>& rows);
std::string adaptation_csv(const std::vector<AdaptPoint>& rows);

}  // namespace hamworld
