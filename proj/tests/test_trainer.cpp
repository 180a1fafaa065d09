#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "hamworld/config.hpp"
#include "hamworld/errors.hpp"
#include "hamworld/trainer.hpp"

using namespace hamworld;

namespace {

StepRecord record(double e, double t) { return StepRecord{{e, t}, {0.0}, 0, PhaseState(1, 1)}; }

// Small pendulum run: short episodes, tiny planner and networks.
RunConfig tiny_config(std::uint64_t seed = 1) {
  return parse_run_config(R"({"kind": "pendulum", "seed": )" + std::to_string(seed) + R"(,
    "env": {"episode_length": 50},
    "train": {"pretrain_steps": 240, "warmup_steps": 160, "update_every": 8, "eval_every": 120,
              "eval_episodes": 2, "eval_horizon": 10, "batch_size": 4, "seq_len": 6,
              "adapt_steps": 120, "adapt_eval_every": 5},
    "anneal": {"t_anneal": 200},
    "planner": {"population": 8, "elites": 2, "iterations": 2, "horizon": 4},
    "model": {"hidden": 12, "hidden_layers": 1}})");
}

SequenceBatch small_batch(const RunConfig& cfg, Rng& rng) {
  ReplayBuffer buf;
  buf.begin_episode();
  PhaseState s = env_reset(cfg.env, rng);
  for (int t = 0; t < 30; ++t) {
    const Vec a{rng.uniform(-1, 1)};
    buf.add(StepRecord{observe_clean(s, ViewTransform{}, cfg.env).values, a, 0, s});
    s = env_step(cfg.env, s, a);
  }
  return buf.sample_sequences(cfg.train.batch_size, cfg.train.seq_len, rng);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Replay, WindowsStayInsideOneEpisode) {
  ReplayBuffer buf;
  buf.begin_episode();
  for (int t = 0; t < 5; ++t) buf.add(record(0, t));
  buf.begin_episode();
  for (int t = 0; t < 20; ++t) buf.add(record(1, t));
  Rng rng(1);
  const SequenceBatch b = buf.sample_sequences(64, 6, rng);
  ASSERT_EQ(b.size(), 64u);
  for (const auto& window : b.obs) {
    ASSERT_EQ(window.size(), 6u);
    for (std::size_t t = 0; t < window.size(); ++t) {
      EXPECT_EQ(window[t][0], 1.0);
      EXPECT_EQ(window[t][1], window[0][1] + static_cast<double>(t));
    }
  }
  EXPECT_THROW(buf.sample_sequences(1, 21, rng), NotReady);
}

TEST(Replay, EvictsWholeOldEpisodes) {
  ReplayBuffer buf(10);
  for (int e = 0; e < 4; ++e) {
    buf.begin_episode();
    for (int t = 0; t < 4; ++t) buf.add(record(e, t));
  }
  EXPECT_LE(buf.steps(), 12u);
  EXPECT_EQ(buf.observation(0, 0)[0], 2.0);
}

TEST(Replay, UniformOverStartPositions) {
  ReplayBuffer buf;
  buf.begin_episode();
  for (int t = 0; t < 4; ++t) buf.add(record(0, t));
  Rng rng(2);
  int counts[3] = {0, 0, 0};
  const SequenceBatch b = buf.sample_sequences(3000, 2, rng);
  for (const auto& w : b.obs) ++counts[static_cast<int>(w[0][1])];
  for (int c : counts) EXPECT_NEAR(c, 1000, 100);
}

TEST(EnergyDrift, PopulationStd) {
  EXPECT_DOUBLE_EQ(energy_drift(Vec{2, 4, 4, 4, 5, 5, 7, 9}), 2.0);
  EXPECT_EQ(energy_drift(Vec{1.5, 1.5}), 0.0);
}

TEST(StepsToThreshold, FirstCrossing) {
  const std::vector<AdaptPoint> curve{{0, 1.0}, {10, 0.5}, {20, 0.2}, {30, 0.1}, {40, 0.3}};
  EXPECT_EQ(steps_to_threshold(curve, 0.25), 20u);
  EXPECT_EQ(steps_to_threshold(curve, 1.0), 0u);
  EXPECT_FALSE(steps_to_threshold(curve, 0.05).has_value());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const RunConfig cfg = tiny_config();
  Rng rng(3);
  WorldModel m = WorldModel::create(cfg.env, cfg.model, 0.99, -2.0, rng);
  WorldOptimizer opt = WorldOptimizer::create(m, 1e-3, 1e-6);
  const SequenceBatch batch = small_batch(cfg, rng);
  world_model_update(m, opt, batch, cfg.train, cfg.loss, cfg.augment, rng);
  m.h.params().raw()[0] = 0.1 + 1e-17;  // not representable in short decimal form
  const Checkpoint c{m, opt, 77, config_hash(cfg)};
  const std::string text = checkpoint_to_json(c);
  const Checkpoint back = checkpoint_from_json(text, config_hash(cfg));
  EXPECT_TRUE(back.model == m);
  EXPECT_TRUE(back.optimizer == opt);
  EXPECT_EQ(back.step, 77u);
  EXPECT_EQ(checkpoint_to_json(back), text);
}

TEST(Checkpoint, WrongHashAndCorruption) {
  const RunConfig cfg = tiny_config();
  Rng rng(4);
  const WorldModel m = WorldModel::create(cfg.env, cfg.model, 0.99, -2.0, rng);
  const Checkpoint c{m, WorldOptimizer::create(m, 1e-4, 0.0), 1, config_hash(cfg)};
  const std::string text = checkpoint_to_json(c);
  try {
    checkpoint_from_json(text, "0000000000000000");
    FAIL() << "expected CheckpointMismatch";
  } catch (const CheckpointMismatch& e) {
    EXPECT_EQ(e.expected(), "0000000000000000");
    EXPECT_EQ(e.found(), config_hash(cfg));
  }
  EXPECT_THROW(checkpoint_from_json(text.substr(0, text.size() / 2)), CorruptFile);
  EXPECT_THROW(checkpoint_from_json("{}"), CorruptFile);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.json"), Error);
}

TEST(WorldLoss, TotalIsTheWeightedSum) {
  const RunConfig cfg = tiny_config();
  Rng rng(5);
  const WorldModel m = WorldModel::create(cfg.env, cfg.model, 0.99, -2.0, rng);
  const SequenceBatch batch = small_batch(cfg, rng);
  const BatchNoise noise = draw_batch_noise(batch, 3, m.latent_dim(), cfg.augment, rng);
  const LossRecord r = world_loss(m, batch, noise, cfg.train.train_integrator, cfg.loss, nullptr);
  EXPECT_NEAR(r.total,
              r.l_pred + cfg.loss.beta_dyn * r.l_dyn + cfg.loss.beta_rep * r.l_rep + cfg.loss.gamma * r.l_vr,
              1e-9 * std::abs(r.total));
  LossWeights no_vr = cfg.loss;
  no_vr.gamma = 0.0;
  const LossRecord z = world_loss(m, batch, noise, cfg.train.train_integrator, no_vr, nullptr);
  EXPECT_NEAR(z.total, r.total - cfg.loss.gamma * r.l_vr, 1e-9 * std::abs(r.total));
}

TEST(WorldLoss, GradientMatchesFiniteDifferencesOnDynamics) {
  const RunConfig cfg = tiny_config();
  Rng rng(6);
  const WorldModel m = WorldModel::create(cfg.env, NetSizes{6, 1}, 0.99, -2.0, rng);
  SequenceBatch batch = small_batch(cfg, rng);
  batch.obs.resize(2);
  batch.actions.resize(2);
  for (auto& w : batch.obs) w.resize(3);
  for (auto& w : batch.actions) w.resize(3);
  LossWeights lw = cfg.loss;
  lw.free_nats = 0.0;
  const BatchNoise noise = draw_batch_noise(batch, 3, m.latent_dim(), cfg.augment, rng);
  WorldGradients g = WorldGradients::zeros(m);
  world_loss(m, batch, noise, cfg.train.train_integrator, lw, &g, {}, &m);
  const ScalarFn f = [&](std::span<const double> w) {
    WorldModel q = m;
    std::copy(w.begin(), w.end(), q.h.params().raw().begin());
    return world_loss(q, batch, noise, cfg.train.train_integrator, lw, nullptr, {}, &m).total;
  };
  EXPECT_LT(finite_diff_check(f, m.h.params().raw(), g.h, 1e-6), 1e-5);
}

TEST(WorldUpdate, LossFallsOnAFixedBatch) {
  RunConfig cfg = tiny_config();
  Rng rng(7);
  WorldModel m = WorldModel::create(cfg.env, cfg.model, 0.99, -2.0, rng);
  WorldOptimizer opt = WorldOptimizer::create(m, 3e-3, 0.0);
  const SequenceBatch batch = small_batch(cfg, rng);
  const BatchNoise noise = draw_batch_noise(batch, 3, m.latent_dim(), cfg.augment, rng);
  const double before = world_loss(m, batch, noise, cfg.train.train_integrator, cfg.loss, nullptr).total;
  for (int i = 0; i < 60; ++i) world_model_update(m, opt, batch, cfg.train, cfg.loss, cfg.augment, rng);
  const double after = world_loss(m, batch, noise, cfg.train.train_integrator, cfg.loss, nullptr).total;
  EXPECT_LT(after, before);
}

TEST(WorldUpdate, FrozenGroupsDoNotMove) {
  RunConfig cfg = tiny_config();
  Rng rng(8);
  WorldModel m = WorldModel::create(cfg.env, cfg.model, 0.99, -2.0, rng);
  WorldOptimizer opt = WorldOptimizer::create(m, 1e-3, 0.0);
  const SequenceBatch batch = small_batch(cfg, rng);
  const WorldModel before = m;
  world_model_update(m, opt, batch, cfg.train, cfg.loss, cfg.augment, rng,
                     TrainableGroups{false, false, true});
  EXPECT_EQ(m.encoder.params(), before.encoder.params());
  EXPECT_EQ(m.decoder.params(), before.decoder.params());
  EXPECT_FALSE(m.h.params() == before.h.params());
}

TEST(WorldUpdate, TrainsWithEulerOnly) {
  RunConfig cfg = tiny_config();
  Rng rng(9);
  WorldModel m = WorldModel::create(cfg.env, cfg.model, 0.99, -2.0, rng);
  WorldOptimizer opt = WorldOptimizer::create(m, 1e-4, 0.0);
  const SequenceBatch batch = small_batch(cfg, rng);
  integrator_counters().reset();
  world_model_update(m, opt, batch, cfg.train, cfg.loss, cfg.augment, rng);
  const auto& c = integrator_counters();
  EXPECT_GT(c.get(IntegratorPhase::training, Scheme::euler), 0u);
  EXPECT_EQ(c.get(IntegratorPhase::training, Scheme::leapfrog), 0u);
}

TEST(Pipeline, DualIntegrationAcrossPhases) {
  integrator_counters().reset();
  const PretrainResult r = pretrain(tiny_config());
  const auto& c = integrator_counters();
  EXPECT_GT(c.get(IntegratorPhase::training, Scheme::euler), 0u);
  EXPECT_EQ(c.get(IntegratorPhase::training, Scheme::leapfrog), 0u);
  EXPECT_GT(c.get(IntegratorPhase::imagination, Scheme::leapfrog), 0u);
  EXPECT_EQ(c.get(IntegratorPhase::imagination, Scheme::euler), 0u);
  EXPECT_EQ(r.env_steps, 240u);
  EXPECT_EQ(r.updates, 240u / 8);
  EXPECT_EQ(r.buffer.steps(), 240u);
  EXPECT_FALSE(r.metrics.empty());
  EXPECT_EQ(r.exploration.size(), 240u);
}

TEST(Pipeline, SameSeedSameBytes) {
  const PretrainResult a = pretrain(tiny_config(5));
  const PretrainResult b = pretrain(tiny_config(5));
  const PretrainResult c = pretrain(tiny_config(6));
  EXPECT_EQ(metrics_csv(a.metrics), metrics_csv(b.metrics));
  EXPECT_EQ(loss_csv(a.losses), loss_csv(b.losses));
  EXPECT_EQ(exploration_csv(a.exploration), exploration_csv(b.exploration));
  EXPECT_NE(loss_csv(a.losses), loss_csv(c.losses));
}

TEST(Adapt, FinetuneFreezesRepresentation) {
  const RunConfig cfg = tiny_config();
  const PretrainResult pre = pretrain(cfg);
  const ReplayBuffer data = collect_adaptation_data(cfg);
  const AdaptResult ft = adapt(pre.model, cfg, AdaptMode::finetune, data);
  EXPECT_EQ(ft.model.encoder.params(), pre.model.encoder.params());
  EXPECT_EQ(ft.model.decoder.params(), pre.model.decoder.params());
  EXPECT_FALSE(ft.model.h.params() == pre.model.h.params());
  EXPECT_EQ(ft.optimizer.h.config.lr, cfg.train.finetune_lr);
  EXPECT_GT(ft.updates, 0u);
  EXPECT_EQ(ft.curve.front().updates, 0u);

  const AdaptResult zs = adapt(pre.model, cfg, AdaptMode::zero_shot, data);
  EXPECT_EQ(zs.updates, 0u);
  EXPECT_TRUE(zs.model == pre.model);
  EXPECT_EQ(zs.curve.front().mse, ft.curve.front().mse);

  const AdaptResult fs = adapt(pre.model, cfg, AdaptMode::from_scratch, data);
  EXPECT_FALSE(fs.model.encoder.params() == pre.model.encoder.params());
  EXPECT_EQ(fs.optimizer.h.config.lr, cfg.train.world_lr);
  EXPECT_EQ(adapt_mode_from_string("from_scratch"), AdaptMode::from_scratch);
  EXPECT_THROW(adapt_mode_from_string("partial"), ConfigError);
}

TEST(Adapt, DataIdenticalAcrossCalls) {
  const RunConfig cfg = tiny_config();
  const ReplayBuffer a = collect_adaptation_data(cfg), b = collect_adaptation_data(cfg);
  ASSERT_EQ(a.steps(), b.steps());
  EXPECT_EQ(a.observation(0, 3), b.observation(0, 3));
  EXPECT_EQ(a.action(0, 3), b.action(0, 3));
}

TEST(Baseline, CapacityMatchAndLearning) {
  const RunConfig cfg = tiny_config();
  Rng rng(10);
  const WorldModel m = WorldModel::create(cfg.env, cfg.model, 0.99, -2.0, rng);
  MlpBaseline b = MlpBaseline::create(cfg.env.obs_dim(), 1, m.param_count(), 1e-3, rng);
  const double ratio = static_cast<double>(b.params.size()) / static_cast<double>(m.param_count());
  EXPECT_NEAR(ratio, 1.0, 0.05);
  const SequenceBatch batch = small_batch(cfg, rng);
  const double first = b.loss(batch);
  for (int i = 0; i < 200; ++i) b.train_step(batch);
  EXPECT_LT(b.loss(batch), first);
}

TEST(Evaluation, OraclesAreExact) {
  RunConfig cfg = tiny_config();
  cfg.env.obs_noise_std = 0.0;  // the first observation is otherwise noisy
  Rng r1(11), r2(11);
  EXPECT_LT(prediction_mse(EnvOraclePredictor(cfg.env), cfg.env, 20, 3, r1).mse, 1e-24);
  Rng rng(12);
  const PhaseState s = env_reset(cfg.env, rng);
  const PhaseState back = recover_state(cfg.env, observe_clean(s, ViewTransform{}, cfg.env).values);
  EXPECT_NEAR(back.q[0], s.q[0], 1e-12);
  EXPECT_NEAR(back.p[0], s.p[0], 1e-12);
  const double fine = prediction_mse(
      TrueFieldPredictor(cfg.env, IntegratorConfig{Scheme::leapfrog, cfg.env.dt}), cfg.env, 20, 3, r2).mse;
  EXPECT_LT(fine, 1e-3);
}

TEST(Csv, HeadersAndFixedPrecision) {
  const std::string m = metrics_csv({MetricsRow{10, 2, 0.5, 0.1, 0.2, 1.0 / 3.0, 4.0}});
  EXPECT_EQ(m.substr(0, m.find('\n')), "step,updates,w,sigma_leapfrog,sigma_euler,mse,loss");
  EXPECT_NE(m.find("0.3333333333"), std::string::npos);
  const std::string a = adaptation_csv({AdaptPoint{5, 0.25}});
  EXPECT_EQ(a, "updates,mse\n5,0.25\n");
}

// Training code must never read the ground-truth state stored for evaluation.
TEST(Firewall, TrainingSourcesNeverReadTruth) {
  namespace fs = std::filesystem;
  const fs::path root = HAMWORLD_SOURCE_DIR;
  const std::regex truth_read(R"(truth_for_evaluation|\.truth\b|recover_state)");
  std::size_t scanned = 0;
  for (const char* dir : {"src/trainer", "src/repr", "src/explore", "src/hamodel"}) {
    for (const auto& entry : fs::directory_iterator(root / dir)) {
      const std::string name = entry.path().filename().string();
      if (name == "evaluation.cpp") continue;
      ++scanned;
      EXPECT_FALSE(std::regex_search(slurp(entry.path()), truth_read)) << entry.path();
    }
  }
  EXPECT_GT(scanned, 8u);
}
