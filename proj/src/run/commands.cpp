#include "hamworld/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hamworld/config.hpp"
#include "hamworld/errors.hpp"
#include "hamworld/gradcheck.hpp"
#include "hamworld/trainer.hpp"

#ifndef HAMWORLD_CODE_VERSION
#define HAMWORLD_CODE_VERSION "unknown"
#endif

namespace hamworld {
namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed: " + p.string());
}

// Creates dir; refuses when it already holds outputs and overwrite is off.
void prepare_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_directory(dir)) {
    throw IoError("output path exists and is not a directory: " + dir.string());
  }
  if (fs::exists(dir) && !fs::is_empty(dir) && !overwrite) {
    throw IoError("refusing to overwrite non-empty run directory " + dir.string() +
                  " (pass --overwrite=true)");
  }
  fs::create_directories(dir);
}

std::string incidents_text(const std::vector<Incident>& incidents) {
  std::ostringstream os;
  for (const Incident& i : incidents) os << "step " << i.step << ": " << i.what << '\n';
  return os.str();
}

RunConfig load_with_options(const std::string& path, const CommandOptions& opts) {
  RunConfig cfg = load_run_config(path);
  if (opts.workers > 0) {
    cfg.workers = opts.workers;
    cfg.planner.workers = opts.workers;
  }
  return cfg;
}

void write_common(const fs::path& dir, const RunConfig& cfg) {
  write_file(dir / "resolved_config.json", run_config_to_json(cfg));
  write_file(dir / "code_version.txt", std::string(code_version()) + "\n");
}

double median(Vec v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Maps library exceptions to exit statuses.
template <typename F>
CommandResult guarded(F&& body, const fs::path* incident_dir = nullptr) {
  CommandResult r;
  try {
    body(r);
  } catch (const ConfigError& e) {
    r.status = kExitConfig;
    r.error = e.what();
  } catch (const CheckpointMismatch& e) {
    r.status = kExitCheckpoint;
    r.error = std::string(e.what()) + "\nexpected hash: " + e.expected() +
              "\ncheckpoint hash: " + e.found();
  } catch (const CorruptFile& e) {
    r.status = kExitCheckpoint;
    r.error = e.what();
  } catch (const std::exception& e) {
    r.status = kExitRuntime;
    r.error = e.what();
    if (incident_dir != nullptr && fs::is_directory(*incident_dir)) {
      std::ofstream log(*incident_dir / "incidents.log", std::ios::app);
      log << "fatal: " << e.what() << '\n';
    }
  }
  return r;
}

}  // namespace

const char* code_version() { return HAMWORLD_CODE_VERSION; }

CommandResult cmd_pretrain(const std::string& config_path, const CommandOptions& opts) {
  fs::path dir;
  return guarded(
      [&](CommandResult& r) {
        const RunConfig cfg = load_with_options(config_path, opts);
        dir = resolve_output_dir(cfg);
        prepare_dir(dir, opts.overwrite);
        write_common(dir, cfg);
        PretrainResult res = pretrain(cfg);
        save_checkpoint((dir / "checkpoint.json").string(),
                        Checkpoint{res.model, res.optimizer, res.env_steps, config_hash(cfg)});
        write_file(dir / "metrics.csv", metrics_csv(res.metrics));
        write_file(dir / "losses.csv", loss_csv(res.losses));
        write_file(dir / "exploration.csv", exploration_csv(res.exploration));
        write_file(dir / "incidents.log", incidents_text(res.incidents));
        std::ostringstream os;
        os << "run_dir " << dir.string() << "\n"
           << "env_steps " << res.env_steps << "\n"
           << "updates " << res.updates << "\n"
           << "incidents " << res.incidents.size() << "\n";
        if (!res.metrics.empty()) {
          const MetricsRow& m = res.metrics.back();
          os << "final_mse " << fmt(m.mse) << "\n"
             << "final_sigma_leapfrog " << fmt(m.sigma_leapfrog) << "\n"
             << "final_sigma_euler " << fmt(m.sigma_euler) << "\n";
        }
        r.output = os.str();
      },
      &dir);
}

CommandResult cmd_adapt(const std::string& config_path, const std::string& checkpoint_path,
                        const std::string& mode_name, const CommandOptions& opts) {
  fs::path dir;
  return guarded(
      [&](CommandResult& r) {
        const RunConfig cfg = load_with_options(config_path, opts);
        const AdaptMode mode = adapt_mode_from_string(mode_name);
        const std::string hash = config_hash(cfg);
        const Checkpoint ckpt = load_checkpoint(checkpoint_path, hash);
        dir = fs::path(resolve_output_dir(cfg)) / ("adapt-" + std::string(to_string(mode)));
        prepare_dir(dir, opts.overwrite);
        write_common(dir, cfg);
        const ReplayBuffer data = collect_adaptation_data(cfg);
        const AdaptResult res = adapt(ckpt.model, cfg, mode, data);
        write_file(dir / "adaptation.csv", adaptation_csv(res.curve));
        write_file(dir / "losses.csv", loss_csv(res.losses));
        write_file(dir / "incidents.log", incidents_text(res.incidents));
        if (mode != AdaptMode::zero_shot) {
          save_checkpoint((dir / "checkpoint.json").string(),
                          Checkpoint{res.model, res.optimizer, ckpt.step + res.updates, hash});
        }
        std::ostringstream os;
        os << "run_dir " << dir.string() << "\n"
           << "mode " << to_string(mode) << "\n"
           << "updates " << res.updates << "\n"
           << "initial_mse " << fmt(res.curve.front().mse) << "\n"
           << "final_mse " << fmt(res.curve.back().mse) << "\n";
        r.output = os.str();
      },
      &dir);
}

CommandResult cmd_ablate_integrator(const std::string& config_path,
                                    const std::string& checkpoint_path,
                                    const CommandOptions& opts) {
  fs::path dir;
  return guarded(
      [&](CommandResult& r) {
        const RunConfig cfg = load_with_options(config_path, opts);
        const TrainConfig& tc = cfg.train;
        std::optional<Checkpoint> ckpt;
        if (!checkpoint_path.empty()) ckpt = load_checkpoint(checkpoint_path, config_hash(cfg));
        dir = fs::path(resolve_output_dir(cfg)) / "ablate-integrator";
        prepare_dir(dir, opts.overwrite);
        write_common(dir, cfg);

        std::ostringstream csv;
        csv << "scheme,mse_h" << tc.eval_horizon << ",sigma_h\n";
        const Rng root = Rng(cfg.seed).split("ablate");
        for (Scheme scheme : {Scheme::euler, Scheme::leapfrog}) {
          const IntegratorConfig integ{scheme, cfg.env.dt};
          Rng r_mse = root.split("mse"), r_drift = root.split("drift");
          double mse = 0.0, sigma = 0.0;
          if (ckpt) {
            mse = prediction_mse(WorldModelPredictor(ckpt->model, integ), cfg.env, tc.eval_horizon,
                                 tc.eval_episodes, r_mse).mse;
            sigma = median(learned_energy_drift(ckpt->model, cfg.env, integ, tc.eval_horizon,
                                                tc.eval_episodes, r_drift));
          } else {
            mse = prediction_mse(TrueFieldPredictor(cfg.env, integ), cfg.env, tc.eval_horizon,
                                 tc.eval_episodes, r_mse).mse;
            ScopedIntegratorPhase phase(IntegratorPhase::ablation);
            const auto field = true_field(cfg.env);
            const std::vector<Vec> zeros(tc.eval_horizon, Vec(cfg.env.action_dim(), 0.0));
            Vec sig;
            for (std::size_t e = 0; e < tc.eval_episodes; ++e) {
              const PhaseState s0 = env_reset(cfg.env, r_drift);
              const Vec h = rollout(*field, integ, s0, zeros).trajectory.h_series();
              sig.push_back(h.size() >= 2 ? energy_drift(h) : INFINITY);
            }
            sigma = median(sig);
          }
          csv << to_string(scheme) << ',' << fmt(mse) << ',' << fmt(sigma) << '\n';
        }
        write_file(dir / "ablate_integrator.csv", csv.str());
        r.output = csv.str();
      },
      &dir);
}

CommandResult cmd_gradcheck(const std::string& corrupt_family) {
  return guarded([&](CommandResult& r) {
    const GradcheckReport rep = run_gradcheck(0, corrupt_family);
    std::ostringstream os;
    for (const GradcheckFamily& f : rep.families) {
      char line[128];
      std::snprintf(line, sizeof line, "%-20s %.3e %s\n", f.name.c_str(), f.max_rel_error,
                    f.passed ? "ok" : "FAIL");
      os << line;
    }
    r.output = os.str();
    if (!rep.passed()) {
      r.status = kExitRuntime;
      r.error = "gradcheck failed: " + rep.first_failure();
    }
  });
}

}  // namespace hamworld
