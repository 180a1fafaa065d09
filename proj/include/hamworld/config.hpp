#pragma once

// Run configuration: one JSON document with every default baked in, so the
// minimal config is {"kind": ..., "seed": ...}.

#include <cstdint>
#include <string>

#include "hamworld/envs.hpp"
#include "hamworld/explore.hpp"
#include "hamworld/hamodel.hpp"
#include "hamworld/repr.hpp"
#include "hamworld/trainer.hpp"

namespace hamworld {

// Overrides applied to the pretraining env to build the adaptation env.
struct AdaptEnvOverrides {
  double gravity_scale = 1.5;
  double mass_scale = 1.0;
  double damping = 0.0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir;  // empty: runs/<kind>-<seed>
  std::size_t workers = 1;
  EnvConfig env;
  AdaptEnvOverrides adapt;
  TrainConfig train;
  LossWeights loss;
  AnnealSchedule anneal;
  AugmentConfig augment;
  CemConfig planner;
  NetSizes model;
  double rnd_lr = 1e-4;

  void validate() const;
  EnvConfig adapt_env() const;
};

// Throws ConfigError whose message carries "line N" for syntax errors,
// unknown keys and bad values, and names missing required keys.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Fully resolved document (every key present); parse(to_json(c)) == c.
std::string run_config_to_json(const RunConfig& cfg);

// Hash over the settings that shape the model's parameter layout. A
// checkpoint loads into any run whose hash matches.
std::string config_hash(const RunConfig& cfg);

// output_dir (or its default) placed under $HAMWORLD_OUTPUT_ROOT when set and
// the path is relative.
std::string resolve_output_dir(const RunConfig& cfg);

inline constexpr const char* kOutputRootEnv = "HAMWORLD_OUTPUT_ROOT";

}  // namespace hamworld
