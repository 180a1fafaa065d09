#pragma once

// Command implementations behind the CLI. Each returns an exit status
// (0 ok, 1 runtime failure, 2 config error, 3 checkpoint incompatibility)
// plus the text it would print.

#include <cstddef>
#include <string>

namespace hamworld {

enum ExitStatus : int {
  kExitOk = 0,
  kExitRuntime = 1,
  kExitConfig = 2,
  kExitCheckpoint = 3,
};

struct CommandOptions {
  bool overwrite = false;   // false: refuse to touch a run dir that has outputs
  std::size_t workers = 0;  // 0: keep the config's value
};

struct CommandResult {
  int status = kExitOk;
  std::string output;  // stdout text
  std::string error;   // stderr text
};

CommandResult cmd_pretrain(const std::string& config_path, const CommandOptions& opts);
CommandResult cmd_adapt(const std::string& config_path, const std::string& checkpoint_path,
                        const std::string& mode, const CommandOptions& opts);
// Empty checkpoint_path evaluates the env's ground-truth field instead.
CommandResult cmd_ablate_integrator(const std::string& config_path,
                                    const std::string& checkpoint_path,
                                    const CommandOptions& opts);
CommandResult cmd_gradcheck(const std::string& corrupt_family = "");

const char* code_version();

}  // namespace hamworld
