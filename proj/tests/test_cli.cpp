#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "hamworld_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(HAMWORLD_CLI) + " " + args + " >" + (kWork / "out.txt").string() +
                          " 2>" + (kWork / "err.txt").string();
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path p = kWork / name;
  std::ofstream(p) << body;
  return p;
}

std::string tiny(const std::string& out_dir, const std::string& extra = "") {
  return R"({"kind": "pendulum", "seed": 2, "output_dir": ")" + (kWork / out_dir).string() + R"(",
    "env": {"episode_length": 50},
    "train": {"pretrain_steps": 200, "warmup_steps": 150, "update_every": 10, "eval_every": 100,
              "eval_episodes": 2, "eval_horizon": 10, "batch_size": 4, "seq_len": 6,
              "adapt_steps": 100, "adapt_eval_every": 5},
    "planner": {"population": 8, "elites": 2, "iterations": 2, "horizon": 4},
    "model": {"hidden": )" + (extra.empty() ? "12" : extra) + R"(, "hidden_layers": 1}})";
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

}  // namespace

TEST_F(Cli, UsageErrorsAreConfigErrors) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("pretrain"), 2);
  EXPECT_EQ(run("pretrain --config /nonexistent.json"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, BadConfigExitsTwoWithLine) {
  const fs::path p = write_config("bad.json", "{\n  \"kind\": \"pendulum\",\n  \"seed\": 1,\n  \"trian\": {}\n}");
  EXPECT_EQ(run("pretrain --config " + p.string()), 2);
  EXPECT_NE(slurp(kWork / "err.txt").find("line 4"), std::string::npos);
  const fs::path q = write_config("missing.json", R"({"seed": 1})");
  EXPECT_EQ(run("pretrain --config " + q.string()), 2);
  EXPECT_NE(slurp(kWork / "err.txt").find("kind"), std::string::npos);
}

TEST_F(Cli, PretrainAdaptAndCheckpointErrors) {
  const fs::path cfg = write_config("run.json", tiny("run"));
  ASSERT_EQ(run("pretrain --config " + cfg.string()), 0) << slurp(kWork / "err.txt");
  for (const char* f : {"checkpoint.json", "metrics.csv", "losses.csv", "exploration.csv",
                        "incidents.log", "resolved_config.json", "code_version.txt"}) {
    EXPECT_TRUE(fs::exists(kWork / "run" / f)) << f;
  }
  const std::string metrics = slurp(kWork / "run" / "metrics.csv");

  // Refuses to clobber, then reproduces byte-identical output when allowed.
  EXPECT_EQ(run("pretrain --config " + cfg.string()), 1);
  EXPECT_EQ(run("pretrain --overwrite --config " + cfg.string()), 0);
  EXPECT_EQ(slurp(kWork / "run" / "metrics.csv"), metrics);

  const std::string ckpt = (kWork / "run" / "checkpoint.json").string();
  EXPECT_EQ(run("adapt --mode finetune --config " + cfg.string() + " --checkpoint " + ckpt), 0)
      << slurp(kWork / "err.txt");
  EXPECT_TRUE(fs::exists(kWork / "run" / "adapt-finetune" / "adaptation.csv"));
  EXPECT_EQ(run("adapt --mode zero-shot --config " + cfg.string() + " --checkpoint " + ckpt), 0);
  EXPECT_EQ(run("adapt --mode sideways --config " + cfg.string() + " --checkpoint " + ckpt), 2);

  // Different network width: incompatible checkpoint.
  const fs::path wide = write_config("wide.json", tiny("wide", "16"));
  EXPECT_EQ(run("adapt --config " + wide.string() + " --checkpoint " + ckpt), 3);
  const std::string err = slurp(kWork / "err.txt");
  EXPECT_NE(err.find("expected hash"), std::string::npos) << err;
  EXPECT_NE(err.find("checkpoint hash"), std::string::npos) << err;

  const fs::path broken = kWork / "broken.json";
  std::ofstream(broken) << slurp(ckpt).substr(0, 100);
  EXPECT_EQ(run("adapt --config " + cfg.string() + " --checkpoint " + broken.string()), 3);
  EXPECT_EQ(run("ablate-integrator --overwrite --config " + cfg.string() + " --checkpoint " + ckpt), 0);
  EXPECT_NE(slurp(kWork / "out.txt").find("leapfrog,"), std::string::npos);
}

TEST_F(Cli, AblateTrueField) {
  const fs::path cfg = write_config("ablate.json", tiny("ablate"));
  ASSERT_EQ(run("ablate-integrator --config " + cfg.string()), 0) << slurp(kWork / "err.txt");
  const std::string csv = slurp(kWork / "ablate" / "ablate-integrator" / "ablate_integrator.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scheme,mse_h10,sigma_h");
  EXPECT_NE(csv.find("\neuler,"), std::string::npos);
  EXPECT_NE(csv.find("\nleapfrog,"), std::string::npos);
}

TEST_F(Cli, GradcheckFaultInjectionFails) {
  EXPECT_EQ(run("gradcheck --inject-fault hamiltonian_params"), 1);
  EXPECT_NE(slurp(kWork / "out.txt").find("FAIL"), std::string::npos);
  EXPECT_NE(slurp(kWork / "err.txt").find("hamiltonian_params"), std::string::npos);
  EXPECT_EQ(run("gradcheck --inject-fault no_such_family"), 2);
}
