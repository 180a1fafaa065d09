#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "hamworld/hamworld.h"

namespace {

int report(hw_status s, hw_result* r) {
  std::fputs(hw_result_output(r), stdout);
  if (s != HW_OK) {
    const char* err = r != nullptr ? hw_result_error(r) : hw_last_error();
    std::fprintf(stderr, "error: %s\n", *err != '\0' ? err : hw_last_error());
  }
  hw_result_free(r);
  return static_cast<int>(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hamworld: controlled-Hamiltonian latent world models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hw_version()));

  hw_run_options opts{0, 0};
  bool overwrite = false;
  std::string config, checkpoint, mode = "finetune", fault;
  auto common = [&](CLI::App* c) {
    c->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    c->add_flag("--overwrite", overwrite, "Allow writing into a non-empty run directory");
    c->add_option("--workers", opts.workers, "Parallel planner workers (0: from config)");
  };

  CLI::App* pre = app.add_subcommand("pretrain", "Unsupervised pretraining run");
  common(pre);

  CLI::App* ad = app.add_subcommand("adapt", "Adapt a pretrained checkpoint to the new env");
  common(ad);
  ad->add_option("--checkpoint", checkpoint, "Pretrained checkpoint")->required();
  ad->add_option("--mode", mode, "finetune | zero-shot | from-scratch")
      ->check(CLI::IsMember({"finetune", "zero-shot", "from-scratch"}));

  CLI::App* ab = app.add_subcommand("ablate-integrator", "Euler vs leapfrog comparison CSV");
  common(ab);
  ab->add_option("--checkpoint", checkpoint, "Trained checkpoint (omit for the true field)");

  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
  gc->add_option("--inject-fault", fault, "Corrupt one family's gradient (testing aid)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : HW_ERR_CONFIG;
  }

  opts.overwrite = overwrite ? 1 : 0;
  hw_result* r = nullptr;
  hw_status s = HW_OK;
  if (pre->parsed()) {
    s = hw_cmd_pretrain(config.c_str(), &opts, &r);
  } else if (ad->parsed()) {
    s = hw_cmd_adapt(config.c_str(), checkpoint.c_str(), mode.c_str(), &opts, &r);
  } else if (ab->parsed()) {
    s = hw_cmd_ablate_integrator(config.c_str(), checkpoint.c_str(), &opts, &r);
  } else {
    s = hw_cmd_gradcheck(fault.c_str(), &r);
  }
  return report(s, r);
}
