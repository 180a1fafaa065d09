#include "hamworld/hamworld.h"

#include <cstring>
#include <string>

#include "hamworld/commands.hpp"
#include "hamworld/config.hpp"
#include "hamworld/errors.hpp"
#include "hamworld/trainer.hpp"

struct hw_config {
  hamworld::RunConfig cfg;
  std::string resolved;
};

struct hw_checkpoint {
  hamworld::Checkpoint ckpt;
};

struct hw_result {
  std::string output;
  std::string error;
};

namespace {

thread_local std::string g_last_error;

hw_status fail(hw_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

template <typename F>
hw_status guarded(F&& f) {
  g_last_error.clear();
  try {
    return f();
  } catch (const hamworld::ConfigError& e) {
    return fail(HW_ERR_CONFIG, e.what());
  } catch (const hamworld::CheckpointMismatch& e) {
    return fail(HW_ERR_CHECKPOINT, e.what());
  } catch (const hamworld::CorruptFile& e) {
    return fail(HW_ERR_CHECKPOINT, e.what());
  } catch (const std::exception& e) {
    return fail(HW_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(HW_ERR_RUNTIME, "unknown error");
  }
}

hw_status copy_out(const std::string& s, char* buf, size_t len) {
  if (buf == nullptr || len < s.size() + 1) return fail(HW_ERR_ARGUMENT, "buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return HW_OK;
}

hamworld::CommandOptions options(const hw_run_options* o) {
  hamworld::CommandOptions c;
  if (o != nullptr) {
    c.overwrite = o->overwrite != 0;
    c.workers = o->workers;
  }
  return c;
}

hw_status finish(const hamworld::CommandResult& r, hw_result** out) {
  if (out != nullptr) *out = new hw_result{r.output, r.error};
  if (r.status != 0) g_last_error = r.error;
  return static_cast<hw_status>(r.status);
}

std::string str(const char* s) { return s == nullptr ? std::string() : std::string(s); }

}  // namespace

extern "C" {

const char* hw_version(void) { return hamworld::code_version(); }

const char* hw_last_error(void) { return g_last_error.c_str(); }

hw_status hw_config_load(const char* path, hw_config** out) {
  if (path == nullptr || out == nullptr) return fail(HW_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    auto* c = new hw_config{hamworld::load_run_config(path), {}};
    c->resolved = hamworld::run_config_to_json(c->cfg);
    *out = c;
    return HW_OK;
  });
}

hw_status hw_config_parse(const char* json_text, hw_config** out) {
  if (json_text == nullptr || out == nullptr) return fail(HW_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    auto* c = new hw_config{hamworld::parse_run_config(json_text), {}};
    c->resolved = hamworld::run_config_to_json(c->cfg);
    *out = c;
    return HW_OK;
  });
}

void hw_config_free(hw_config* cfg) { delete cfg; }

hw_status hw_config_hash(const hw_config* cfg, char* buf, size_t len) {
  if (cfg == nullptr) return fail(HW_ERR_ARGUMENT, "null config");
  return guarded([&] { return copy_out(hamworld::config_hash(cfg->cfg), buf, len); });
}

const char* hw_config_resolved_json(const hw_config* cfg) {
  return cfg == nullptr ? nullptr : cfg->resolved.c_str();
}

hw_status hw_checkpoint_load(const char* path, const char* expected_hash, hw_checkpoint** out) {
  if (path == nullptr || out == nullptr) return fail(HW_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new hw_checkpoint{hamworld::load_checkpoint(path, str(expected_hash))};
    return HW_OK;
  });
}

void hw_checkpoint_free(hw_checkpoint* ckpt) { delete ckpt; }

hw_status hw_checkpoint_hash(const hw_checkpoint* ckpt, char* buf, size_t len) {
  if (ckpt == nullptr) return fail(HW_ERR_ARGUMENT, "null checkpoint");
  return copy_out(ckpt->ckpt.config_hash, buf, len);
}

hw_status hw_checkpoint_step(const hw_checkpoint* ckpt, size_t* out) {
  if (ckpt == nullptr || out == nullptr) return fail(HW_ERR_ARGUMENT, "null argument");
  *out = ckpt->ckpt.step;
  return HW_OK;
}

hw_status hw_cmd_pretrain(const char* config_path, const hw_run_options* opts, hw_result** out) {
  if (config_path == nullptr) return fail(HW_ERR_ARGUMENT, "null config path");
  return guarded([&] { return finish(hamworld::cmd_pretrain(config_path, options(opts)), out); });
}

hw_status hw_cmd_adapt(const char* config_path, const char* checkpoint_path, const char* mode,
                       const hw_run_options* opts, hw_result** out) {
  if (config_path == nullptr || checkpoint_path == nullptr || mode == nullptr) {
    return fail(HW_ERR_ARGUMENT, "null argument");
  }
  return guarded([&] {
    return finish(hamworld::cmd_adapt(config_path, checkpoint_path, mode, options(opts)), out);
  });
}

hw_status hw_cmd_ablate_integrator(const char* config_path, const char* checkpoint_path,
                                   const hw_run_options* opts, hw_result** out) {
  if (config_path == nullptr) return fail(HW_ERR_ARGUMENT, "null config path");
  return guarded([&] {
    return finish(
        hamworld::cmd_ablate_integrator(config_path, str(checkpoint_path), options(opts)), out);
  });
}

hw_status hw_cmd_gradcheck(const char* corrupt_family, hw_result** out) {
  return guarded([&] { return finish(hamworld::cmd_gradcheck(str(corrupt_family)), out); });
}

const char* hw_result_output(const hw_result* r) { return r == nullptr ? "" : r->output.c_str(); }
const char* hw_result_error(const hw_result* r) { return r == nullptr ? "" : r->error.c_str(); }
void hw_result_free(hw_result* r) { delete r; }

}  // extern "C"
