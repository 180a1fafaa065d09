#include "hamworld/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hamworld/errors.hpp"
#include "json.hpp"

namespace hamworld {
namespace {

using nlohmann::json;

// 1-based line of the first occurrence of "key" after the section's own key.
std::size_t line_of(const std::string& text, const std::string& section, const std::string& key) {
  std::size_t from = 0;
  if (!section.empty()) {
    const std::size_t s = text.find("\"" + section + "\"");
    if (s != std::string::npos) from = s;
  }
  std::size_t pos = key.empty() ? from : text.find("\"" + key + "\"", from);
  if (pos == std::string::npos) pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Section {
 public:
  Section(const std::string& text, const json& j, std::string name)
      : text_(text), j_(j), name_(std::move(name)) {
    if (!j_.is_object()) fail("", "must be an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const std::string path = name_.empty() ? key : (key.empty() ? name_ : name_ + "." + key);
    std::ostringstream os;
    const std::size_t line = line_of(text_, name_, key);
    os << "config";
    if (line > 0) os << " line " << line;
    os << ": '" << path << "' " << what;
    throw ConfigError(os.str());
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "must be a number");
      out = v->get<double>();
      if (!std::isfinite(out)) fail(key, "must be finite");
    }
  }

  void count(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
        fail(key, "must be a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                      v->get<std::int64_t>() < 0)) {
        fail(key, "must be a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "must be a string");
      out = v->get<std::string>();
    }
  }

  Section child(const std::string& key, const json& empty) {
    const json* v = find(key);
    return Section(text_, v ? *v : empty, key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) fail(k, "is not a recognized key");
    }
  }

  template <typename F>
  void wrap(const std::string& key, F&& f) {
    try {
      f();
    } catch (const ConfigError& e) {
      fail(key, std::string("invalid: ") + e.what());
    }
  }

 private:
  const std::string& text_;
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

// Validation errors from the sub-configs name their own keys; map them back
// to a line when the key appears in the message ("section.key ...").
[[noreturn]] void rethrow_with_line(const std::string& text, const ConfigError& e) {
  const std::string msg = e.what();
  const std::size_t dot = msg.find('.');
  const std::size_t sp = msg.find_first_of(" :", dot == std::string::npos ? 0 : dot);
  if (dot != std::string::npos && sp != std::string::npos && dot < sp) {
    const std::size_t start = msg.rfind(' ', dot) == std::string::npos ? 0 : msg.rfind(' ', dot) + 1;
    const std::string section = msg.substr(start, dot - start);
    const std::string key = msg.substr(dot + 1, sp - dot - 1);
    const std::size_t line = line_of(text, section, key);
    if (line > 0) throw ConfigError("config line " + std::to_string(line) + ": " + msg);
  }
  throw ConfigError("config: " + msg);
}

}  // namespace

void RunConfig::validate() const {
  env.validate();
  adapt_env().validate();
  train.validate();
  loss.validate();
  anneal.validate();
  augment.validate();
  planner.validate();
  if (model.hidden < 1 || model.hidden_layers < 1) {
    throw ConfigError("model.hidden and model.hidden_layers must be >= 1");
  }
  if (!(rnd_lr > 0.0)) throw ConfigError("explore.rnd_lr must be > 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (train.imagine_integrator.dt != env.dt || train.train_integrator.dt != env.dt) {
    throw ConfigError("integrator.dt must equal env.dt");
  }
}

EnvConfig RunConfig::adapt_env() const {
  EnvConfig e = env;
  e.gravity_scale = adapt.gravity_scale;
  e.mass_scale = adapt.mass_scale;
  e.damping = adapt.damping;
  return e;
}

RunConfig parse_run_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const std::size_t line =
        1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte > 0 ? byte - 1 : 0), '\n'));
    throw ConfigError("config line " + std::to_string(line) + ": JSON syntax error");
  }
  RunConfig c;
  const json empty = json::object();
  Section root(text, doc, "");
  for (const char* key : {"kind", "seed"}) {
    if (!doc.is_object() || !doc.contains(key)) {
      throw ConfigError(std::string("config: missing required key '") + key + "'");
    }
  }
  std::string kind;
  root.string("kind", kind);
  root.wrap("kind", [&] { c.env.kind = env_kind_from_string(kind); });
  root.u64("seed", c.seed);
  c.env.seed = c.seed;
  root.string("output_dir", c.output_dir);
  root.count("workers", c.workers);

  Section env = root.child("env", empty);
  env.number("gravity_scale", c.env.gravity_scale);
  env.number("mass_scale", c.env.mass_scale);
  env.number("damping", c.env.damping);
  env.number("obs_noise_std", c.env.obs_noise_std);
  env.number("dt", c.env.dt);
  env.count("substeps", c.env.substeps);
  env.number("action_bound", c.env.action_bound);
  env.number("reset_angle", c.env.reset_angle);
  env.number("reset_momentum", c.env.reset_momentum);
  env.number("view_translation", c.env.view_translation);
  env.count("episode_length", c.env.episode_length);
  env.finish();
  c.adapt.mass_scale = c.env.mass_scale;
  c.adapt.damping = c.env.damping;

  Section ad = root.child("adapt", empty);
  ad.number("gravity_scale", c.adapt.gravity_scale);
  ad.number("mass_scale", c.adapt.mass_scale);
  ad.number("damping", c.adapt.damping);
  ad.finish();

  Section tr = root.child("train", empty);
  tr.count("batch_size", c.train.batch_size);
  tr.count("seq_len", c.train.seq_len);
  tr.count("pretrain_steps", c.train.pretrain_steps);
  tr.count("adapt_steps", c.train.adapt_steps);
  tr.count("update_every", c.train.update_every);
  tr.count("replan_every", c.train.replan_every);
  tr.count("warmup_steps", c.train.warmup_steps);
  tr.count("eval_every", c.train.eval_every);
  tr.count("eval_episodes", c.train.eval_episodes);
  tr.count("eval_horizon", c.train.eval_horizon);
  tr.count("adapt_eval_every", c.train.adapt_eval_every);
  tr.count("buffer_capacity", c.train.buffer_capacity);
  tr.number("world_lr", c.train.world_lr);
  tr.number("finetune_lr", c.train.finetune_lr);
  tr.number("weight_decay", c.train.weight_decay);
  tr.number("grad_clip", c.train.grad_clip);
  tr.number("ema_decay", c.train.ema_decay);
  tr.number("prior_log_var_init", c.train.prior_log_var_init);
  tr.finish();

  Section in = root.child("integrator", empty);
  std::string train_scheme = "euler", imagine_scheme = "leapfrog";
  in.string("train", train_scheme);
  in.string("imagine", imagine_scheme);
  in.wrap("train", [&] { c.train.train_integrator.scheme = scheme_from_string(train_scheme); });
  in.wrap("imagine", [&] { c.train.imagine_integrator.scheme = scheme_from_string(imagine_scheme); });
  in.finish();
  c.train.train_integrator.dt = c.env.dt;
  c.train.imagine_integrator.dt = c.env.dt;

  Section lw = root.child("loss", empty);
  lw.number("beta_dyn", c.loss.beta_dyn);
  lw.number("beta_rep", c.loss.beta_rep);
  lw.number("gamma", c.loss.gamma);
  lw.number("tau", c.loss.tau);
  lw.number("lambda_s", c.loss.lambda_s);
  lw.number("free_nats", c.loss.free_nats);
  lw.finish();

  Section an = root.child("anneal", empty);
  an.count("t_anneal", c.anneal.t_anneal);
  an.finish();

  Section au = root.child("augment", empty);
  au.number("rotation", c.augment.rotation);
  au.number("translation", c.augment.translation);
  au.number("noise_std", c.augment.noise_std);
  au.number("mask_prob", c.augment.mask_prob);
  au.finish();

  Section pl = root.child("planner", empty);
  pl.count("population", c.planner.population);
  pl.count("elites", c.planner.elites);
  pl.count("iterations", c.planner.iterations);
  pl.count("horizon", c.planner.horizon);
  pl.number("init_std", c.planner.init_std);
  pl.number("noise_floor", c.planner.noise_floor);
  pl.finish();
  c.planner.action_bound = c.env.action_bound;

  Section mo = root.child("model", empty);
  mo.count("hidden", c.model.hidden);
  mo.count("hidden_layers", c.model.hidden_layers);
  mo.finish();

  Section ex = root.child("explore", empty);
  ex.number("rnd_lr", c.rnd_lr);
  ex.finish();

  root.finish();
  c.planner.workers = c.workers;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    rethrow_with_line(text, e);
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["kind"] = std::string(to_string(c.env.kind));
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  j["env"] = {{"gravity_scale", c.env.gravity_scale},
              {"mass_scale", c.env.mass_scale},
              {"damping", c.env.damping},
              {"obs_noise_std", c.env.obs_noise_std},
              {"dt", c.env.dt},
              {"substeps", c.env.substeps},
              {"action_bound", c.env.action_bound},
              {"reset_angle", c.env.reset_angle},
              {"reset_momentum", c.env.reset_momentum},
              {"view_translation", c.env.view_translation},
              {"episode_length", c.env.episode_length}};
  j["adapt"] = {{"gravity_scale", c.adapt.gravity_scale},
                {"mass_scale", c.adapt.mass_scale},
                {"damping", c.adapt.damping}};
  const TrainConfig& t = c.train;
  j["train"] = {{"batch_size", t.batch_size},
                {"seq_len", t.seq_len},
                {"pretrain_steps", t.pretrain_steps},
                {"adapt_steps", t.adapt_steps},
                {"update_every", t.update_every},
                {"replan_every", t.replan_every},
                {"warmup_steps", t.warmup_steps},
                {"eval_every", t.eval_every},
                {"eval_episodes", t.eval_episodes},
                {"eval_horizon", t.eval_horizon},
                {"adapt_eval_every", t.adapt_eval_every},
                {"buffer_capacity", t.buffer_capacity},
                {"world_lr", t.world_lr},
                {"finetune_lr", t.finetune_lr},
                {"weight_decay", t.weight_decay},
                {"grad_clip", t.grad_clip},
                {"ema_decay", t.ema_decay},
                {"prior_log_var_init", t.prior_log_var_init}};
  j["integrator"] = {{"train", std::string(to_string(t.train_integrator.scheme))},
                     {"imagine", std::string(to_string(t.imagine_integrator.scheme))}};
  j["loss"] = {{"beta_dyn", c.loss.beta_dyn}, {"beta_rep", c.loss.beta_rep},
               {"gamma", c.loss.gamma},       {"tau", c.loss.tau},
               {"lambda_s", c.loss.lambda_s}, {"free_nats", c.loss.free_nats}};
  j["anneal"] = {{"t_anneal", c.anneal.t_anneal}};
  j["augment"] = {{"rotation", c.augment.rotation},
                  {"translation", c.augment.translation},
                  {"noise_std", c.augment.noise_std},
                  {"mask_prob", c.augment.mask_prob}};
  j["planner"] = {{"population", c.planner.population}, {"elites", c.planner.elites},
                  {"iterations", c.planner.iterations}, {"horizon", c.planner.horizon},
                  {"init_std", c.planner.init_std},     {"noise_floor", c.planner.noise_floor}};
  j["model"] = {{"hidden", c.model.hidden}, {"hidden_layers", c.model.hidden_layers}};
  j["explore"] = {{"rnd_lr", c.rnd_lr}};
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& c) {
  std::ostringstream os;
  os << "kind=" << to_string(c.env.kind) << ";objects=" << c.env.latent_objects()
     << ";dims=" << c.env.latent_dims() << ";actions=" << c.env.action_dim()
     << ";obs=" << c.env.obs_dim() << ";hidden=" << c.model.hidden
     << ";layers=" << c.model.hidden_layers;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(os.str())));
  return buf;
}

std::string resolve_output_dir(const RunConfig& c) {
  std::filesystem::path p = c.output_dir.empty()
                                ? std::filesystem::path("runs") /
                                      (std::string(to_string(c.env.kind)) + "-" + std::to_string(c.seed))
                                : std::filesystem::path(c.output_dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') {
      p = std::filesystem::path(root) / p;
    }
  }
  return p.string();
}

}  // namespace hamworld
