#include <fstream>
#include <sstream>

#include "hamworld/errors.hpp"
#include "hamworld/trainer.hpp"
#include "json.hpp"

namespace hamworld {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json spec_json(const MlpSpec& s) {
  json hidden = json::array();
  for (Activation a : s.hidden) hidden.push_back(std::string(to_string(a)));
  return {{"widths", s.widths}, {"hidden", hidden}, {"output", std::string(to_string(s.output))}};
}

MlpSpec spec_from(const json& j) {
  MlpSpec s;
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  for (const auto& a : j.at("hidden")) s.hidden.push_back(activation_from_string(a.get<std::string>()));
  s.output = activation_from_string(j.at("output").get<std::string>());
  s.validate();
  return s;
}

json net_json(const MlpSpec& s, const ParamVector& p) {
  return {{"spec", spec_json(s)}, {"params", p.raw()}};
}

ParamVector params_from(const MlpSpec& s, const json& j) {
  ParamVector p(s);
  const Vec v = j.get<Vec>();
  if (v.size() != p.size()) throw CorruptFile("checkpoint: parameter count does not match spec");
  p.raw() = v;
  return p;
}

json adam_json(const AdamState& s) {
  return {{"m", s.m},
          {"v", s.v},
          {"t", s.t},
          {"lr", s.config.lr},
          {"beta1", s.config.beta1},
          {"beta2", s.config.beta2},
          {"eps", s.config.eps},
          {"weight_decay", s.config.weight_decay}};
}

AdamState adam_from(const json& j, std::size_t n) {
  AdamState s;
  s.m = j.at("m").get<Vec>();
  s.v = j.at("v").get<Vec>();
  if (s.m.size() != n || s.v.size() != n) throw CorruptFile("checkpoint: optimizer state size");
  s.t = j.at("t").get<std::uint64_t>();
  s.config.lr = j.at("lr").get<double>();
  s.config.beta1 = j.at("beta1").get<double>();
  s.config.beta2 = j.at("beta2").get<double>();
  s.config.eps = j.at("eps").get<double>();
  s.config.weight_decay = j.at("weight_decay").get<double>();
  return s;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& c) {
  const WorldModel& m = c.model;
  json j;
  j["format"] = kFormatVersion;
  j["config_hash"] = c.config_hash;
  j["step"] = c.step;
  j["shape"] = {{"objects", m.objects},
                {"dims", m.dims},
                {"action_dim", m.action_dim},
                {"obs_dim", m.obs_dim}};
  j["encoder"] = net_json(m.encoder.spec(), m.encoder.params());
  j["decoder"] = net_json(m.decoder.spec(), m.decoder.params());
  j["h_net"] = net_json(m.h.spec(), m.h.params());
  j["g_net"] = net_json(m.g.spec(), m.g.params());
  j["prior_log_var"] = m.prior.log_var;
  j["target"] = {{"params", m.target.net.params().raw()}, {"decay", m.target.decay}};
  const WorldOptimizer& o = c.optimizer;
  j["optimizer"] = {{"encoder", adam_json(o.encoder)},
                    {"decoder", adam_json(o.decoder)},
                    {"h_net", adam_json(o.h)},
                    {"g_net", adam_json(o.g)},
                    {"prior", adam_json(o.prior)}};
  return j.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text, const std::string& expected_hash) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CorruptFile(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  Checkpoint c;
  try {
    if (j.at("format").get<int>() != kFormatVersion) throw CorruptFile("checkpoint: unsupported format");
    c.config_hash = j.at("config_hash").get<std::string>();
    if (!expected_hash.empty() && c.config_hash != expected_hash) {
      throw CheckpointMismatch(expected_hash, c.config_hash);
    }
    c.step = j.at("step").get<std::size_t>();
    WorldModel& m = c.model;
    const json& shape = j.at("shape");
    m.objects = shape.at("objects").get<std::size_t>();
    m.dims = shape.at("dims").get<std::size_t>();
    m.action_dim = shape.at("action_dim").get<std::size_t>();
    m.obs_dim = shape.at("obs_dim").get<std::size_t>();

    const MlpSpec es = spec_from(j.at("encoder").at("spec"));
    m.encoder = EncoderNet(m.latent_dim(), es, params_from(es, j.at("encoder").at("params")));
    const MlpSpec ds = spec_from(j.at("decoder").at("spec"));
    m.decoder = DecoderNet(ds, params_from(ds, j.at("decoder").at("params")));
    const MlpSpec hs = spec_from(j.at("h_net").at("spec"));
    m.h = HamiltonianNet(m.objects, m.dims, hs, params_from(hs, j.at("h_net").at("params")));
    const MlpSpec gs = spec_from(j.at("g_net").at("spec"));
    m.g = InputMatrixNet(m.objects, m.dims, m.action_dim, gs,
                         params_from(gs, j.at("g_net").at("params")));
    m.prior.log_var = j.at("prior_log_var").get<Vec>();
    if (m.prior.log_var.size() != m.latent_dim()) throw CorruptFile("checkpoint: prior size");
    m.target.net = HamiltonianNet(m.objects, m.dims, hs, params_from(hs, j.at("target").at("params")));
    m.target.decay = j.at("target").at("decay").get<double>();

    const json& o = j.at("optimizer");
    c.optimizer.encoder = adam_from(o.at("encoder"), m.encoder.params().size());
    c.optimizer.decoder = adam_from(o.at("decoder"), m.decoder.params().size());
    c.optimizer.h = adam_from(o.at("h_net"), m.h.params().size());
    c.optimizer.g = adam_from(o.at("g_net"), m.g.params().size());
    c.optimizer.prior = adam_from(o.at("prior"), m.prior.log_var.size());
  } catch (const json::exception& e) {
    throw CorruptFile(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw CorruptFile(std::string("checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const std::string text = checkpoint_to_json(c);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + tmp);
    out << text;
    if (!out) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint to " + path);
}

Checkpoint load_checkpoint(const std::string& path, const std::string& expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str(), expected_hash);
}

}  // namespace hamworld
