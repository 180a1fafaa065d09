#include "hamworld/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "hamworld/envs.hpp"
#include "hamworld/errors.hpp"
#include "hamworld/explore.hpp"
#include "hamworld/hamodel.hpp"
#include "hamworld/repr.hpp"
#include "hamworld/trainer.hpp"

namespace hamworld {
namespace {

constexpr double kEps = 1e-6;
constexpr std::size_t kMaxProbes = 48;  // coordinates probed per parameter block

using Objective = std::function<double(std::span<const double>)>;

Vec random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  Vec v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Max relative error over evenly spaced coordinates (all when few).
double probe(const Objective& f, std::span<const double> x, std::span<const double> analytic) {
  Vec p(x.begin(), x.end());
  const std::size_t n = x.size();
  const std::size_t stride = std::max<std::size_t>(1, n / kMaxProbes);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; i += stride) {
    const double orig = p[i];
    p[i] = orig + kEps;
    const double fp = f(p);
    p[i] = orig - kEps;
    const double fm = f(p);
    p[i] = orig;
    const double fd = (fp - fm) / (2.0 * kEps);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, std::isfinite(err) ? err : INFINITY);
  }
  return worst;
}

struct Ctx {
  Rng rng;
  bool corrupt = false;
  // Applied to every analytic gradient of the family under test.
  void damage(Vec& g) const {
    if (corrupt && !g.empty()) g[0] = 1.5 * g[0] + 0.1;
  }
};

double check_mlp(Ctx& c, Activation act) {
  const MlpSpec spec = MlpSpec::make({5, 8, 7, 3}, act);
  ParamVector params = init_params(spec, c.rng);
  const Vec x = random_vec(5, c.rng);
  const Vec w = random_vec(3, c.rng);
  BackpropResult r = backprop(spec, params, x, w);
  Vec pg = r.param_grad.raw();
  c.damage(pg);
  const double e1 = probe(
      [&](std::span<const double> th) {
        ParamVector p = params;
        p.raw().assign(th.begin(), th.end());
        return dot(w, mlp_forward(spec, p, x));
      },
      params.raw(), pg);
  const double e2 = probe([&](std::span<const double> xi) { return dot(w, mlp_forward(spec, params, xi)); },
                          x, r.input_grad);
  return std::max(e1, e2);
}

PhaseState random_state(std::size_t n, std::size_t d, Rng& rng) {
  PhaseState z(n, d);
  z.q = random_vec(n * d, rng);
  z.p = random_vec(n * d, rng, 0.5);
  return z;
}

double check_hamiltonian_state(Ctx& c) {
  const HamiltonianNet h = HamiltonianNet::create(3, 2, NetSizes{16, 2}, c.rng);
  const PhaseState z = random_state(3, 2, c.rng);
  const PhaseGradients g = h.gradients(z);
  Vec analytic = g.dq;
  analytic.insert(analytic.end(), g.dp.begin(), g.dp.end());
  c.damage(analytic);
  return probe([&](std::span<const double> f) { return h.evaluate(PhaseState::from_flat(3, 2, f)); },
               z.flat(), analytic);
}

struct VjpSetup {
  HamiltonianNet h;
  InputMatrixNet g;
  PhaseState z;
  Vec a;
  Vec up;
  double dt = 0.1;
};

VjpSetup vjp_setup(Rng& rng) {
  VjpSetup s;
  s.h = HamiltonianNet::create(3, 2, NetSizes{16, 2}, rng);
  s.g = InputMatrixNet::create(3, 2, 2, NetSizes{16, 2}, rng);
  // Lift g off its small init so its gradient is not trivially tiny.
  for (double& v : s.g.params().raw()) v *= 1.0 + rng.uniform();
  s.g.params().raw().back() += 0.3;
  s.z = random_state(3, 2, rng);
  s.a = random_vec(2, rng);
  s.up = random_vec(12, rng);
  return s;
}

double euler_objective(const VjpSetup& s, const HamiltonianNet& h, const InputMatrixNet& g) {
  const LearnedField field(h, g);
  return dot(s.up, euler_step(field, s.z, s.a, s.dt).flat());
}

double check_hamiltonian_params(Ctx& c) {
  VjpSetup s = vjp_setup(c.rng);
  Vec hg(s.h.params().size(), 0.0), gg(s.g.params().size(), 0.0);
  euler_mean_vjp(s.h, s.g, s.z, s.a, s.dt, s.up, hg, gg);
  c.damage(hg);
  return probe(
      [&](std::span<const double> th) {
        HamiltonianNet h = s.h;
        h.params().raw().assign(th.begin(), th.end());
        return euler_objective(s, h, s.g);
      },
      s.h.params().raw(), hg);
}

double check_input_matrix(Ctx& c) {
  VjpSetup s = vjp_setup(c.rng);
  Vec hg(s.h.params().size(), 0.0), gg(s.g.params().size(), 0.0);
  euler_mean_vjp(s.h, s.g, s.z, s.a, s.dt, s.up, hg, gg);
  c.damage(gg);
  return probe(
      [&](std::span<const double> th) {
        InputMatrixNet g = s.g;
        g.params().raw().assign(th.begin(), th.end());
        return euler_objective(s, s.h, g);
      },
      s.g.params().raw(), gg);
}

// Gradient of the Euler prior mean with respect to the state it starts from.
double check_prior_state(Ctx& c) {
  VjpSetup s = vjp_setup(c.rng);
  Vec hg(s.h.params().size(), 0.0), gg(s.g.params().size(), 0.0), zg(12, 0.0);
  euler_mean_vjp(s.h, s.g, s.z, s.a, s.dt, s.up, hg, gg, zg);
  c.damage(zg);
  return probe(
      [&](std::span<const double> f) {
        VjpSetup t = s;
        t.z = PhaseState::from_flat(3, 2, f);
        return euler_objective(t, s.h, s.g);
      },
      s.z.flat(), zg);
}

double check_encoder(Ctx& c) {
  const EncoderNet enc = EncoderNet::create(12, 12, NetSizes{16, 2}, c.rng);
  const Vec obs = random_vec(12, c.rng);
  const Vec cm = random_vec(12, c.rng), cl = random_vec(12, c.rng);
  auto f = [&](const EncoderNet& e) {
    const DiagGaussian g = e.encode(obs);
    return dot(cm, g.mean) + dot(cl, g.log_var);
  };
  Vec grad(enc.params().size(), 0.0);
  enc.backward(enc.forward(obs), cm, cl, grad);
  c.damage(grad);
  return probe(
      [&](std::span<const double> th) {
        EncoderNet e = enc;
        e.params().raw().assign(th.begin(), th.end());
        return f(e);
      },
      enc.params().raw(), grad);
}

double check_decoder(Ctx& c) {
  const DecoderNet dec = DecoderNet::create(12, 12, NetSizes{16, 2}, c.rng);
  const Vec z = random_vec(12, c.rng), y = random_vec(12, c.rng);
  MlpTape tape;
  const Vec pred = dec.decode(z, tape);
  Vec up(12);
  for (std::size_t i = 0; i < 12; ++i) up[i] = pred[i] - y[i];
  Vec grad(dec.params().size(), 0.0), dz;
  backprop_accumulate(dec.spec(), dec.params(), tape, up, grad, &dz);
  c.damage(grad);
  const double e1 = probe(
      [&](std::span<const double> th) {
        DecoderNet d = dec;
        d.params().raw().assign(th.begin(), th.end());
        return reconstruction_nll(d.decode(z), y);
      },
      dec.params().raw(), grad);
  const double e2 =
      probe([&](std::span<const double> zz) { return reconstruction_nll(dec.decode(zz), y); }, z, dz);
  return std::max(e1, e2);
}

double check_info_nce(Ctx& c) {
  const std::size_t K = 4, D = 6;
  std::vector<Vec> a(K), b(K);
  for (std::size_t i = 0; i < K; ++i) {
    a[i] = random_vec(D, c.rng);
    b[i] = random_vec(D, c.rng);
  }
  const InfoNceResult r = info_nce(a, b, 0.5);
  Vec analytic, x;
  for (std::size_t i = 0; i < K; ++i) {
    analytic.insert(analytic.end(), r.grad_a[i].begin(), r.grad_a[i].end());
    x.insert(x.end(), a[i].begin(), a[i].end());
  }
  for (std::size_t i = 0; i < K; ++i) {
    analytic.insert(analytic.end(), r.grad_b[i].begin(), r.grad_b[i].end());
    x.insert(x.end(), b[i].begin(), b[i].end());
  }
  c.damage(analytic);
  return probe(
      [&](std::span<const double> v) {
        std::vector<Vec> aa(K), bb(K);
        for (std::size_t i = 0; i < K; ++i) {
          aa[i].assign(v.begin() + i * D, v.begin() + (i + 1) * D);
          bb[i].assign(v.begin() + (K + i) * D, v.begin() + (K + i + 1) * D);
        }
        return info_nce(aa, bb, 0.5, false).loss;
      },
      x, analytic);
}

double check_kl_split(Ctx& c) {
  const std::size_t D = 6;
  DiagGaussian post{random_vec(D, c.rng), random_vec(D, c.rng, 0.5)};
  DiagGaussian prior{random_vec(D, c.rng), random_vec(D, c.rng, 0.5)};
  const KlGradients g = split_kl_gradients(post, prior, 0.0);
  Vec dyn = g.dyn_prior_mean, rep = g.rep_post_mean;
  dyn.insert(dyn.end(), g.dyn_prior_log_var.begin(), g.dyn_prior_log_var.end());
  rep.insert(rep.end(), g.rep_post_log_var.begin(), g.rep_post_log_var.end());
  c.damage(dyn);
  auto split = [&](std::span<const double> v) {
    return DiagGaussian{Vec(v.begin(), v.begin() + D), Vec(v.begin() + D, v.end())};
  };
  Vec xp = prior.mean, xq = post.mean;
  xp.insert(xp.end(), prior.log_var.begin(), prior.log_var.end());
  xq.insert(xq.end(), post.log_var.begin(), post.log_var.end());
  // L_dyn moves only with the prior, L_rep only with the posterior.
  const double e1 = probe([&](std::span<const double> v) { return split_kl(post, split(v), 0.0).l_dyn; },
                          xp, dyn);
  const double e2 = probe([&](std::span<const double> v) { return split_kl(split(v), prior, 0.0).l_rep; },
                          xq, rep);
  return std::max(e1, e2);
}

double check_rnd(Ctx& c) {
  const RndPair pair = RndPair::create(12, NetSizes{16, 2}, c.rng);
  std::vector<Vec> obs;
  for (int i = 0; i < 3; ++i) obs.push_back(random_vec(12, c.rng));
  Vec grad(pair.predictor.size(), 0.0);
  pair.loss(obs, &grad);
  c.damage(grad);
  return probe(
      [&](std::span<const double> th) {
        RndPair p = pair;
        p.predictor.raw().assign(th.begin(), th.end());
        return p.loss(obs);
      },
      pair.predictor.raw(), grad);
}

SequenceBatch random_batch(std::size_t B, std::size_t T, std::size_t obs_dim, std::size_t A,
                           Rng& rng) {
  SequenceBatch batch;
  batch.obs.assign(B, {});
  batch.actions.assign(B, {});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      batch.obs[b].push_back(random_vec(obs_dim, rng, 0.7));
      batch.actions[b].push_back(random_vec(A, rng, 0.5));
    }
  }
  return batch;
}

double check_baseline(Ctx& c) {
  MlpBaseline base = MlpBaseline::create(12, 1, 400, 1e-3, c.rng);
  const SequenceBatch batch = random_batch(2, 4, 12, 1, c.rng);
  Vec grad(base.params.size(), 0.0);
  base.loss(batch, &grad);
  c.damage(grad);
  return probe(
      [&](std::span<const double> th) {
        MlpBaseline b = base;
        b.params.raw().assign(th.begin(), th.end());
        return b.loss(batch);
      },
      base.params.raw(), grad);
}

double check_world_model(Ctx& c) {
  EnvConfig env;
  const WorldModel m0 = WorldModel::create(env, NetSizes{8, 2}, 0.99, -1.0, c.rng);
  WorldModel m = m0;
  for (double& v : m.g.params().raw()) v *= 100.0;
  const WorldModel base = m;
  const SequenceBatch batch = random_batch(3, 3, env.obs_dim(), env.action_dim(), c.rng);
  const BatchNoise noise = draw_batch_noise(batch, m.objects, m.latent_dim(), AugmentConfig{}, c.rng);
  LossWeights w;
  w.free_nats = 0.0;
  const IntegratorConfig integ{Scheme::euler, 0.1};
  WorldGradients g = WorldGradients::zeros(base);
  world_loss(base, batch, noise, integ, w, &g);
  for (Vec* v : {&g.encoder, &g.decoder, &g.h, &g.g, &g.prior}) c.damage(*v);

  auto total = [&](const WorldModel& mm) {
    return world_loss(mm, batch, noise, integ, w, nullptr, {}, &base).total;
  };
  double worst = 0.0;
  auto block = [&](std::vector<double>& (*get)(WorldModel&), const Vec& analytic) {
    WorldModel probe_model = base;
    const Vec x = get(probe_model);
    worst = std::max(worst, probe(
                                [&](std::span<const double> th) {
                                  get(probe_model).assign(th.begin(), th.end());
                                  return total(probe_model);
                                },
                                x, analytic));
  };
  block([](WorldModel& q) -> std::vector<double>& { return q.encoder.params().raw(); }, g.encoder);
  block([](WorldModel& q) -> std::vector<double>& { return q.decoder.params().raw(); }, g.decoder);
  block([](WorldModel& q) -> std::vector<double>& { return q.h.params().raw(); }, g.h);
  block([](WorldModel& q) -> std::vector<double>& { return q.g.params().raw(); }, g.g);
  block([](WorldModel& q) -> std::vector<double>& { return q.prior.log_var; }, g.prior);
  return worst;
}

struct FamilyDef {
  const char* name;
  double (*run)(Ctx&);
};

const std::vector<FamilyDef>& registry() {
  static const std::vector<FamilyDef> r = {
      {"mlp_tanh", [](Ctx& c) { return check_mlp(c, Activation::tanh); }},
      {"mlp_elu", [](Ctx& c) { return check_mlp(c, Activation::elu); }},
      {"hamiltonian_state", check_hamiltonian_state},
      {"hamiltonian_params", check_hamiltonian_params},
      {"input_matrix", check_input_matrix},
      {"prior_state", check_prior_state},
      {"encoder", check_encoder},
      {"decoder", check_decoder},
      {"info_nce", check_info_nce},
      {"kl_split", check_kl_split},
      {"rnd_predictor", check_rnd},
      {"mlp_baseline", check_baseline},
      {"world_model", check_world_model},
  };
  return r;
}

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(families.begin(), families.end(), [](const auto& f) { return f.passed; });
}

std::string GradcheckReport::first_failure() const {
  for (const auto& f : families) {
    if (!f.passed) return f.name;
  }
  return "";
}

std::vector<std::string> gradcheck_families() {
  std::vector<std::string> names;
  for (const auto& f : registry()) names.emplace_back(f.name);
  return names;
}

GradcheckReport run_gradcheck(std::uint64_t seed, const std::string& corrupt_family) {
  if (!corrupt_family.empty()) {
    const auto& r = registry();
    if (std::none_of(r.begin(), r.end(), [&](const FamilyDef& f) { return corrupt_family == f.name; })) {
      throw ConfigError("gradcheck: unknown family '" + corrupt_family + "'");
    }
  }
  GradcheckReport rep;
  const Rng root(seed);
  for (const auto& f : registry()) {
    Ctx c{root.split(f.name), corrupt_family == f.name};
    GradcheckFamily out;
    out.name = f.name;
    try {
      out.max_rel_error = f.run(c);
    } catch (const std::exception&) {
      out.max_rel_error = INFINITY;
    }
    out.passed = out.max_rel_error < kGradcheckTolerance;
    rep.families.push_back(out);
  }
  return rep;
}

}  // namespace hamworld
