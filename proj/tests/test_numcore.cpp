#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "hamworld/errors.hpp"
#include "hamworld/numcore.hpp"

using namespace hamworld;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
}

TEST(Rng, SplitIsLabelledAndStateless) {
  Rng root(7);
  const Rng a = root.split("env"), b = root.split("env"), c = root.split("model");
  EXPECT_EQ(a.key(), b.key());
  EXPECT_NE(a.key(), c.key());
  root.next_u64();
  EXPECT_EQ(root.split("env").key(), a.key());
  EXPECT_NE(root.split(std::uint64_t{0}).key(), root.split(std::uint64_t{1}).key());
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(1);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.01);
  std::set<std::size_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = rng.index(5);
    ASSERT_LT(k, 5u);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Hashing, KnownFnvValue) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(MlpSpec, ParamCountAndValidation) {
  const MlpSpec spec = MlpSpec::make({3, 5, 2}, Activation::tanh);
  EXPECT_EQ(spec.param_count(), 3u * 5 + 5 + 5 * 2 + 2);
  EXPECT_EQ(ParamVector(spec).size(), spec.param_count());
  MlpSpec bad = spec;
  bad.hidden.clear();
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_EQ(activation_from_string("elu"), Activation::elu);
  EXPECT_THROW(activation_from_string("relu6"), ConfigError);
}

TEST(Mlp, ForwardByHand) {
  const MlpSpec spec = MlpSpec::make({2, 1}, Activation::tanh);
  ParamVector p(spec);
  p.weights(0)[0] = 2.0;
  p.weights(0)[1] = -1.0;
  p.bias(0)[0] = 0.5;
  EXPECT_DOUBLE_EQ(mlp_forward(spec, p, Vec{1.0, 3.0})[0], 2.0 - 3.0 + 0.5);
  // Decay applies to weights only.
  EXPECT_EQ(p.decay_mask(), (std::vector<std::uint8_t>{1, 1, 0}));
}

TEST(Mlp, BackpropMatchesFiniteDifferences) {
  for (Activation act : {Activation::tanh, Activation::elu}) {
    Rng rng(3);
    const MlpSpec spec = MlpSpec::make({4, 6, 6, 3}, act);
    const ParamVector p = init_params(spec, rng);
    const Vec x{0.3, -0.8, 1.1, -0.2}, up{1.0, -0.5, 2.0};
    const BackpropResult br = backprop(spec, p, x, up);
    const ScalarFn by_input = [&](std::span<const double> xi) {
      return dot(mlp_forward(spec, p, xi), up);
    };
    EXPECT_LT(finite_diff_check(by_input, x, br.input_grad, 1e-6), 1e-7);
    const ScalarFn by_param = [&](std::span<const double> w) {
      ParamVector q = p;
      std::copy(w.begin(), w.end(), q.raw().begin());
      return dot(mlp_forward(spec, q, x), up);
    };
    EXPECT_LT(finite_diff_check(by_param, p.raw(), br.param_grad.raw(), 1e-6), 1e-7);
  }
}

TEST(Mlp, JvpMatchesDirectionalDifference) {
  Rng rng(4);
  const MlpSpec spec = MlpSpec::make({3, 8, 2}, Activation::tanh);
  const ParamVector p = init_params(spec, rng);
  const Vec x{0.1, 0.2, -0.4}, v{1.0, -2.0, 0.5};
  TangentTape tape;
  const Vec jv = mlp_jvp(spec, p, x, v, tape);
  const double eps = 1e-6;
  Vec xp = x, xm = x;
  for (std::size_t i = 0; i < 3; ++i) {
    xp[i] += eps * v[i];
    xm[i] -= eps * v[i];
  }
  const Vec fp = mlp_forward(spec, p, xp), fm = mlp_forward(spec, p, xm);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(jv[i], (fp[i] - fm[i]) / (2 * eps), 1e-8);
}

TEST(Mlp, TangentBackpropGradientOfDirectionalDerivative) {
  Rng rng(5);
  const MlpSpec spec = MlpSpec::make({3, 8, 1}, Activation::elu);
  const ParamVector p = init_params(spec, rng);
  const Vec x{0.4, -0.3, 0.9}, v{0.5, 1.0, -1.0};
  auto objective = [&](const ParamVector& q) {
    TangentTape t;
    return mlp_jvp(spec, q, x, v, t)[0];
  };
  TangentTape tape;
  mlp_jvp(spec, p, x, v, tape);
  Vec grad(spec.param_count(), 0.0);
  tangent_backprop_accumulate(spec, p, tape, {}, Vec{1.0}, grad);
  const ScalarFn f = [&](std::span<const double> w) {
    ParamVector q = p;
    std::copy(w.begin(), w.end(), q.raw().begin());
    return objective(q);
  };
  EXPECT_LT(finite_diff_check(f, p.raw(), grad, 1e-6), 1e-7);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamState st(3, AdamConfig{});
  Vec params{1.0, 2.0, 3.0};
  adam_update(st, params, Vec{0.5, -4.0, 0.0});
  EXPECT_NEAR(params[0], 1.0 - 1e-4, 1e-10);
  EXPECT_NEAR(params[1], 2.0 + 1e-4, 1e-10);
  EXPECT_EQ(params[2], 3.0);
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, NonFiniteGradientLeavesStateUntouched) {
  AdamState st(2, AdamConfig{});
  Vec params{1.0, 2.0};
  adam_update(st, params, Vec{0.1, 0.1});
  const AdamState saved = st;
  const Vec saved_params = params;
  EXPECT_THROW(adam_update(st, params, Vec{NAN, 0.1}), NumericError);
  EXPECT_EQ(st, saved);
  EXPECT_EQ(params, saved_params);
}

TEST(Adam, WeightDecayOnMaskedEntriesOnly) {
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  AdamState st(2, cfg);
  Vec params{1.0, 1.0};
  adam_update(st, params, Vec{0.0, 0.0}, std::vector<std::uint8_t>{1, 0});
  EXPECT_NEAR(params[0], 1.0 - 0.1 * 0.5, 1e-12);
  EXPECT_EQ(params[1], 1.0);
}

TEST(Adam, MinimizesQuadratic) {
  AdamConfig cfg;
  cfg.lr = 0.05;
  AdamState st(2, cfg);
  Vec x{3.0, -2.0};
  for (int i = 0; i < 2000; ++i) adam_update(st, x, Vec{2 * (x[0] - 1), 2 * (x[1] + 0.5)});
  EXPECT_NEAR(x[0], 1.0, 1e-3);
  EXPECT_NEAR(x[1], -0.5, 1e-3);
}

TEST(FiniteDiff, OracleFlagsWrongGradient) {
  const ScalarFn f = [](std::span<const double> x) { return x[0] * x[0] + std::sin(x[1]); };
  const Vec x{1.5, 0.3};
  const Vec good{3.0, std::cos(0.3)};
  EXPECT_LT(finite_diff_check(f, x, good, 1e-6), 1e-8);
  EXPECT_GT(finite_diff_check(f, x, Vec{3.0, 0.0}, 1e-6), 0.5);
  const Vec cd = central_difference(f, x, 1e-6);
  EXPECT_NEAR(cd[0], 3.0, 1e-8);
}
