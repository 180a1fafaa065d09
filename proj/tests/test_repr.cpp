#include <gtest/gtest.h>

#include <cmath>

#include "hamworld/errors.hpp"
#include "hamworld/repr.hpp"

using namespace hamworld;

namespace {

double pair_distance(const Vec& obs, std::size_t i, std::size_t j) {
  return std::hypot(obs[2 * i] - obs[2 * j], obs[2 * i + 1] - obs[2 * j + 1]);
}

}  // namespace

TEST(InfoNce, UniformEmbeddingsGiveLogTwoKMinusOne) {
  for (std::size_t k : {2u, 8u, 50u}) {
    const std::vector<Vec> same(k, Vec{0.3, -0.4, 1.2});
    const InfoNceResult r = info_nce(same, same, 0.07);
    EXPECT_NEAR(r.loss, std::log(2.0 * k - 1.0), 1e-12) << "K=" << k;
  }
}

TEST(InfoNce, OrthogonalPositivesByHand) {
  // a0 = b0 = e0, a1 = b1 = e1: sim(pos) = 1, others 0, τ = 1.
  const std::vector<Vec> a{{1, 0}, {0, 1}};
  const InfoNceResult r = info_nce(a, a, 1.0);
  EXPECT_NEAR(r.loss, -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0)), 1e-12);
  EXPECT_NEAR(r.loss, 0.5514, 1e-4);
}

TEST(InfoNce, DecreasesAsPositivesAlign) {
  // Negatives fixed along e2/e3; the positive partner rotates toward its anchor.
  double prev = INFINITY;
  for (int s = 0; s <= 10; ++s) {
    const double th = (1.0 - s / 10.0) * M_PI / 2;
    const std::vector<Vec> a{{1, 0, 0, 0}, {0, 0, 1, 0}};
    const std::vector<Vec> b{{std::cos(th), std::sin(th), 0, 0}, {0, 0, 0, 1}};
    const double l = info_nce(a, b, 0.5).loss;
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(InfoNce, ZeroVectorNamesIndex) {
  const std::vector<Vec> a{{1, 0}, {0, 0}};
  const std::vector<Vec> b{{1, 0}, {0, 1}};
  try {
    info_nce(a, b, 0.1);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
  EXPECT_THROW(info_nce({{1, 0}}, {{1, 0}}, 0.1), ConfigError);
}

TEST(Kl, UnitVarianceOffset) {
  const DiagGaussian q{{1.0, -2.0, 0.5}, Vec(3, 0.0)};
  const DiagGaussian p{{0.0, 0.0, 0.0}, Vec(3, 0.0)};
  EXPECT_NEAR(gaussian_kl(q, p), (1.0 + 4.0 + 0.25) / 2, 1e-14);
  EXPECT_EQ(gaussian_kl(q, q), 0.0);
}

TEST(KlSplit, EqualValuesWithFreeNatsFloor) {
  const DiagGaussian q{{0.2, 0.1}, {-1.0, 0.3}};
  const DiagGaussian p{{-0.4, 0.5}, {0.2, -0.5}};
  const KlSplit s = split_kl(q, p, 0.0);
  EXPECT_EQ(s.l_dyn, s.l_rep);
  EXPECT_EQ(s.l_dyn, gaussian_kl(q, p));
  EXPECT_TRUE(s.active);

  const KlSplit floored = split_kl(q, q, 1.0);
  EXPECT_EQ(floored.l_dyn, 1.0);
  EXPECT_EQ(floored.l_rep, 1.0);
  EXPECT_FALSE(floored.active);
  const KlGradients g = split_kl_gradients(q, q, 1.0);
  for (double v : g.dyn_prior_mean) EXPECT_EQ(v, 0.0);
  for (double v : g.rep_post_mean) EXPECT_EQ(v, 0.0);

  const KlSplit zero = split_kl(q, q, 0.0);
  EXPECT_EQ(zero.l_dyn, 0.0);
  EXPECT_EQ(zero.l_rep, 0.0);
}

TEST(KlSplit, GradientRoutingByFiniteDifferences) {
  const DiagGaussian q{{0.2, 0.1, -0.3}, {-1.0, 0.3, 0.0}};
  const DiagGaussian p{{-0.4, 0.5, 0.2}, {0.2, -0.5, 0.1}};
  const KlGradients g = split_kl_gradients(q, p, 0.0);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    DiagGaussian pp = p, pm = p, qp = q, qm = q;
    pp.mean[i] += eps;
    pm.mean[i] -= eps;
    qp.mean[i] += eps;
    qm.mean[i] -= eps;
    EXPECT_NEAR(g.dyn_prior_mean[i], (gaussian_kl(q, pp) - gaussian_kl(q, pm)) / (2 * eps), 1e-7);
    EXPECT_NEAR(g.rep_post_mean[i], (gaussian_kl(qp, p) - gaussian_kl(qm, p)) / (2 * eps), 1e-7);
    pp = p, pm = p, qp = q, qm = q;
    pp.log_var[i] += eps;
    pm.log_var[i] -= eps;
    qp.log_var[i] += eps;
    qm.log_var[i] -= eps;
    EXPECT_NEAR(g.dyn_prior_log_var[i], (gaussian_kl(q, pp) - gaussian_kl(q, pm)) / (2 * eps), 1e-7);
    EXPECT_NEAR(g.rep_post_log_var[i], (gaussian_kl(qp, p) - gaussian_kl(qm, p)) / (2 * eps), 1e-7);
  }
}

TEST(Reconstruction, ConstantAndHalfSquaredError) {
  const Vec obs{1, 2, 3, 4};
  const double c = 2.0 * std::log(2 * M_PI);
  EXPECT_NEAR(reconstruction_nll(obs, obs), c, 1e-14);
  EXPECT_NEAR(reconstruction_nll(Vec{1, 2, 4, 4}, obs), c + 0.5, 1e-14);
}

TEST(Elbo, WeightedSum) {
  const LossWeights w;
  EXPECT_EQ(elbo_total(0, 0, 0, 0, w), 0.0);
  EXPECT_NEAR(elbo_total(1, 1, 1, 1, w), 2.6, 1e-15);
  LossWeights no_vr = w;
  no_vr.gamma = 0.0;
  EXPECT_NEAR(elbo_total(1, 1, 1, 5, no_vr), 1.6, 1e-15);
}

TEST(LossWeights, Validation) {
  LossWeights w;
  w.tau = 0.0;
  EXPECT_THROW(w.validate(), ConfigError);
  w = LossWeights{};
  w.tau = 1.5;
  EXPECT_THROW(w.validate(), ConfigError);
  w = LossWeights{};
  w.beta_dyn = -1.0;
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(Augment, ZeroRangeIsIdentity) {
  AugmentConfig cfg{0.0, 0.0, 0.0, 0.0};
  Rng rng(1);
  const Vec obs{0.5, -1, 2, 3, 0.1, 0.2, -0.3, 0.4};
  EXPECT_EQ(augment(obs, 2, cfg, rng), obs);
}

TEST(Augment, RigidUpToNoiseAndDeterministic) {
  AugmentConfig cfg;
  cfg.noise_std = 0.0;
  Rng rng(2);
  const Vec obs{0, 0, 1, 0, 0.5, 2, 1, 1, 0, 0, 0, 0};
  const Vec a = augment(obs, 3, cfg, rng), b = augment(obs, 3, cfg, rng);
  EXPECT_NE(a, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      EXPECT_NEAR(pair_distance(a, i, j), pair_distance(obs, i, j), 1e-12);
      EXPECT_NEAR(pair_distance(b, i, j), pair_distance(obs, i, j), 1e-12);
    }
  }
  Rng r1(5), r2(5);
  EXPECT_EQ(augment(obs, 3, AugmentConfig{}, r1), augment(obs, 3, AugmentConfig{}, r2));
}

TEST(Augment, MaskingZeroesCoordinates) {
  AugmentConfig cfg{0.0, 0.0, 0.0, 1.0};
  Rng rng(3);
  for (double v : augment(Vec(8, 1.0), 2, cfg, rng)) EXPECT_EQ(v, 0.0);
  cfg.mask_prob = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Encoder, ZeroWeightsGiveZeroMeanAndBiasLogVar) {
  Rng rng(4);
  EncoderNet enc = EncoderNet::create(6, 4, NetSizes{8, 1}, rng);
  enc.params().fill(0.0);
  auto b = enc.params().bias(enc.spec().layer_count() - 1);
  for (std::size_t i = 0; i < 4; ++i) b[4 + i] = -0.5 - 0.25 * i;
  const DiagGaussian g = enc.encode(Vec{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(g.mean, Vec(4, 0.0));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(g.log_var[i], -0.5 - 0.25 * i);
  EXPECT_THROW(enc.encode(Vec(5, 0.0)), ConfigError);
}

TEST(Encoder, LogVarClamped) {
  Rng rng(5);
  EncoderNet enc = EncoderNet::create(2, 2, NetSizes{4, 1}, rng);
  enc.params().fill(0.0);
  auto b = enc.params().bias(enc.spec().layer_count() - 1);
  b[2] = 50.0;
  b[3] = -50.0;
  const DiagGaussian g = enc.encode(Vec{0, 0});
  EXPECT_EQ(g.log_var[0], kLogVarMax);
  EXPECT_EQ(g.log_var[1], kLogVarMin);
}

TEST(Reparameterize, ZeroNoiseIsMeanAndSpreadMatches) {
  const DiagGaussian g{{0.5, -1.0}, {std::log(0.25), std::log(4.0)}};
  EXPECT_EQ(reparameterize(g, Vec{0.0, 0.0}), g.mean);
  Rng rng(6);
  const int n = 100000;
  double s0 = 0, s1 = 0, m0 = 0, m1 = 0;
  for (int i = 0; i < n; ++i) {
    const Vec z = reparameterize(g, Vec{rng.normal(), rng.normal()});
    m0 += z[0];
    m1 += z[1];
    s0 += z[0] * z[0];
    s1 += z[1] * z[1];
  }
  m0 /= n;
  m1 /= n;
  EXPECT_NEAR(std::sqrt(s0 / n - m0 * m0), 0.5, 0.005);
  EXPECT_NEAR(std::sqrt(s1 / n - m1 * m1), 2.0, 0.02);
}

TEST(Decoder, ShapesAndFinite) {
  Rng rng(7);
  const DecoderNet dec = DecoderNet::create(12, 12, NetSizes{16, 2}, rng);
  const Vec out = dec.decode(Vec(12, 0.3));
  ASSERT_EQ(out.size(), 12u);
  for (double v : out) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(reconstruction_loss(dec, Vec(12, 0.3), out), 6.0 * std::log(2 * M_PI), 1e-12);
}
