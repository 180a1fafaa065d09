#include <cmath>

#include "hamworld/errors.hpp"
#include "hamworld/hamodel.hpp"

namespace hamworld {
namespace {

std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

struct PairGeometry {
  Vec u;           // q_i − q_j
  double dist;     // |u|
  double scale;    // sqrt(|u|² + δ²)
};

PairGeometry pair_geometry(const PhaseState& z, std::size_t i, std::size_t j) {
  PairGeometry g;
  g.u.resize(z.d);
  double s2 = 0.0;
  for (std::size_t k = 0; k < z.d; ++k) {
    g.u[k] = z.qa(i, k) - z.qa(j, k);
    s2 += g.u[k] * g.u[k];
  }
  g.dist = std::sqrt(s2);
  g.scale = std::sqrt(s2 + kRadialSoftening * kRadialSoftening);
  return g;
}

double row_dot(const Vec& a, std::size_t i, const Vec& b, std::size_t j, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += a[i * d + k] * b[j * d + k];
  return s;
}

double row_dot_u(const Vec& a, std::size_t i, const Vec& u, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += a[i * d + k] * u[k];
  return s;
}

// Value plus one directional derivative.
struct Dual {
  double v = 0.0;
  double t = 0.0;
  Dual() = default;
  Dual(double value, double tangent = 0.0) : v(value), t(tangent) {}
};
Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.t + b.t}; }
Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.t - b.t}; }
Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.t * b.v + a.v * b.t}; }
Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.t * b.v - a.v * b.t) / (b.v * b.v)}; }
Dual& operator+=(Dual& a, Dual b) { return a = a + b; }
Dual& operator-=(Dual& a, Dual b) { return a = a - b; }
Dual sqrt(Dual a) {
  const double r = std::sqrt(a.v);
  return {r, r > 0.0 ? a.t / (2.0 * r) : 0.0};
}
double value(double x) { return x; }
double value(Dual x) { return x.v; }

// Jᵀc accumulated into (dq, dp); T is double or Dual.
template <typename T, typename QV, typename CV, typename OV>
void vjp_impl(std::size_t n, std::size_t d, const QV& q, const QV& p, const CV& c, OV& dq,
              OV& dp) {
  using std::sqrt;
  const std::size_t P = pair_count(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T ci = c[P + i];
    for (std::size_t k = 0; k < d; ++k) dp[i * d + k] += T(2.0) * ci * T(p[i * d + k]);
  }
  std::vector<T> u(d), du(d);
  std::size_t pi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++pi) {
      T s2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        u[k] = T(q[i * d + k]) - T(q[j * d + k]);
        s2 += u[k] * u[k];
      }
      const T dist = sqrt(s2);
      const T scale = sqrt(s2 + T(kRadialSoftening * kRadialSoftening));
      const T c_dist = c[pi];
      const T c_inner = c[P + n + pi];
      const T c_ri = c[2 * P + n + 2 * pi];
      const T c_rj = c[2 * P + n + 2 * pi + 1];

      // ∂/∂u accumulated, then split into +q_i, −q_j.
      T pu_i = 0.0, pu_j = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        du[k] = value(dist) > 0.0 ? c_dist * u[k] / dist : T(0.0);
        pu_i += T(p[i * d + k]) * u[k];
        pu_j += T(p[j * d + k]) * u[k];
      }
      for (std::size_t k = 0; k < d; ++k) {
        du[k] += c_ri * T(p[i * d + k]) / scale + c_rj * T(p[j * d + k]) / scale;
        du[k] -= (c_ri * pu_i + c_rj * pu_j) * u[k] / (scale * scale * scale);
      }
      for (std::size_t k = 0; k < d; ++k) {
        dq[i * d + k] += du[k];
        dq[j * d + k] -= du[k];
        dp[i * d + k] += c_inner * T(p[j * d + k]) + c_ri * u[k] / scale;
        dp[j * d + k] += c_inner * T(p[i * d + k]) + c_rj * u[k] / scale;
      }
    }
  }
}

}  // namespace

std::size_t feature_count(std::size_t n) { return n + 4 * pair_count(n); }

Vec invariant_features(const PhaseState& z) {
  if (z.n < 1) throw ConfigError("invariant_features: N must be >= 1");
  const std::size_t n = z.n, d = z.d, P = pair_count(n);
  Vec f(feature_count(n), 0.0);
  std::size_t pi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++pi) {
      const PairGeometry g = pair_geometry(z, i, j);
      f[pi] = g.dist;
      f[P + n + pi] = row_dot(z.p, i, z.p, j, d);
      f[2 * P + n + 2 * pi] = row_dot_u(z.p, i, g.u, d) / g.scale;
      f[2 * P + n + 2 * pi + 1] = row_dot_u(z.p, j, g.u, d) / g.scale;
    }
  }
  for (std::size_t i = 0; i < n; ++i) f[P + i] = row_dot(z.p, i, z.p, i, d);
  return f;
}

void feature_vjp(const PhaseState& z, std::span<const double> c, Vec& dq, Vec& dp) {
  const std::size_t n = z.n, d = z.d;
  if (c.size() != feature_count(n)) throw ConfigError("feature_vjp: gradient length mismatch");
  dq.resize(n * d, 0.0);
  dp.resize(n * d, 0.0);
  vjp_impl<double>(n, d, z.q, z.p, c, dq, dp);
}

void feature_vjp_tangent(const PhaseState& z, std::span<const double> c,
                         std::span<const double> c_dot, std::span<const double> vq,
                         std::span<const double> vp, Vec& tq, Vec& tp) {
  const std::size_t n = z.n, d = z.d, k = n * d;
  if (c.size() != feature_count(n) || c_dot.size() != c.size()) {
    throw ConfigError("feature_vjp_tangent: gradient length mismatch");
  }
  if (vq.size() != k || vp.size() != k) {
    throw ConfigError("feature_vjp_tangent: direction length mismatch");
  }
  std::vector<Dual> q(k), p(k), cd(c.size()), dq(k), dp(k);
  for (std::size_t i = 0; i < k; ++i) {
    q[i] = {z.q[i], vq[i]};
    p[i] = {z.p[i], vp[i]};
  }
  for (std::size_t i = 0; i < c.size(); ++i) cd[i] = {c[i], c_dot[i]};
  vjp_impl<Dual>(n, d, q, p, cd, dq, dp);
  tq.resize(k, 0.0);
  tp.resize(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    tq[i] += dq[i].t;
    tp[i] += dp[i].t;
  }
}

Vec feature_jvp(const PhaseState& z, std::span<const double> vq, std::span<const double> vp) {
  const std::size_t n = z.n, d = z.d, P = pair_count(n);
  if (vq.size() != n * d || vp.size() != n * d) {
    throw ConfigError("feature_jvp: direction length mismatch");
  }
  Vec t(feature_count(n), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += 2.0 * z.pa(i, k) * vp[i * d + k];
    t[P + i] = s;
  }
  std::size_t pi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++pi) {
      const PairGeometry g = pair_geometry(z, i, j);
      double du_u = 0.0;  // u·du
      Vec du(d);
      for (std::size_t k = 0; k < d; ++k) {
        du[k] = vq[i * d + k] - vq[j * d + k];
        du_u += g.u[k] * du[k];
      }
      t[pi] = g.dist > 0.0 ? du_u / g.dist : 0.0;

      double inner = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        inner += vp[i * d + k] * z.pa(j, k) + z.pa(i, k) * vp[j * d + k];
      }
      t[P + n + pi] = inner;

      const double pu_i = row_dot_u(z.p, i, g.u, d);
      const double pu_j = row_dot_u(z.p, j, g.u, d);
      double ri = 0.0, rj = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        ri += (vp[i * d + k] * g.u[k] + z.pa(i, k) * du[k]) / g.scale;
        rj += (vp[j * d + k] * g.u[k] + z.pa(j, k) * du[k]) / g.scale;
      }
      const double s3 = g.scale * g.scale * g.scale;
      ri -= pu_i * du_u / s3;
      rj -= pu_j * du_u / s3;
      t[2 * P + n + 2 * pi] = ri;
      t[2 * P + n + 2 * pi + 1] = rj;
    }
  }
  return t;
}

}  // namespace hamworld
