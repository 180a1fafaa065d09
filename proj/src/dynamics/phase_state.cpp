#include <cmath>

#include "hamworld/dynamics.hpp"
#include "hamworld/errors.hpp"

namespace hamworld {

Vec PhaseState::flat() const {
  Vec z;
  z.reserve(q.size() + p.size());
  z.insert(z.end(), q.begin(), q.end());
  z.insert(z.end(), p.begin(), p.end());
  return z;
}

PhaseState PhaseState::from_flat(std::size_t objects, std::size_t dims,
                                 std::span<const double> z) {
  const std::size_t k = objects * dims;
  if (z.size() != 2 * k) {
    throw ConfigError("PhaseState::from_flat: expected length " + std::to_string(2 * k) +
                      ", got " + std::to_string(z.size()));
  }
  PhaseState s(objects, dims);
  std::copy(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(k), s.q.begin());
  std::copy(z.begin() + static_cast<std::ptrdiff_t>(k), z.end(), s.p.begin());
  return s;
}

bool PhaseState::finite() const { return all_finite(q) && all_finite(p); }

void PhaseState::validate() const {
  if (n < 1) throw ConfigError("PhaseState needs N >= 1");
  if (q.size() != n * d || p.size() != n * d) {
    throw ConfigError("PhaseState: Q and P must both be N x d");
  }
  if (!finite()) throw NumericError("PhaseState contains non-finite entries");
}

Vec Matrix::apply(std::span<const double> x) const {
  if (x.size() != cols) {
    throw ConfigError("Matrix::apply: expected vector of length " + std::to_string(cols) +
                      ", got " + std::to_string(x.size()));
  }
  Vec y(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += data[r * cols + c] * x[c];
    y[r] = s;
  }
  return y;
}

Vec PhaseTrajectory::h_series() const {
  Vec h;
  h.reserve(records.size());
  for (const auto& r : records) h.push_back(r.h);
  return h;
}

FunctionField quadratic_field(std::size_t n, std::size_t d, double stiffness, double mass) {
  const std::size_t dof = n * d;
  auto h = [stiffness, mass](const PhaseState& z) {
    double s = 0.0;
    for (double v : z.p) s += 0.5 * v * v / mass;
    for (double v : z.q) s += 0.5 * stiffness * v * v;
    return s;
  };
  auto grad = [stiffness, mass](const PhaseState& z) {
    PhaseGradients g;
    g.dq.resize(z.q.size());
    g.dp.resize(z.p.size());
    for (std::size_t i = 0; i < z.q.size(); ++i) g.dq[i] = stiffness * z.q[i];
    for (std::size_t i = 0; i < z.p.size(); ++i) g.dp[i] = z.p[i] / mass;
    return g;
  };
  auto g = [dof](const PhaseState&) {
    Matrix m(dof, dof);
    for (std::size_t i = 0; i < dof; ++i) m(i, i) = 1.0;
    return m;
  };
  return FunctionField(h, grad, g, dof);
}

}  // namespace hamworld
