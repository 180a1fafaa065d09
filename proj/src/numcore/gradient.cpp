#include <algorithm>
#include <cmath>

#include "hamworld/errors.hpp"
#include "hamworld/numcore.hpp"

namespace hamworld {

Vec central_difference(const ScalarFn& f, std::span<const double> x, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite difference eps must be > 0");
  Vec probe(x.begin(), x.end());
  Vec grad(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double fp = f(probe);
    probe[i] = orig - eps;
    const double fm = f(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite difference: non-finite evaluation at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

double finite_diff_check(const ScalarFn& f, std::span<const double> x,
                         std::span<const double> analytic, double eps) {
  if (analytic.size() != x.size()) {
    throw ConfigError("finite_diff_check: analytic gradient length mismatch");
  }
  const Vec fd = central_difference(f, x, eps);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double err = std::abs(analytic[i] - fd[i]) / std::max(1.0, std::abs(fd[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace hamworld
