#pragma once

// Finite-difference audit of every hand-written gradient in the library.

#include <cstdint>
#include <string>
#include <vector>

namespace hamworld {

inline constexpr double kGradcheckTolerance = 1e-5;

struct GradcheckFamily {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckFamily> families;
  bool passed() const;
  // Name of the first failing family, empty when all pass.
  std::string first_failure() const;
};

std::vector<std::string> gradcheck_families();

// corrupt_family perturbs that family's analytic gradient before the
// comparison; it exists so tests can confirm failures are detected.
GradcheckReport run_gradcheck(std::uint64_t seed = 0, const std::string& corrupt_family = "");

}  // namespace hamworld
