#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "mtft/autodiff.hpp"
#include "mtft/params.hpp"

namespace mtft {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};

/// Compares analytic gradients with central finite differences (step 1e-6).
/// `build` must reconstruct the scalar loss graph from the current parameter
/// values on every call. Checks every parameter element, or a seeded random
/// subsample of at least 256 when max_elements is smaller than the total.
/// Relative error uses denominator max(|analytic|, |numeric|, denom_floor);
/// the floor makes gradients below it count in absolute terms, since finite
/// differences of a loss f can only resolve slopes down to about
/// |f|*eps/step, far above 64-bit gradient precision.
/// Throws if the loss is non-finite at the sampled point.
GradCheckReport gradcheck(ParameterStore& ps,
                          const std::function<Var()>& build,
                          std::uint64_t seed, std::size_t max_elements = 0,
                          double denom_floor = 1e-4);

}  // namespace mtft
