#pragma once

#include <cmath>

namespace crowdloc::detail {

// Round half to even, independent of the floating-point environment.
inline double round_half_even(double x) noexcept {
  const double r = std::round(x);  // half away from zero
  if (std::abs(x - std::trunc(x)) == 0.5) return 2.0 * std::round(x / 2.0);
  return r;
}

}  // namespace crowdloc::detail
