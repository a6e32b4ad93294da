#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "lobsim/error.hpp"
#include "lobsim/types.hpp"

namespace lobsim {

inline constexpr Qty kMaxOrderSize = 1'000'000;

// Discrete power-law size draw with x_min = 1 by rounding an inverse-CDF
// continuous Pareto variate:
//   x = max(1, floor((x_min - 1/2) * (1 - u)^(-1/lambda) + 1/2)),
// capped at `cap`. The induced law has P(X >= x) = (2x - 1)^(-lambda).
inline Qty powerlaw_sample(double u, double lambda, Qty cap = kMaxOrderSize) {
  if (!(u >= 0.0 && u < 1.0))
    throw Error(Errc::InvalidParameter, "power-law draw needs u in [0, 1), got " + std::to_string(u));
  if (!(lambda > 1.0))
    throw Error(Errc::InvalidParameter, "power-law exponent must exceed 1, got " + std::to_string(lambda));
  constexpr double x_min = 1.0;
  const double x = std::floor((x_min - 0.5) * std::pow(1.0 - u, -1.0 / lambda) + 0.5);
  if (x >= static_cast<double>(cap)) return cap;
  return std::max<Qty>(1, static_cast<Qty>(x));
}

// P(X >= x) of the uncapped sampler.
inline double powerlaw_ccdf(Qty x, double lambda) {
  if (x <= 1) return 1.0;
  return std::pow(2.0 * static_cast<double>(x) - 1.0, -lambda);
}

inline double powerlaw_pmf(Qty x, double lambda) {
  if (x < 1) return 0.0;
  return powerlaw_ccdf(x, lambda) - powerlaw_ccdf(x + 1, lambda);
}

}  // namespace lobsim
