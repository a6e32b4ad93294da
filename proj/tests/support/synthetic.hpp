#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "lobsim/features.hpp"

namespace lobsim::testing {

// Interval records with random, fully populated features. The target of
// interval t+1 is `signal_weight` * (standardised spread mean of interval t)
// plus unit Gaussian noise, so weight 1 gives a 1:1 signal-to-noise ratio.
inline std::vector<IntervalRecord> synthetic_intervals(std::size_t n, double signal_weight, std::uint64_t seed,
                                                       double noise_sd = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.5, 1.5);
  auto random_moments = [&] { return Moments{u(gen), u(gen), z(gen), u(gen)}; };
  std::vector<IntervalRecord> out(n);
  double prev_signal = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    IntervalRecord& r = out[t];
    r.t = t;
    r.start = 60.0 * static_cast<double>(t);
    r.end = r.start + 60.0;
    r.spread = random_moments();
    for (const Cell& c : default_cells()) {
      CellFeatures f;
      f.count = 10;
      f.rate = u(gen);
      if (c.type == OrderType::Limit) {
        f.dl = random_moments();
        f.q = random_moments();
      }
      r.cells[c] = f;
    }
    const double y = signal_weight * prev_signal + noise_sd * z(gen);
    r.dpb = y;
    r.dps = -y;
    r.xlm = y;
    // u(gen) on [0.5, 1.5] has variance 1/12.
    prev_signal = (r.spread->mean - 1.0) * std::sqrt(12.0);
  }
  return out;
}

}  // namespace lobsim::testing
