#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "lobsim/error.hpp"

namespace lobsim {

// Finite distribution over integer values, sampled by cumulative-sum
// inversion: for u in (0, 1] the selected index i satisfies
//   cum[i-1] < u * total <= cum[i].
class DiscreteDistribution {
 public:
  DiscreteDistribution() = default;

  DiscreteDistribution(std::vector<std::int64_t> values, std::span<const double> weights)
      : values_(std::move(values)) {
    if (values_.size() != weights.size())
      throw Error(Errc::InvalidParameter, "values and weights differ in length");
    cum_.reserve(weights.size());
    double running = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw Error(Errc::InvalidParameter, "negative or NaN weight");
      running += w;
      cum_.push_back(running);
    }
  }

  bool empty() const noexcept { return values_.empty() || total() <= 0.0; }
  std::size_t size() const noexcept { return values_.size(); }
  double total() const noexcept { return cum_.empty() ? 0.0 : cum_.back(); }
  std::int64_t value(std::size_t i) const { return values_[i]; }
  const std::vector<std::int64_t>& values() const noexcept { return values_; }
  const std::vector<double>& cumulative() const noexcept { return cum_; }

  double weight(std::size_t i) const { return i == 0 ? cum_[0] : cum_[i] - cum_[i - 1]; }
  double probability(std::size_t i) const { return weight(i) / total(); }

  std::size_t index_for(double u) const {
    if (empty()) throw Error(Errc::InvalidParameter, "sampling from an empty distribution");
    const double target = u * total();
    auto it = std::lower_bound(cum_.begin(), cum_.end(), target);
    if (it == cum_.end()) {
      // Rounding pushed the target past the last bucket: take the last
      // bucket with positive weight.
      std::size_t i = cum_.size() - 1;
      while (i > 0 && weight(i) <= 0.0) --i;
      return i;
    }
    return static_cast<std::size_t>(it - cum_.begin());
  }

  std::int64_t sample(double u) const { return values_[index_for(u)]; }

 private:
  std::vector<std::int64_t> values_;
  std::vector<double> cum_;
};

}  // namespace lobsim
