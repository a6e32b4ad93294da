#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lobsim/discrete.hpp"
#include "lobsim/error.hpp"
#include "lobsim/optimize.hpp"

namespace lobsim {

struct DgxParams {
  double mu = 0.0;
  double sigma = 1.0;

  friend bool operator==(const DgxParams&, const DgxParams&) = default;
};

namespace detail {

inline double dgx_kernel(double k, const DgxParams& p) {
  const double z = (std::log(k) - p.mu) / p.sigma;
  return std::exp(-0.5 * z * z) / k;
}

// Integral of the kernel over [x, inf): sigma * sqrt(2 pi) * Q((log x - mu) / sigma).
inline double dgx_kernel_tail_integral(double x, const DgxParams& p) {
  const double z = (std::log(x) - p.mu) / p.sigma;
  return p.sigma * std::sqrt(2.0 * std::numbers::pi) * 0.5 * std::erfc(z / std::numbers::sqrt2);
}

inline void check(const DgxParams& p) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.mu) || !std::isfinite(p.sigma))
    throw Error(Errc::InvalidParameter, "DGX needs finite mu and sigma > 0, got sigma = " +
                                            std::to_string(p.sigma));
}

}  // namespace detail

// Sum of the DGX kernel over k >= 1. Terms are added until the integral bound
// on the remaining tail falls below 1e-12 of the partial sum; past two million
// terms the remainder is taken from the midpoint integral instead.
inline double dgx_series_sum(const DgxParams& p) {
  detail::check(p);
  constexpr std::int64_t kMaxTerms = 2'000'000;
  const double decreasing_from = std::exp(p.mu - p.sigma * p.sigma);
  double sum = 0.0;
  std::int64_t k = 1;
  for (; k <= kMaxTerms; ++k) {
    sum += detail::dgx_kernel(static_cast<double>(k), p);
    if (static_cast<double>(k) >= decreasing_from &&
        detail::dgx_kernel_tail_integral(static_cast<double>(k), p) < 1e-12 * sum)
      return sum;
  }
  return sum + detail::dgx_kernel_tail_integral(static_cast<double>(k) - 0.5, p);
}

// Discrete Gaussian exponential law on the integers [min_k, max_k]; max_k = 0
// leaves the support unbounded. min_k = 2 gives the variant truncated at 1.
class Dgx {
 public:
  explicit Dgx(DgxParams p, std::int64_t min_k = 1, std::int64_t max_k = 0)
      : p_(p), min_k_(min_k), max_k_(max_k) {
    detail::check(p_);
    if (min_k_ < 1 || (max_k_ != 0 && max_k_ < min_k_))
      throw Error(Errc::InvalidParameter, "DGX support must lie within the positive integers");
    double sum = 0.0;
    if (max_k_ == 0) {
      sum = dgx_series_sum(p_);
      for (std::int64_t k = 1; k < min_k_; ++k) sum -= detail::dgx_kernel(static_cast<double>(k), p_);
    } else {
      for (std::int64_t k = min_k_; k <= max_k_; ++k) sum += detail::dgx_kernel(static_cast<double>(k), p_);
    }
    if (!(sum > 0.0)) throw Error(Errc::InvalidParameter, "DGX support carries no mass");
    normalizer_ = 1.0 / sum;
  }

  const DgxParams& params() const noexcept { return p_; }
  std::int64_t min_k() const noexcept { return min_k_; }
  std::int64_t max_k() const noexcept { return max_k_; }

  // A(mu, sigma), restricted to the support.
  double normalizer() const noexcept { return normalizer_; }

  double pmf(std::int64_t k) const {
    if (k < min_k_ || (max_k_ != 0 && k > max_k_)) return 0.0;
    return normalizer_ * detail::dgx_kernel(static_cast<double>(k), p_);
  }

  double log_pmf(std::int64_t k) const {
    const double lk = std::log(static_cast<double>(k));
    const double z = (lk - p_.mu) / p_.sigma;
    return std::log(normalizer_) - lk - 0.5 * z * z;
  }

  // Inverse-CDF table. Unbounded supports stop once the mass left out is
  // below `tail_tolerance`.
  DiscreteDistribution table(double tail_tolerance = 1e-13) const {
    std::vector<std::int64_t> values;
    std::vector<double> weights;
    double cum = 0.0;
    for (std::int64_t k = min_k_;; ++k) {
      if (max_k_ != 0 && k > max_k_) break;
      const double w = pmf(k);
      values.push_back(k);
      weights.push_back(w);
      cum += w;
      if (max_k_ == 0 && 1.0 - cum < tail_tolerance) break;
      if (max_k_ == 0 && k > 50'000'000)
        throw Error(Errc::InvalidParameter, "DGX tail too heavy to tabulate; bound the support");
    }
    return {std::move(values), weights};
  }

 private:
  DgxParams p_;
  std::int64_t min_k_;
  std::int64_t max_k_;
  double normalizer_ = 0.0;
};

inline double dgx_pmf(std::int64_t k, const DgxParams& p) {
  if (k < 1) throw Error(Errc::InvalidParameter, "DGX pmf is defined for k >= 1");
  return Dgx(p).pmf(k);
}

// DGX conditioned on k >= 2.
inline double dgx_truncated_pmf(std::int64_t k, const DgxParams& p) { return Dgx(p, 2).pmf(k); }

// Spread-driven parameters; `spread` in ticks, which already carry the x100.
inline DgxParams dyn_dgx_params(double spread_ticks) {
  if (!(spread_ticks >= 1.0))
    throw Error(Errc::InvalidParameter, "spread must be at least one tick, got " + std::to_string(spread_ticks));
  const double l = std::log(spread_ticks);
  return {l + 0.5, std::sqrt(20.0 * l) + 1.2};
}

struct DgxFit {
  DgxParams params;
  double log_likelihood = 0.0;
  std::size_t n = 0;
  int iterations = 0;
  bool degenerate = false;  // sigma hit the floor; see warning
  std::string warning;
};

inline constexpr double kDgxSigmaFloor = 1e-3;

// Maximum likelihood estimate of (mu, sigma) from positive integer samples.
// The likelihood only depends on n, sum(log k) and sum(log^2 k).
inline DgxFit dgx_fit_mle(std::span<const std::int64_t> samples, std::size_t min_samples = 100) {
  if (samples.size() < min_samples)
    throw Error(Errc::InsufficientRows, "DGX fit needs at least " + std::to_string(min_samples) +
                                            " samples, got " + std::to_string(samples.size()));
  double s1 = 0.0, s2 = 0.0;
  bool all_equal = true;
  for (auto k : samples) {
    if (k < 1) throw Error(Errc::InvalidParameter, "DGX samples must be positive integers");
    const double lk = std::log(static_cast<double>(k));
    s1 += lk;
    s2 += lk * lk;
    all_equal = all_equal && k == samples.front();
  }
  const auto n = static_cast<double>(samples.size());
  const double mean = s1 / n;

  DgxFit fit;
  fit.n = samples.size();
  if (all_equal) {
    fit.params = {mean, kDgxSigmaFloor};
    fit.degenerate = true;
    fit.warning = "all samples equal " + std::to_string(samples.front()) + "; sigma floored at 1e-3";
    fit.log_likelihood = n * Dgx(fit.params).log_pmf(samples.front());
    return fit;
  }

  auto negloglik = [&](const std::array<double, 2>& x) {
    const DgxParams p{x[0], std::max(std::exp(x[1]), kDgxSigmaFloor)};
    const double sq = s2 - 2.0 * p.mu * s1 + n * p.mu * p.mu;
    return -(n * std::log(1.0 / dgx_series_sum(p)) - s1 - sq / (2.0 * p.sigma * p.sigma));
  };
  const double sd = std::sqrt(std::max(s2 / n - mean * mean, 1e-6));
  auto res = nelder_mead<2>(negloglik, {mean, std::log(sd)}, {0.25, 0.25}, 1e-14, 1e-9, 4000);
  fit.params = {res.x[0], std::max(std::exp(res.x[1]), kDgxSigmaFloor)};
  fit.log_likelihood = -res.value;
  fit.iterations = res.iterations;
  if (fit.params.sigma <= kDgxSigmaFloor * (1.0 + 1e-9)) {
    fit.degenerate = true;
    fit.warning = "sigma at the 1e-3 floor";
  }
  return fit;
}

}  // namespace lobsim
