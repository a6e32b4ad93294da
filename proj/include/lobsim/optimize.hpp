#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>

namespace lobsim {

template <std::size_t N>
struct MinimizeResult {
  std::array<double, N> x{};
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Nelder-Mead simplex minimisation. Stops when the spread of function values
// over the simplex drops below `ftol` and the simplex diameter below `xtol`.
template <std::size_t N, class F>
MinimizeResult<N> nelder_mead(F&& f, std::array<double, N> start, std::array<double, N> step,
                              double ftol = 1e-10, double xtol = 1e-9, int max_iter = 5000) {
  using Point = std::array<double, N>;
  std::array<Point, N + 1> pts{};
  std::array<double, N + 1> vals{};
  pts[0] = start;
  for (std::size_t i = 0; i < N; ++i) {
    pts[i + 1] = start;
    pts[i + 1][i] += step[i];
  }
  for (std::size_t i = 0; i <= N; ++i) vals[i] = f(pts[i]);

  auto combine = [](const Point& a, const Point& b, double t) {
    Point r{};
    for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + t * (b[i] - a[i]);
    return r;
  };

  MinimizeResult<N> out;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    std::array<std::size_t, N + 1> order{};
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    {
      std::array<Point, N + 1> p2{};
      std::array<double, N + 1> v2{};
      for (std::size_t i = 0; i <= N; ++i) {
        p2[i] = pts[order[i]];
        v2[i] = vals[order[i]];
      }
      pts = p2;
      vals = v2;
    }

    double diameter = 0.0;
    for (std::size_t i = 1; i <= N; ++i)
      for (std::size_t d = 0; d < N; ++d) diameter = std::max(diameter, std::abs(pts[i][d] - pts[0][d]));
    if (std::abs(vals[N] - vals[0]) <= ftol * (1.0 + std::abs(vals[0])) && diameter <= xtol) {
      out.converged = true;
      break;
    }

    Point centroid{};
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t d = 0; d < N; ++d) centroid[d] += pts[i][d] / static_cast<double>(N);

    const Point reflected = combine(centroid, pts[N], -1.0);
    const double fr = f(reflected);
    if (fr < vals[0]) {
      const Point expanded = combine(centroid, pts[N], -2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        pts[N] = expanded;
        vals[N] = fe;
      } else {
        pts[N] = reflected;
        vals[N] = fr;
      }
    } else if (fr < vals[N - 1]) {
      pts[N] = reflected;
      vals[N] = fr;
    } else {
      const bool outside = fr < vals[N];
      const Point contracted = outside ? combine(centroid, reflected, 0.5) : combine(centroid, pts[N], 0.5);
      const double fc = f(contracted);
      if (fc < std::min(fr, vals[N])) {
        pts[N] = contracted;
        vals[N] = fc;
      } else {
        for (std::size_t i = 1; i <= N; ++i) {
          pts[i] = combine(pts[0], pts[i], 0.5);
          vals[i] = f(pts[i]);
        }
      }
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  out.x = pts[best];
  out.value = vals[best];
  out.iterations = iter;
  return out;
}

}  // namespace lobsim
