#pragma once

// One-dimensional quadrature on [lo, hi]: adaptive Gauss-Legendre for callables,
// composite Simpson with a Richardson error estimate for uniform samples.

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "modalstab/error.hpp"
#include "modalstab/linalg.hpp"

namespace modalstab {

namespace detail {

template <int N>
struct GaussLegendreRule {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};

  GaussLegendreRule() {
    for (int i = 0; i < N; ++i) {
      double x = std::cos(kPi * (i + 0.75) / (N + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= N; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = N * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = x;
      weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

inline const GaussLegendreRule<20>& gl20() {
  static const GaussLegendreRule<20> rule;
  return rule;
}

inline double gl_panel(const std::function<double(double)>& f, double lo, double hi) {
  const auto& r = gl20();
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double s = 0.0;
  for (int i = 0; i < 20; ++i) s += r.weights[i] * f(mid + half * r.nodes[i]);
  return s * half;
}

inline double gl_adapt(const std::function<double(double)>& f, double lo, double hi, double whole, double tol,
                       int depth, int& evaluations) {
  const double mid = 0.5 * (lo + hi);
  const double left = gl_panel(f, lo, mid), right = gl_panel(f, mid, hi);
  evaluations += 40;
  const double refined = left + right;
  if (std::abs(refined - whole) <= tol || (hi - lo) < 1e-14) return refined;
  if (depth <= 0 || evaluations > 4'000'000)
    throw Error(ErrorCode::QuadratureNotConverged,
                "adaptive Gauss-Legendre did not converge on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return gl_adapt(f, lo, mid, left, 0.5 * tol, depth - 1, evaluations) +
         gl_adapt(f, mid, hi, right, 0.5 * tol, depth - 1, evaluations);
}

}  // namespace detail

/**
 * Integral of f over [lo, hi] with absolute error below
 * rel_tol * (integral of |f|), estimated from a uniform 64-panel pre-pass.
 */
inline double integrate(const std::function<double(double)>& f, double lo, double hi, double rel_tol = 1e-13) {
  if (!(hi > lo)) return 0.0;
  constexpr int kPanels = 64;
  const double width = (hi - lo) / kPanels;
  double l1 = 0.0;
  std::array<double, kPanels> coarse{};
  const std::function<double(double)> absf = [&](double x) { return std::abs(f(x)); };
  for (int i = 0; i < kPanels; ++i) {
    const double a = lo + i * width, b = (i + 1 == kPanels) ? hi : a + width;
    coarse[i] = detail::gl_panel(f, a, b);
    l1 += detail::gl_panel(absf, a, b);
  }
  if (!std::isfinite(l1)) throw Error(ErrorCode::QuadratureNotConverged, "integrand is not finite");
  if (l1 == 0.0) return 0.0;
  const double tol = rel_tol * l1;
  int evaluations = 0;
  double total = 0.0;
  for (int i = 0; i < kPanels; ++i) {
    const double a = lo + i * width, b = (i + 1 == kPanels) ? hi : a + width;
    total += detail::gl_adapt(f, a, b, coarse[i], tol / kPanels, 60, evaluations);
  }
  return total;
}

struct SimpsonResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

/// Composite Simpson over uniform samples on [0, 1]; error from comparison with
/// the rule on every other sample (needs (n - 1) divisible by 4 for the estimate).
inline SimpsonResult simpson_uniform(const std::vector<double>& y) {
  const std::size_t n = y.size();
  if (n < 3 || (n - 1) % 2 != 0)
    throw Error(ErrorCode::InvalidArgument, "Simpson rule needs an odd number (>= 3) of uniform samples");
  auto rule = [&](std::size_t stride) {
    const std::size_t intervals = (n - 1) / stride;
    const double h = 1.0 / static_cast<double>(intervals);
    double s = y[0] + y[n - 1];
    for (std::size_t i = 1; i < intervals; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * y[i * stride];
    return s * h / 3.0;
  };
  SimpsonResult r;
  r.value = rule(1);
  if ((n - 1) % 4 == 0) {
    r.error_estimate = std::abs(r.value - rule(2)) / 15.0;
  } else {
    r.error_estimate = std::numeric_limits<double>::infinity();
  }
  return r;
}

}  // namespace modalstab
