#pragma once

// Modal models of the 1-D heat equation (distributed and boundary input) and the
// damped wave equation on [0, 1], observed at xi = 0.

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "modalstab/modal_core.hpp"
#include "modalstab/quadrature.hpp"

namespace modalstab {

/// Spatial input profile f in L2([0, 1]).
struct SourceProfile {
  enum class Kind { Constant, Cosine, Indicator, Coefficients, Samples, Function };

  Kind kind = Kind::Constant;
  double value = 1.0;                  // height for Constant / Cosine / Indicator
  double k0 = 0.0;                     // Cosine: value * cos(pi k0 xi)
  double lo = 0.0, hi = 1.0;           // Indicator: value on [lo, hi]
  std::vector<double> coefficients;    // normalized modal coefficients, zero beyond the list
  std::vector<double> samples;         // uniform samples on [0, 1], (n - 1) % 4 == 0
  std::function<double(double)> function;
  double sample_tolerance = 1e-6;      // accepted Simpson error relative to the integral of |f|

  static SourceProfile constant(double c) {
    SourceProfile p;
    p.kind = Kind::Constant;
    p.value = c;
    return p;
  }
  static SourceProfile cosine(double k0, double amplitude = 1.0) {
    SourceProfile p;
    p.kind = Kind::Cosine;
    p.k0 = k0;
    p.value = amplitude;
    return p;
  }
  static SourceProfile indicator(double lo, double hi, double height = 1.0) {
    SourceProfile p;
    p.kind = Kind::Indicator;
    p.lo = lo;
    p.hi = hi;
    p.value = height;
    return p;
  }
  static SourceProfile from_coefficients(std::vector<double> c) {
    SourceProfile p;
    p.kind = Kind::Coefficients;
    p.coefficients = std::move(c);
    return p;
  }
  static SourceProfile from_samples(std::vector<double> s) {
    SourceProfile p;
    p.kind = Kind::Samples;
    p.samples = std::move(s);
    return p;
  }
  static SourceProfile from_function(std::function<double(double)> f) {
    SourceProfile p;
    p.kind = Kind::Function;
    p.function = std::move(f);
    return p;
  }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "source profile: " + m); };
    if (!std::isfinite(value)) bad("value must be finite");
    switch (kind) {
      case Kind::Constant: break;
      case Kind::Cosine:
        if (!(k0 >= 0.0) || !std::isfinite(k0)) bad("cosine index must be finite and >= 0");
        break;
      case Kind::Indicator:
        if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) bad("indicator requires 0 <= lo < hi <= 1");
        break;
      case Kind::Coefficients:
        for (double c : coefficients)
          if (!std::isfinite(c)) bad("coefficient list entries must be finite");
        break;
      case Kind::Samples:
        if (samples.size() < 5 || (samples.size() - 1) % 4 != 0) bad("sample count n must satisfy n >= 5, (n - 1) % 4 == 0");
        for (double s : samples)
          if (!std::isfinite(s)) bad("samples must be finite");
        break;
      case Kind::Function:
        if (!function) bad("function profile is empty");
        break;
    }
  }
};

/// <cos(pi k xi), cos(pi k xi)> on [0, 1] for integer or half-integer k.
inline double cosine_norm_sq(double k) { return k == 0.0 ? 1.0 : 0.5; }

namespace detail {

/// Integral of cos(pi m xi) over [0, 1].
inline double cos_integral(double m) {
  if (m == 0.0) return 1.0;
  return sin_pi(m) / (kPi * m);
}

inline double sample_at(const std::vector<double>& s, std::size_t i) { return s[i]; }

inline double simpson_checked(const std::vector<double>& y, double reference, double tol) {
  const SimpsonResult r = simpson_uniform(y);
  if (r.error_estimate > tol * std::max(reference, 1e-300))
    throw Error(ErrorCode::QuadratureNotConverged,
                "Simpson error estimate " + std::to_string(r.error_estimate) +
                    " exceeds tolerance; supply more samples or a coefficient list");
  return r.value;
}

}  // namespace detail

/// <cos(pi k xi), f> on [0, 1]; not defined for coefficient-list profiles.
inline double cosine_inner_product(const SourceProfile& f, double k) {
  using K = SourceProfile::Kind;
  switch (f.kind) {
    case K::Constant: return f.value * detail::cos_integral(k);
    case K::Cosine: return f.value * 0.5 * (detail::cos_integral(k - f.k0) + detail::cos_integral(k + f.k0));
    case K::Indicator:
      if (k == 0.0) return f.value * (f.hi - f.lo);
      return f.value * (sin_pi(k * f.hi) - sin_pi(k * f.lo)) / (kPi * k);
    case K::Samples: {
      const std::size_t n = f.samples.size();
      std::vector<double> y(n), ay(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double xi = static_cast<double>(i) / static_cast<double>(n - 1);
        y[i] = f.samples[i] * cos_pi(k * xi);
        ay[i] = std::abs(f.samples[i]);
      }
      const double l1 = simpson_uniform(ay).value;
      return detail::simpson_checked(y, l1, f.sample_tolerance);
    }
    case K::Function:
      return integrate([&](double xi) { return f.function(xi) * cos_pi(k * xi); }, 0.0, 1.0);
    case K::Coefficients: break;
  }
  throw Error(ErrorCode::InvalidArgument, "inner product is not available for coefficient-list profiles");
}

/// Normalized coefficients <cos(pi k xi), f> / <cos, cos> for k = shift + j, j = 0..K.
inline std::vector<double> fourier_cos_coeffs(const SourceProfile& f, int K, double shift = 0.0) {
  if (K < 0) throw Error(ErrorCode::InvalidArgument, "fourier_cos_coeffs: K must be >= 0");
  f.validate();
  std::vector<double> out(static_cast<std::size_t>(K) + 1, 0.0);
  for (int j = 0; j <= K; ++j) {
    if (f.kind == SourceProfile::Kind::Coefficients) {
      out[j] = j < static_cast<int>(f.coefficients.size()) ? f.coefficients[j] : 0.0;
    } else {
      const double k = shift + j;
      out[j] = cosine_inner_product(f, k) / cosine_norm_sq(k);
    }
  }
  return out;
}

/// ||f||^2 in L2([0, 1]); for coefficient lists, relative to the basis cos(pi (shift + j) xi).
inline double profile_norm_sq(const SourceProfile& f, double shift = 0.0) {
  using K = SourceProfile::Kind;
  switch (f.kind) {
    case K::Constant: return f.value * f.value;
    case K::Cosine: return f.value * f.value * (f.k0 == 0.0 ? 1.0 : 0.5 * (1.0 + detail::cos_integral(2.0 * f.k0)));
    case K::Indicator: return f.value * f.value * (f.hi - f.lo);
    case K::Coefficients: {
      double s = 0.0;
      for (std::size_t j = 0; j < f.coefficients.size(); ++j)
        s += f.coefficients[j] * f.coefficients[j] * cosine_norm_sq(shift + static_cast<double>(j));
      return s;
    }
    case K::Samples: {
      std::vector<double> y(f.samples.size());
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = f.samples[i] * f.samples[i];
      return simpson_uniform(y).value;
    }
    case K::Function: return integrate([&](double xi) { return f.function(xi) * f.function(xi); }, 0.0, 1.0);
  }
  return 0.0;
}

/**
 * Sum of squared normalized coefficients for j > K, given those for j <= K.
 * Exact for coefficient lists and single-mode profiles, Parseval otherwise.
 */
inline double coefficient_tail_sq(const SourceProfile& f, const std::vector<double>& resolved, double shift) {
  using Kd = SourceProfile::Kind;
  const int K = static_cast<int>(resolved.size()) - 1;
  if (f.kind == Kd::Coefficients) {
    double s = 0.0;
    for (std::size_t j = resolved.size(); j < f.coefficients.size(); ++j) s += f.coefficients[j] * f.coefficients[j];
    return s;
  }
  const bool integer_basis = shift == 0.0;
  if (integer_basis && f.kind == Kd::Constant) return 0.0;
  if (f.kind == Kd::Cosine && std::floor(f.k0 - shift) == f.k0 - shift) {
    const double j0 = f.k0 - shift;
    if (j0 >= 0.0) return j0 > K ? f.value * f.value : 0.0;
  }
  // ||f||^2 = sum_j c_j^2 <cos, cos>_j
  double total = profile_norm_sq(f, shift);
  for (int j = 0; j <= K; ++j) total -= resolved[j] * resolved[j] * cosine_norm_sq(shift + j);
  return std::max(0.0, 2.0 * total);
}

namespace detail {

/// sqrt(sum_{k > K} 1 / (r pi^2 k^2)^2) bound via the integral comparison on [K, inf).
inline double inverse_square_tail(double K, double r) {
  return std::sqrt(1.0 / (3.0 * r * r * std::pow(kPi, 4) * K * K * K));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Heat equation, distributed input, Neumann boundary

inline ModalSystem build_heat(double b, const SourceProfile& f, int N_max) {
  if (N_max < 1) throw Error(ErrorCode::InvalidArgument, "build_heat: N_max must be >= 1");
  if (!std::isfinite(b)) throw Error(ErrorCode::InvalidArgument, "build_heat: b must be finite");
  const double K1 = N_max + 1.0;
  const double alpha = kPi * kPi * K1 * K1 - b;
  if (!(alpha > 0.0))
    throw Error(ErrorCode::TailUnstable, "b = " + std::to_string(b) + " >= pi^2 (N_max + 1)^2; increase N_max");
  const std::vector<double> fk = fourier_cos_coeffs(f, N_max);
  std::vector<ModalBlock> blocks;
  blocks.reserve(fk.size());
  for (int k = 0; k <= N_max; ++k) {
    ModalBlock blk;
    blk.block = CMatrix::Constant(1, 1, b - kPi * kPi * k * k);
    blk.input = CMatrix::Constant(1, 1, fk[k]);
    blk.output = CMatrix::Constant(1, 1, 1.0);
    blk.label = k;
    blocks.push_back(std::move(blk));
  }
  TailModel tail;
  tail.decay_alpha = alpha;
  tail.input_norm = std::sqrt(coefficient_tail_sq(f, fk, 0.0));
  // 1 + |lambda_k| >= pi^2 k^2 r for k > N_max
  const double r = 1.0 - std::max(0.0, b - 1.0) / (kPi * kPi * K1 * K1);
  tail.output_graph_norm = detail::inverse_square_tail(N_max, r);
  tail.amplitude_a = 1.0;
  return make_modal_system(std::move(blocks), tail, 1, 1);
}

// ---------------------------------------------------------------------------
// Damped wave equation, Neumann at 0, Dirichlet at 1; modes k = j + 1/2

struct WaveBlockData {
  CMatrix block, input, output;
  double scale = 1.0;  // energy scaling s; 1 when unscaled
};

/**
 * Block for mu = b - pi^2 k^2. With -mu >= 1 the state is (s x, v), s = sqrt(-mu),
 * which keeps the block eigenvector condition number bounded in k.
 */
inline WaveBlockData wave_block(double mu, double kappa, double fk) {
  WaveBlockData d;
  d.input = CMatrix::Zero(2, 1);
  d.input(1, 0) = fk;
  d.output = CMatrix::Zero(1, 2);
  d.block = CMatrix::Zero(2, 2);
  if (-mu >= 1.0) {
    d.scale = std::sqrt(-mu);
    d.block(0, 1) = d.scale;
    d.block(1, 0) = -d.scale;
    d.output(0, 0) = 1.0 / d.scale;
  } else {
    d.block(0, 1) = 1.0;
    d.block(1, 0) = mu;
    d.output(0, 0) = 1.0;
  }
  d.block(1, 1) = -kappa;
  return d;
}

/// Eigenvector condition number of [[0, s], [-s, -kappa]] for 2 s > |kappa|.
inline double wave_block_condition(double s, double kappa) {
  const double c = std::abs(kappa);
  return std::sqrt((2.0 * s + c) / (2.0 * s - c));
}

/**
 * Tail decay rate is 0.99 kappa / 2; for kappa <= 0 it is stored as is
 * and partition_spectrum reports the infinite unstable part.
 */
inline ModalSystem build_wave(double b, double kappa, const SourceProfile& f, int N_max) {
  if (N_max < 1) throw Error(ErrorCode::InvalidArgument, "build_wave: N_max must be >= 1");
  if (!std::isfinite(b) || !std::isfinite(kappa)) throw Error(ErrorCode::InvalidArgument, "build_wave: b, kappa must be finite");
  const std::vector<double> fk = fourier_cos_coeffs(f, N_max, 0.5);
  std::vector<ModalBlock> blocks;
  for (int j = 0; j <= N_max; ++j) {
    const double k = j + 0.5;
    const WaveBlockData d = wave_block(b - kPi * kPi * k * k, kappa, fk[j]);
    blocks.push_back({d.block, d.input, d.output, j});
  }

  const double k_first = N_max + 1.5;
  const double s_first_sq = kPi * kPi * k_first * k_first - b;
  const double s_first = std::sqrt(std::max(0.0, s_first_sq));
  if (!(s_first_sq >= 1.0) || !(2.0 * s_first > std::abs(kappa) * (1.0 + 1e-9)))
    throw Error(ErrorCode::TailUnstable,
                "first unresolved wave mode is not underdamped (|kappa| >= 2 sqrt(pi^2 k^2 - b)); increase N_max");

  TailModel tail;
  tail.decay_alpha = 0.99 * kappa / 2.0;
  tail.input_norm = std::sqrt(coefficient_tail_sq(f, fk, 0.5));
  const double r = 1.0 - std::max(0.0, b) / (kPi * kPi * k_first * k_first);
  tail.output_graph_norm =
      detail::inverse_square_tail(N_max + 0.5, r) * std::sqrt(1.0 + kappa * kappa / s_first_sq);
  // closed form decreases in s; cross-checked against the numeric condition numbers
  double amplitude = wave_block_condition(s_first, kappa);
  double previous = std::numeric_limits<double>::infinity();
  for (int j = 0; j < 200; ++j) {
    const double k = k_first + j;
    const WaveBlockData d = wave_block(b - kPi * kPi * k * k, kappa, 0.0);
    Eigen::ComplexEigenSolver<CMatrix> es(d.block);
    const double c = cond2(es.eigenvectors());
    if (c > previous * (1.0 + 1e-8))
      throw Error(ErrorCode::TailUnstable, "tail eigenvector condition numbers are not decreasing");
    previous = c;
    amplitude = std::max(amplitude, c);
  }
  tail.amplitude_a = std::max(1.0, amplitude);
  return make_modal_system(std::move(blocks), tail, 1, 1);
}

// ---------------------------------------------------------------------------
// Heat equation with Neumann boundary input, lifted to (u, z), input v = du/dt

struct ConstraintEntry {
  std::string kind;  // "mode", "kernel" or "output"
  int k = -1;
  double value = 0.0;
  bool passed = false;
};

struct ConstraintReport {
  std::vector<ConstraintEntry> entries;
  double scale = 0.0;
  double tolerance = 1e-8;
  bool all_passed = false;
};

struct BoundaryLiftData {
  double b = 0.0;
  double a = 0.0;
  double root = 0.0;                // sqrt(a - b)
  std::vector<double> h_coeffs;     // k = 0..N_max
  std::vector<double> g1_coeffs;    // zero on the kernel mode
  std::vector<double> g2_coeffs;    // nonzero only on the kernel mode
  std::vector<double> f_coeffs;
  double h_at_0 = 0.0;
  double c_g1 = 0.0;                // g1(0)
  int kernel_mode = -1;
  ConstraintReport constraint_report;
};

/// Normalized cosine coefficient of h = cosh(s xi) / (s sinh s), s^2 = a - b.
inline double lift_h_coeff(double s_sq, int k) {
  const double n = k == 0 ? 1.0 : 2.0;
  const double sign = (k % 2 == 0) ? 1.0 : -1.0;
  return sign * n / (s_sq + kPi * kPi * k * k);
}

inline double lift_h_at_zero(double s) { return 1.0 / (s * std::sinh(s)); }

namespace detail {

/// Index of the mode with b = pi^2 k^2, or -1; throws on near-resonance.
inline int find_kernel_mode(double b, int N_max) {
  int kernel = -1;
  for (int k = 0; k <= N_max; ++k) {
    const double rel = std::abs(b - kPi * kPi * k * k) / (1.0 + std::abs(b));
    if (rel <= 1e-9) {
      kernel = k;
    } else if (rel < 1e-6) {
      throw Error(ErrorCode::KernelResonance,
                  "b is within 1e-6 of pi^2 k^2 for k = " + std::to_string(k) + " but not on it; kernel membership is ambiguous");
    }
  }
  return kernel;
}

/// Number of series terms for g1(0); closed-form profiles are cheap to extend.
inline int lift_series_terms(const SourceProfile& f, int N_max) {
  using K = SourceProfile::Kind;
  if (f.kind == K::Samples || f.kind == K::Function) return N_max;
  return std::max(N_max, 20000);
}

inline ConstraintReport evaluate_constraints(const BoundaryLiftData& d, double rel_tol, double scale) {
  ConstraintReport rep;
  rep.tolerance = rel_tol;
  for (std::size_t k = 0; k < d.h_coeffs.size(); ++k) {
    const double lam = d.b - kPi * kPi * static_cast<double>(k * k);
    if (static_cast<int>(k) == d.kernel_mode) {
      rep.entries.push_back({"kernel", static_cast<int>(k), d.g2_coeffs[k], false});
    } else if (lam > 0.0) {
      rep.entries.push_back({"mode", static_cast<int>(k), d.h_coeffs[k] + d.g1_coeffs[k], false});
    }
  }
  rep.entries.push_back({"output", -1, d.h_at_0 + d.c_g1, false});
  double own = 0.0;
  for (const auto& e : rep.entries) own = std::max(own, std::abs(e.value));
  rep.scale = scale > 0.0 ? scale : own;
  rep.all_passed = rep.scale > 0.0;
  for (auto& e : rep.entries) {
    e.passed = std::abs(e.value) > rel_tol * rep.scale;
    rep.all_passed = rep.all_passed && e.passed;
  }
  return rep;
}

inline BoundaryLiftData lift_data(double b, double a, const std::vector<double>& f_series, int N_max, int kernel) {
  BoundaryLiftData d;
  d.b = b;
  d.a = a;
  const double s_sq = a - b;
  d.root = std::sqrt(s_sq);
  d.h_at_0 = lift_h_at_zero(d.root);
  d.kernel_mode = kernel;
  d.h_coeffs.assign(N_max + 1, 0.0);
  d.g1_coeffs.assign(N_max + 1, 0.0);
  d.g2_coeffs.assign(N_max + 1, 0.0);
  d.f_coeffs.assign(f_series.begin(), f_series.begin() + N_max + 1);
  // g1(0) summed from the smallest terms up
  const int terms = static_cast<int>(f_series.size()) - 1;
  double c_g1 = 0.0;
  for (int k = terms; k >= 0; --k) {
    const double hk = lift_h_coeff(s_sq, k);
    const double src = f_series[k] + a * hk;
    double g1 = 0.0;
    if (k == kernel) {
      d.g2_coeffs[k] = src;
    } else {
      g1 = -src / (b - kPi * kPi * static_cast<double>(k) * k);
    }
    if (k <= N_max) {
      d.h_coeffs[k] = hk;
      d.g1_coeffs[k] = g1;
    }
    c_g1 += g1;
  }
  d.c_g1 = c_g1;
  return d;
}

}  // namespace detail

/// Inequalities of the lifted stabilizability system, checked relative to `scale`
/// (defaults to the largest magnitude in this report).
inline ConstraintReport check_boundary_constraints(const BoundaryLiftData& data, double b, double rel_tol = 1e-8,
                                                   double scale = 0.0) {
  if (b != data.b) throw Error(ErrorCode::InvalidArgument, "check_boundary_constraints: b differs from lift data");
  return detail::evaluate_constraints(data, rel_tol, scale);
}

struct BoundaryPlant {
  ModalSystem system;
  BoundaryLiftData lift;
};

/**
 * Lifted plant: label -1 is the integrator u (merged with the kernel mode when
 * b = pi^2 k^2), label k >= 0 is the mode cos(pi k xi) in coordinates z_k - g1_k u.
 */
inline BoundaryPlant build_heat_boundary(double b, const SourceProfile& f, double a, int N_max) {
  if (N_max < 1) throw Error(ErrorCode::InvalidArgument, "build_heat_boundary: N_max must be >= 1");
  if (!std::isfinite(b) || !std::isfinite(a)) throw Error(ErrorCode::InvalidArgument, "build_heat_boundary: a, b must be finite");
  if (!(a > b)) throw Error(ErrorCode::InvalidArgument, "build_heat_boundary: lift parameter a must exceed b");
  const double K1 = N_max + 1.0;
  const double alpha = kPi * kPi * K1 * K1 - b;
  if (!(alpha > 0.0))
    throw Error(ErrorCode::TailUnstable, "b = " + std::to_string(b) + " >= pi^2 (N_max + 1)^2; increase N_max");
  const int kernel = detail::find_kernel_mode(b, N_max);
  const std::vector<double> f_series = fourier_cos_coeffs(f, detail::lift_series_terms(f, N_max));
  BoundaryPlant out;
  out.lift = detail::lift_data(b, a, f_series, N_max, kernel);
  out.lift.constraint_report = detail::evaluate_constraints(out.lift, 1e-8, 0.0);
  const BoundaryLiftData& d = out.lift;

  std::vector<ModalBlock> blocks;
  ModalBlock ub;
  ub.label = -1;
  if (kernel >= 0) {
    ub.block = CMatrix::Zero(2, 2);
    ub.block(1, 0) = d.g2_coeffs[kernel];
    ub.input = CMatrix::Zero(2, 1);
    ub.input(0, 0) = 1.0;
    ub.input(1, 0) = -d.h_coeffs[kernel];
    ub.output = CMatrix::Zero(1, 2);
    ub.output(0, 0) = d.h_at_0 + d.c_g1;
    ub.output(0, 1) = 1.0;
  } else {
    ub.block = CMatrix::Zero(1, 1);
    ub.input = CMatrix::Constant(1, 1, 1.0);
    ub.output = CMatrix::Constant(1, 1, d.h_at_0 + d.c_g1);
  }
  blocks.push_back(std::move(ub));
  for (int k = 0; k <= N_max; ++k) {
    if (k == kernel) continue;
    ModalBlock blk;
    blk.block = CMatrix::Constant(1, 1, b - kPi * kPi * k * k);
    blk.input = CMatrix::Constant(1, 1, -(d.h_coeffs[k] + d.g1_coeffs[k]));
    blk.output = CMatrix::Constant(1, 1, 1.0);
    blk.label = k;
    blocks.push_back(std::move(blk));
  }

  TailModel tail;
  tail.decay_alpha = alpha;
  // |h_k + g1_k| = |(-1)^k 2 + f_k| / |lambda_k| with |f_k| <= sqrt(2) ||f||
  const double r = 1.0 - std::max(0.0, b) / (kPi * kPi * K1 * K1);
  const double f_norm = std::sqrt(profile_norm_sq(f));
  tail.input_norm = (2.0 + std::sqrt(2.0) * f_norm) * detail::inverse_square_tail(N_max, r);
  const double r_out = 1.0 - std::max(0.0, b - 1.0) / (kPi * kPi * K1 * K1);
  tail.output_graph_norm = detail::inverse_square_tail(N_max, r_out);
  tail.amplitude_a = 1.0;
  out.system = make_modal_system(std::move(blocks), tail, 1, 1);
  return out;
}

inline std::vector<double> default_lift_grid(double b) {
  std::vector<double> g;
  for (int j = 1; j <= 32; ++j) g.push_back(b + j);
  return g;
}

struct LiftSearchResult {
  double a = 0.0;
  int grid_index = -1;
  ConstraintReport report;
};

/// First grid value whose constraints all pass at 1e-8 relative to the largest
/// constraint magnitude over the whole grid.
inline LiftSearchResult search_lift_parameter(double b, const SourceProfile& f, const std::vector<double>& grid,
                                              int N_max = 64) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "search_lift_parameter: empty grid");
  for (double a : grid)
    if (!(a > b) || !std::isfinite(a)) throw Error(ErrorCode::InvalidArgument, "search_lift_parameter: grid entries must exceed b");
  const int kernel = detail::find_kernel_mode(b, N_max);
  const std::vector<double> f_series = fourier_cos_coeffs(f, detail::lift_series_terms(f, N_max));
  std::vector<BoundaryLiftData> data;
  double scale = 0.0;
  for (double a : grid) {
    data.push_back(detail::lift_data(b, a, f_series, N_max, kernel));
    const ConstraintReport own = detail::evaluate_constraints(data.back(), 1e-8, 0.0);
    scale = std::max(scale, own.scale);
  }
  std::ostringstream near;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ConstraintReport rep = detail::evaluate_constraints(data[i], 1e-8, scale);
    if (rep.all_passed) return {grid[i], static_cast<int>(i), rep};
    for (const auto& e : rep.entries)
      if (!e.passed) near << " a=" << grid[i] << ":" << e.kind << "(k=" << e.k << ")=" << e.value;
  }
  throw Error(ErrorCode::NoAdmissibleParameter, "no grid value satisfies every constraint;" + near.str());
}

// ---------------------------------------------------------------------------
// Plant specification

struct PlantSpec {
  std::string type = "heat";  // "heat", "heat_boundary" or "wave"
  double b = 0.0;
  double kappa = 0.0;
  SourceProfile f;
  int N_max = 64;
  std::vector<double> a_grid;   // heat_boundary; default b + 1 .. b + 32
  std::optional<double> a;      // heat_boundary; skips the search when set
};

struct BuiltPlant {
  ModalSystem system;
  std::optional<BoundaryLiftData> lift;
  double basis_shift = 0.0;  // 0.5 for the wave basis
};

inline BuiltPlant build_plant(const PlantSpec& spec) {
  BuiltPlant out;
  if (spec.type == "heat") {
    out.system = build_heat(spec.b, spec.f, spec.N_max);
  } else if (spec.type == "wave") {
    out.system = build_wave(spec.b, spec.kappa, spec.f, spec.N_max);
    out.basis_shift = 0.5;
  } else if (spec.type == "heat_boundary") {
    double a = 0.0;
    if (spec.a) {
      a = *spec.a;
    } else {
      const auto grid = spec.a_grid.empty() ? default_lift_grid(spec.b) : spec.a_grid;
      a = search_lift_parameter(spec.b, spec.f, grid, spec.N_max).a;
    }
    BoundaryPlant bp = build_heat_boundary(spec.b, spec.f, a, spec.N_max);
    out.system = std::move(bp.system);
    out.lift = std::move(bp.lift);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown plant type '" + spec.type + "'");
  }
  return out;
}

}  // namespace modalstab
