#pragma once

// Brute-force oracles: exact LTI stepping, decay-rate fits, empirical gains.

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "modalstab/expm.hpp"
#include "modalstab/linalg.hpp"
#include "modalstab/modal_core.hpp"

namespace modalstab {

struct Trajectory {
  std::vector<double> times;
  std::vector<CVector> states;    // full state; plant part first
  std::vector<CVector> inputs;
  std::vector<CVector> outputs;
  Eigen::Index plant_dim = 0;     // leading entries of each state that belong to the plant
};

namespace detail {

/// Grid 0, dt, 2 dt, ..., ending exactly at T.
inline std::vector<double> time_grid(double horizon, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidArgument, "dt must be finite and > 0");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw Error(ErrorCode::InvalidArgument, "horizon must be finite and >= 0");
  const auto steps = static_cast<long long>(std::ceil(horizon / dt - 1e-9));
  if (steps > 10'000'000) throw Error(ErrorCode::InvalidArgument, "horizon / dt exceeds 1e7 steps");
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(steps) + 1);
  for (long long i = 0; i <= steps; ++i) t.push_back(std::min(horizon, static_cast<double>(i) * dt));
  return t;
}

/// Steps z' = M z exactly over the grid, reusing exp(M dt) for full steps.
inline std::vector<CVector> propagate(const CMatrix& m, const CVector& z0, const std::vector<double>& t) {
  std::vector<CVector> out;
  out.reserve(t.size());
  out.push_back(z0);
  if (t.size() < 2) return out;
  const double dt = t[1] - t[0];
  const CMatrix phi = matrix_exponential(m, dt);
  // every grid point is i * dt except possibly the clipped last one
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] == static_cast<double>(i) * dt) {
      out.push_back(phi * out.back());
    } else {
      out.push_back(matrix_exponential(m, t[i] - t[i - 1]) * out.back());
    }
    if (!all_finite(out.back())) throw Error(ErrorCode::Overflow, "trajectory overflowed");
  }
  return out;
}

}  // namespace detail

/// Closed loop x' = A x + B G w, w' = F C x + E w; records u = G w, y = C x.
inline Trajectory simulate_closed_loop(const StateSpaceSystem& plant, const StateSpaceSystem& controller, const CVector& x0,
                                       const CVector& w0, double horizon, double dt) {
  const auto n = plant.state_dim(), q = controller.state_dim();
  if (x0.size() != n || w0.size() != q)
    throw Error(ErrorCode::DimensionMismatch, "initial state sizes do not match plant/controller dimensions");
  const CMatrix m = closed_loop_direct(plant, controller);
  CVector z0(n + q);
  z0 << x0, w0;
  Trajectory tr;
  tr.plant_dim = n;
  tr.times = detail::time_grid(horizon, dt);
  tr.states = detail::propagate(m, z0, tr.times);
  for (const auto& z : tr.states) {
    tr.inputs.push_back(controller.C * z.tail(q));
    tr.outputs.push_back(plant.C * z.head(n));
  }
  return tr;
}

/// Open loop with a constant input, via the augmented generator [[A, B u], [0, 0]].
inline Trajectory simulate_open_loop(const StateSpaceSystem& sys, const CVector& x0, const CVector& u, double horizon,
                                     double dt) {
  const auto n = sys.state_dim();
  if (x0.size() != n || u.size() != sys.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "initial state or input size mismatch");
  CMatrix m = CMatrix::Zero(n + 1, n + 1);
  m.topLeftCorner(n, n) = sys.A;
  m.topRightCorner(n, 1) = sys.B * u;
  CVector z0(n + 1);
  z0 << x0, Complex(1.0);
  Trajectory tr;
  tr.plant_dim = n;
  tr.times = detail::time_grid(horizon, dt);
  for (const auto& z : detail::propagate(m, z0, tr.times)) {
    tr.states.push_back(z.head(n));
    tr.inputs.push_back(u);
    tr.outputs.push_back(sys.C * z.head(n) + sys.D * u);
  }
  return tr;
}

/// Same as simulate_open_loop on truncate(sys, N), but stepping each block separately.
inline Trajectory simulate_modal(const ModalSystem& sys, int N, const CVector& x0, const CVector& u, double horizon,
                                 double dt) {
  const Truncation t = truncate(sys, N);
  const auto n = t.system.state_dim();
  if (x0.size() != n || u.size() != sys.input_dim) throw Error(ErrorCode::DimensionMismatch, "initial state or input size mismatch");
  std::vector<ModalBlock> blocks = sys.blocks;
  sort_canonical(blocks);
  Trajectory tr;
  tr.plant_dim = n;
  tr.times = detail::time_grid(horizon, dt);
  std::vector<CVector> states(tr.times.size(), CVector::Zero(n));
  Eigen::Index off = 0;
  for (int i = 0; i < N; ++i) {
    const auto& b = blocks[i];
    const auto d = b.dim();
    CMatrix m = CMatrix::Zero(d + 1, d + 1);
    m.topLeftCorner(d, d) = b.block;
    m.topRightCorner(d, 1) = b.input * u;
    CVector z0(d + 1);
    z0 << x0.segment(off, d), Complex(1.0);
    const auto zs = detail::propagate(m, z0, tr.times);
    for (std::size_t j = 0; j < zs.size(); ++j) states[j].segment(off, d) = zs[j].head(d);
    off += d;
  }
  for (auto& x : states) {
    tr.outputs.push_back(t.system.C * x);
    tr.inputs.push_back(u);
    tr.states.push_back(std::move(x));
  }
  return tr;
}

/// Negated least-squares slope of log ||x(t)|| over the samples after the skipped prefix.
inline double estimate_decay_rate(const Trajectory& traj, double skip_fraction = 0.3) {
  if (!(skip_fraction >= 0.0 && skip_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "skip_fraction must lie in [0, 1)");
  const std::size_t n = traj.times.size();
  const auto first = static_cast<std::size_t>(std::floor(skip_fraction * static_cast<double>(n)));
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  std::size_t count = 0;
  for (std::size_t i = first; i < n; ++i) {
    const double nrm = traj.states[i].norm();
    if (!(nrm > 0.0)) continue;
    const double t = traj.times[i], y = std::log(nrm);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
    ++count;
  }
  if (count < 2) throw Error(ErrorCode::DegenerateTrajectory, "fewer than two nonzero states after the skipped prefix");
  const double c = static_cast<double>(count);
  const double denom = c * stt - st * st;
  if (!(denom > 0.0)) throw Error(ErrorCode::DegenerateTrajectory, "retained window has a single time point");
  return -(c * sty - st * sy) / denom;
}

/**
 * Lower bound on the beta-weighted IO gain over u = e^{-beta t} sin(w t + phi) e_i
 * and u = e^{-beta t} e_i with x(0) = 0: the larger of sampled peaks on
 * [0, horizon] and sampled steady-state peaks. The output is measured together
 * with its first derivative unless `with_derivative` is false.
 * Returns +inf when A + beta I is not Hurwitz.
 */
inline double brute_force_gain(const StateSpaceSystem& sys, double beta, double horizon, int samples = 400,
                               bool with_derivative = true) {
  sys.validate();
  const auto n = sys.state_dim(), m = sys.input_dim();
  if (n == 0 || m == 0 || sys.C.size() == 0) return 0.0;
  const CMatrix at = sys.A + beta * CMatrix::Identity(n, n);
  if (!(spectral_abscissa(at).value < 0.0)) return std::numeric_limits<double>::infinity();
  const CMatrix ca = sys.C * sys.A;
  const CMatrix cb = sys.C * sys.B;
  const double dt = horizon / samples;
  const CMatrix phi = matrix_exponential(at, dt);
  double best = 0.0;

  auto sample_peak = [&](auto forcing, const CVector& zp0, auto particular, int i) {
    // z(t) = z_p(t) - exp(At t) z_p(0)
    CVector hom = -zp0;
    for (int s = 0; s <= samples; ++s) {
      const double t = s * dt;
      const CVector z = particular(t) + hom;
      const double y = (sys.C * z).norm();
      const double yd = with_derivative ? (ca * z + cb.col(i) * forcing(t)).norm() : 0.0;
      best = std::max(best, std::max(y, yd));
      hom = phi * hom;
    }
  };

  for (Eigen::Index i = 0; i < m; ++i) {
    const CVector bi = sys.B.col(i);
    // step
    const CVector zs = -at.partialPivLu().solve(bi);
    best = std::max(best, (sys.C * zs).norm());
    if (with_derivative) best = std::max(best, (ca * zs + cb.col(i)).norm());
    if (horizon > 0.0)
      sample_peak([](double) { return 1.0; }, zs, [&](double) { return zs; }, static_cast<int>(i));
    for (int k = 0; k < 40; ++k) {
      const double w = std::pow(10.0, -2.0 + 5.0 * k / 39.0);
      const CMatrix ident = CMatrix::Identity(n, n);
      // sin(theta) = (e^{i theta} - e^{-i theta}) / 2i
      const CVector vp = (Complex(0.0, w) * ident - at).partialPivLu().solve(bi);
      const CVector vm = (Complex(0.0, -w) * ident - at).partialPivLu().solve(bi);
      auto steady = [&](double theta) -> CVector {
        return (vp * std::exp(Complex(0.0, theta)) - vm * std::exp(Complex(0.0, -theta))) / Complex(0.0, 2.0);
      };
      for (int s = 0; s < 256; ++s) {
        const double theta = 2.0 * kPi * s / 256.0;
        const CVector z = steady(theta);
        best = std::max(best, (sys.C * z).norm());
        if (with_derivative) best = std::max(best, (ca * z + cb.col(i) * std::sin(theta)).norm());
      }
      if (horizon <= 0.0) continue;
      for (double phase : {0.0, kPi / 2.0}) {
        auto particular = [&](double t) -> CVector { return steady(w * t + phase); };
        sample_peak([&](double t) { return std::sin(w * t + phase); }, particular(0.0), particular, static_cast<int>(i));
      }
    }
  }
  return best;
}

/// CSV with header t, x_1..x_n, w_1..w_q, u_1..u_m, y_1..y_p (real parts, 17 digits).
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  if (tr.times.empty()) return;
  const auto n = tr.plant_dim;
  const auto q = tr.states.front().size() - n;
  const auto m = tr.inputs.front().size();
  const auto p = tr.outputs.front().size();
  os << "t";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x_" << i;
  for (Eigen::Index i = 1; i <= q; ++i) os << ",w_" << i;
  for (Eigen::Index i = 1; i <= m; ++i) os << ",u_" << i;
  for (Eigen::Index i = 1; i <= p; ++i) os << ",y_" << i;
  os << '\n';
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    put(tr.times[k]);
    for (Eigen::Index i = 0; i < tr.states[k].size(); ++i) {
      os << ',';
      put(tr.states[k](i).real());
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      os << ',';
      put(tr.inputs[k](i).real());
    }
    for (Eigen::Index i = 0; i < p; ++i) {
      os << ',';
      put(tr.outputs[k](i).real());
    }
    os << '\n';
  }
}

}  // namespace modalstab
