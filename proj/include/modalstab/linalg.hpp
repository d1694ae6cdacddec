#pragma once

// Dense complex linear-algebra helpers shared by every module.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "modalstab/error.hpp"

namespace modalstab {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;

/// Spectral norm (largest singular value); zero for empty matrices.
inline double norm2(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

inline double cond2(const CMatrix& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

inline bool all_finite(const CMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const Complex z = m.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

inline double max_imag_abs(const CMatrix& m) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) r = std::max(r, std::abs(m.data()[i].imag()));
  return r;
}

inline CMatrix block_diag(const std::vector<CMatrix>& parts) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& p : parts) {
    rows += p.rows();
    cols += p.cols();
  }
  CMatrix out = CMatrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& p : parts) {
    out.block(r, c, p.rows(), p.cols()) = p;
    r += p.rows();
    c += p.cols();
  }
  return out;
}

/// Eigenvalues of a small or large square matrix. 1x1 and 2x2 use closed forms
/// so that real parts of conjugate pairs are reproduced exactly.
inline CVector eigenvalues(const CMatrix& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::DimensionMismatch, "eigenvalues of non-square matrix");
  const Eigen::Index n = a.rows();
  CVector ev(n);
  if (n == 0) return ev;
  if (n == 1) {
    ev(0) = a(0, 0);
    return ev;
  }
  if (n == 2) {
    if (a(0, 1) == Complex(0.0) || a(1, 0) == Complex(0.0)) {
      ev(0) = a(0, 0);
      ev(1) = a(1, 1);
      return ev;
    }
    const Complex tr = a(0, 0) + a(1, 1);
    const Complex det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const Complex disc = std::sqrt(tr * tr - 4.0 * det);
    if (tr.imag() == 0.0 && det.imag() == 0.0 && disc.real() == 0.0) {
      // real data with a conjugate pair: Re is exactly tr/2
      ev(0) = Complex(0.5 * tr.real(), std::abs(0.5 * disc.imag()));
      ev(1) = std::conj(ev(0));
      return ev;
    }
    // larger-modulus root first, the other from the product to avoid cancellation
    const Complex q = (std::real(std::conj(tr) * disc) >= 0.0) ? 0.5 * (tr + disc) : 0.5 * (tr - disc);
    if (std::abs(q) == 0.0) {
      ev(0) = ev(1) = Complex(0.0, 0.0);
    } else {
      ev(0) = q;
      ev(1) = det / q;
    }
    return ev;
  }
  Eigen::ComplexEigenSolver<CMatrix> es(a, false);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::EigensolverNoConvergence, "complex eigensolver failed");
  return es.eigenvalues();
}

struct AbscissaResult {
  double value = -std::numeric_limits<double>::infinity();
  Complex witness{};
};

/// Largest real part over the eigenvalues of `a`, with the eigenvalue attaining it.
inline AbscissaResult spectral_abscissa(const CMatrix& a) {
  AbscissaResult r;
  const CVector ev = eigenvalues(a);
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i).real() > r.value) {
      r.value = ev(i).real();
      r.witness = ev(i);
    }
  }
  return r;
}

/// Solves A^H X + X A + Q = 0 by complex Bartels-Stewart (Schur form of A).
inline CMatrix solve_lyapunov(const CMatrix& a, const CMatrix& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n)
    throw Error(ErrorCode::DimensionMismatch, "solve_lyapunov: A and Q must be square and of equal size");
  if (n == 0) return CMatrix(0, 0);
  Eigen::ComplexSchur<CMatrix> schur(a);
  if (schur.info() != Eigen::Success) throw Error(ErrorCode::LyapunovSolveFailed, "Schur factorization failed");
  const CMatrix& t = schur.matrixT();
  const CMatrix& u = schur.matrixU();
  const CMatrix qt = u.adjoint() * q * u;
  const double scale = std::max(1.0, t.cwiseAbs().maxCoeff());
  CMatrix y = CMatrix::Zero(n, n);
  // T^H Y + Y T = -Qt with T upper triangular; rows and columns in increasing order.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Complex rhs = -qt(i, j);
      for (Eigen::Index k = 0; k < i; ++k) rhs -= std::conj(t(k, i)) * y(k, j);
      for (Eigen::Index k = 0; k < j; ++k) rhs -= y(i, k) * t(k, j);
      const Complex denom = std::conj(t(i, i)) + t(j, j);
      if (std::abs(denom) < 1e-14 * scale)
        throw Error(ErrorCode::LyapunovSolveFailed, "A and -A^H share an eigenvalue; solution not unique");
      y(i, j) = rhs / denom;
    }
  }
  CMatrix x = u * y * u.adjoint();
  x = 0.5 * (x + x.adjoint()).eval();
  if (!all_finite(x)) throw Error(ErrorCode::LyapunovSolveFailed, "non-finite Lyapunov solution");
  return x;
}

struct Envelope {
  double amplitude = 1.0;
  double alpha = 0.0;
};

/// (a, alpha) with ||exp(A t)|| <= a exp(-alpha t): alpha = -abscissa * fraction,
/// a = sqrt(cond(P)) for (A + alpha I)^H P + P (A + alpha I) = -I.
inline Envelope lyapunov_envelope(const CMatrix& a, double margin_fraction) {
  if (!(margin_fraction > 0.0 && margin_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "margin_fraction must lie in (0, 1)");
  const Eigen::Index n = a.rows();
  if (n == 0) return {1.0, std::numeric_limits<double>::infinity()};
  const double sigma = spectral_abscissa(a).value;
  if (!(sigma < 0.0)) throw Error(ErrorCode::NotHurwitz, "spectral abscissa " + std::to_string(sigma) + " >= 0");
  const double alpha = -sigma * margin_fraction;
  const CMatrix shifted = a + alpha * CMatrix::Identity(n, n);
  const CMatrix p = solve_lyapunov(shifted, CMatrix::Identity(n, n));
  Eigen::SelfAdjointEigenSolver<CMatrix> es(p);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::LyapunovSolveFailed, "eigen-decomposition of P failed");
  const double lmin = es.eigenvalues()(0);
  const double lmax = es.eigenvalues()(n - 1);
  if (!(lmin > 0.0) || !std::isfinite(lmax))
    throw Error(ErrorCode::LyapunovSolveFailed, "Lyapunov certificate is not positive definite; retry with a smaller margin");
  return {std::max(1.0, std::sqrt(lmax / lmin)), alpha};
}

/// sin(pi x), exact zeros at integers and exact +-1 at half-integers.
inline double sin_pi(double x) {
  if (!std::isfinite(x)) return std::numeric_limits<double>::quiet_NaN();
  double r = std::fmod(x, 2.0);
  if (r < 0) r += 2.0;
  if (r == 0.0 || r == 1.0) return 0.0;
  if (r == 0.5) return 1.0;
  if (r == 1.5) return -1.0;
  return std::sin(kPi * r);
}

inline double cos_pi(double x) { return sin_pi(x + 0.5); }

}  // namespace modalstab
