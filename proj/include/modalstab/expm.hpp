#pragma once

#include <array>
#include <cmath>

#include "modalstab/linalg.hpp"

namespace modalstab {

namespace detail {

inline double norm1(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

// Diagonal Pade approximant r_m(A) for m in {3, 5, 7, 9}.
template <std::size_t M>
CMatrix pade_low(const CMatrix& a, const std::array<double, M + 1>& b) {
  const Eigen::Index n = a.rows();
  const CMatrix ident = CMatrix::Identity(n, n);
  const CMatrix a2 = a * a;
  CMatrix power = ident;
  CMatrix u_inner = CMatrix::Zero(n, n);
  CMatrix v = CMatrix::Zero(n, n);
  for (std::size_t j = 0; j <= M; j += 2) {
    v += b[j] * power;
    u_inner += b[j + 1] * power;
    power = power * a2;
  }
  const CMatrix u = a * u_inner;
  return (v - u).partialPivLu().solve(v + u);
}

inline CMatrix pade13(const CMatrix& a) {
  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
      129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
      1323241920.0,        40840800.0,          960960.0,           16380.0,
      182.0,               1.0};
  const Eigen::Index n = a.rows();
  const CMatrix ident = CMatrix::Identity(n, n);
  const CMatrix a2 = a * a;
  const CMatrix a4 = a2 * a2;
  const CMatrix a6 = a4 * a2;
  const CMatrix u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
  const CMatrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace detail

/**
 * exp(A t) by scaling and squaring with a diagonal Pade approximant
 * (degree 3..13 chosen from ||A t||_1, unit-roundoff backward error).
 */
inline CMatrix matrix_exponential(const CMatrix& a, double t = 1.0) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::DimensionMismatch, "matrix_exponential: non-square matrix");
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "matrix_exponential: t must be finite and >= 0");
  const Eigen::Index n = a.rows();
  if (n == 0) return CMatrix(0, 0);
  const CMatrix at = a * t;
  const double nrm = detail::norm1(at);
  if (!std::isfinite(nrm)) throw Error(ErrorCode::Overflow, "matrix_exponential: non-finite input");

  static constexpr double theta3 = 1.495585217958292e-2;
  static constexpr double theta5 = 2.539398330063230e-1;
  static constexpr double theta7 = 9.504178996162932e-1;
  static constexpr double theta9 = 2.097847961257068e0;
  static constexpr double theta13 = 5.371920351148152e0;

  if (nrm <= theta3) return detail::pade_low<3>(at, {120.0, 60.0, 12.0, 1.0});
  if (nrm <= theta5) return detail::pade_low<5>(at, {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0});
  if (nrm <= theta7)
    return detail::pade_low<7>(at, {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0});
  if (nrm <= theta9)
    return detail::pade_low<9>(at, {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0,
                                    110880.0, 3960.0, 90.0, 1.0});

  const int s = std::max(0, static_cast<int>(std::ceil(std::log2(nrm / theta13))));
  if (s > 1000) throw Error(ErrorCode::Overflow, "matrix_exponential: norm too large to scale");
  CMatrix r = detail::pade13(at / std::ldexp(1.0, s));
  for (int i = 0; i < s; ++i) r = (r * r).eval();
  if (!all_finite(r)) throw Error(ErrorCode::Overflow, "matrix_exponential: result overflowed");
  return r;
}

}  // namespace modalstab
