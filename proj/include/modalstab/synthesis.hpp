#pragma once

// Stabilizability/detectability checks, Riccati-based gain design, the
// observer-based controller and its small-gain certification.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "modalstab/gains.hpp"
#include "modalstab/linalg.hpp"
#include "modalstab/modal_core.hpp"

namespace modalstab {

// ---------------------------------------------------------------------------
// Hautus (PBH) rank tests

struct RankTest {
  Complex eigenvalue{};
  int rank = 0;
  int required = 0;
  double smallest_singular_value = 0.0;
  bool full = false;
};

/// rank [lambda I - A, B] at every eigenvalue of A with Re >= 0; singular values
/// below rank_tol * max(sigma_max, ||A||) count as zero.
inline std::vector<RankTest> pbh_controllability(const CMatrix& a, const CMatrix& b, double rank_tol) {
  const Eigen::Index n = a.rows();
  std::vector<RankTest> out;
  if (n == 0) return out;
  const CVector ev = eigenvalues(a);
  const double norm_a = norm2(a);
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i).real() < 0.0) continue;
    CMatrix m(n, n + b.cols());
    m.leftCols(n) = ev(i) * CMatrix::Identity(n, n) - a;
    m.rightCols(b.cols()) = b;
    Eigen::JacobiSVD<CMatrix> svd(m);
    const auto& s = svd.singularValues();
    const double thresh = rank_tol * std::max(s(0), norm_a);
    RankTest t;
    t.eigenvalue = ev(i);
    t.required = static_cast<int>(n);
    for (Eigen::Index j = 0; j < s.size(); ++j)
      if (s(j) > thresh) ++t.rank;
    t.smallest_singular_value = s(s.size() - 1);
    t.full = t.rank == t.required;
    out.push_back(t);
  }
  return out;
}

inline bool pbh_stabilizable(const CMatrix& a, const CMatrix& b, double rank_tol = 1e-10) {
  for (const auto& t : pbh_controllability(a, b, rank_tol))
    if (!t.full) return false;
  return true;
}

inline bool pbh_detectable(const CMatrix& a, const CMatrix& c, double rank_tol = 1e-10) {
  return pbh_stabilizable(a.adjoint(), c.adjoint(), rank_tol);
}

struct BlockModeCheck {
  int label = 0;
  bool unstable = false;
  bool stabilizable = true;
  bool detectable = true;
  std::vector<RankTest> controllability;
  std::vector<RankTest> observability;
};

struct ModeCheckReport {
  std::vector<BlockModeCheck> blocks;  // canonical order
  bool stabilizable = true;
  bool detectable = true;
  std::vector<int> offending_stabilizable;
  std::vector<int> offending_detectable;
};

/// Per-block verdicts plus the global verdict on the assembled unstable part
/// (which also catches eigenvalues shared between blocks).
inline ModeCheckReport check_modes(const ModalSystem& sys, double rank_tol = 1e-10) {
  std::vector<ModalBlock> blocks = sys.blocks;
  sort_canonical(blocks);
  ModeCheckReport rep;
  std::vector<CMatrix> au;
  std::vector<CMatrix> bu, cu;
  Eigen::Index nu = 0;
  for (const auto& b : blocks) {
    BlockModeCheck c;
    c.label = b.label;
    c.unstable = is_unstable(b);
    if (c.unstable) {
      c.controllability = pbh_controllability(b.block, b.input, rank_tol);
      c.observability = pbh_controllability(b.block.adjoint(), b.output.adjoint(), rank_tol);
      for (const auto& t : c.controllability) c.stabilizable = c.stabilizable && t.full;
      for (const auto& t : c.observability) c.detectable = c.detectable && t.full;
      if (!c.stabilizable) rep.offending_stabilizable.push_back(b.label);
      if (!c.detectable) rep.offending_detectable.push_back(b.label);
      au.push_back(b.block);
      bu.push_back(b.input);
      cu.push_back(b.output);
      nu += b.dim();
    }
    rep.blocks.push_back(std::move(c));
  }
  if (nu > 0) {
    const CMatrix a = block_diag(au);
    CMatrix b(nu, sys.input_dim), c(sys.output_dim, nu);
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < au.size(); ++i) {
      const auto d = au[i].rows();
      b.middleRows(off, d) = bu[i];
      c.middleCols(off, d) = cu[i];
      off += d;
    }
    rep.stabilizable = pbh_stabilizable(a, b, rank_tol);
    rep.detectable = pbh_detectable(a, c, rank_tol);
  }
  rep.stabilizable = rep.stabilizable && rep.offending_stabilizable.empty();
  rep.detectable = rep.detectable && rep.offending_detectable.empty();
  return rep;
}

inline ModeCheckReport check_stabilizable(const ModalSystem& sys, double rank_tol = 1e-10) {
  return check_modes(sys, rank_tol);
}

inline ModeCheckReport check_detectable(const ModalSystem& sys, double rank_tol = 1e-10) {
  return check_modes(sys, rank_tol);
}

// ---------------------------------------------------------------------------
// Continuous algebraic Riccati equation A^H P + P A - P B B^H P + I = 0

namespace detail {

/// Swaps the diagonal entries k, k+1 of the upper-triangular T, updating U.
inline void swap_schur(CMatrix& t, CMatrix& u, Eigen::Index k) {
  const Complex t11 = t(k, k), t12 = t(k, k + 1), t22 = t(k + 1, k + 1);
  Complex x = t12, y = t22 - t11;
  const double r = std::hypot(std::abs(x), std::abs(y));
  if (r == 0.0) return;
  x /= r;
  y /= r;
  // unitary G with first column (x, y): eigenvector of t22
  CMatrix g(2, 2);
  g << x, -std::conj(y), y, std::conj(x);
  t.middleRows(k, 2) = (g.adjoint() * t.middleRows(k, 2)).eval();
  t.middleCols(k, 2) = (t.middleCols(k, 2) * g).eval();
  u.middleCols(k, 2) = (u.middleCols(k, 2) * g).eval();
  t(k + 1, k) = 0.0;
  t(k, k) = t22;
  t(k + 1, k + 1) = t11;
}

}  // namespace detail

struct CareSolution {
  CMatrix P;
  double residual = 0.0;
};

/// Stabilizing solution with Q = R = I, from the stable invariant subspace of
/// the Hamiltonian [[A, -B B^H], [-I, -A^H]] (ordered complex Schur form).
inline CareSolution solve_care(const CMatrix& a, const CMatrix& b) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n) throw Error(ErrorCode::DimensionMismatch, "solve_care: A must be n x n and B n x m");
  if (n == 0) return {CMatrix(0, 0), 0.0};
  CMatrix h(2 * n, 2 * n);
  h.topLeftCorner(n, n) = a;
  h.topRightCorner(n, n) = -b * b.adjoint();
  h.bottomLeftCorner(n, n) = -CMatrix::Identity(n, n);
  h.bottomRightCorner(n, n) = -a.adjoint();
  Eigen::ComplexSchur<CMatrix> schur(h);
  if (schur.info() != Eigen::Success) throw Error(ErrorCode::RiccatiDivergence, "Schur factorization of the Hamiltonian failed");
  CMatrix t = schur.matrixT();
  CMatrix u = schur.matrixU();
  const double scale = std::max(1.0, norm2(h));
  int stable = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (std::abs(t(i, i).real()) <= 1e-12 * scale)
      throw Error(ErrorCode::RiccatiDivergence, "Hamiltonian has eigenvalues on the imaginary axis");
    if (t(i, i).real() < 0.0) ++stable;
  }
  if (stable != n) throw Error(ErrorCode::RiccatiDivergence, "Hamiltonian stable subspace has wrong dimension");
  // bubble stable eigenvalues to the leading positions
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    for (Eigen::Index j = 2 * n - 1; j > i; --j) {
      if (t(j, j).real() < 0.0 && t(j - 1, j - 1).real() > 0.0) detail::swap_schur(t, u, j - 1);
    }
  }
  const CMatrix u11 = u.topLeftCorner(n, n);
  const CMatrix u21 = u.bottomLeftCorner(n, n);
  if (cond2(u11) > 1e12) throw Error(ErrorCode::RiccatiDivergence, "stable invariant subspace is not a graph");
  CMatrix p = u11.transpose().partialPivLu().solve(u21.transpose()).transpose();
  p = 0.5 * (p + p.adjoint()).eval();
  const CMatrix res = a.adjoint() * p + p * a - p * b * b.adjoint() * p + CMatrix::Identity(n, n);
  CareSolution s{p, norm2(res)};
  if (!all_finite(p) || s.residual > 1e-6 * std::max(1.0, norm2(p) * norm2(a) + norm2(p) * norm2(p) * norm2(b) * norm2(b)))
    throw Error(ErrorCode::RiccatiDivergence, "Riccati residual " + std::to_string(s.residual) + " too large");
  return s;
}

struct FeedbackDesign {
  CMatrix gain;
  double closed_loop_abscissa = 0.0;
  double riccati_residual = 0.0;
};

/// K = -B^H P, making A + B K Hurwitz.
inline FeedbackDesign design_feedback_report(const CMatrix& a, const CMatrix& b, double rank_tol = 1e-10) {
  if (a.rows() != a.cols() || b.rows() != a.rows())
    throw Error(ErrorCode::DimensionMismatch, "design_feedback: A must be n x n and B n x m");
  if (!pbh_stabilizable(a, b, rank_tol)) throw Error(ErrorCode::NotStabilizable, "(A, B) fails the PBH rank test");
  FeedbackDesign d;
  if (a.rows() == 0) {
    d.gain = CMatrix::Zero(b.cols(), 0);
    d.closed_loop_abscissa = -std::numeric_limits<double>::infinity();
    return d;
  }
  const CareSolution s = solve_care(a, b);
  d.gain = -b.adjoint() * s.P;
  d.riccati_residual = s.residual;
  d.closed_loop_abscissa = spectral_abscissa(a + b * d.gain).value;
  if (!(d.closed_loop_abscissa < 0.0))
    throw Error(ErrorCode::RiccatiDivergence, "Riccati gain does not stabilize A + B K");
  return d;
}

inline CMatrix design_feedback(const CMatrix& a, const CMatrix& b, double rank_tol = 1e-10) {
  return design_feedback_report(a, b, rank_tol).gain;
}

/// L with A + L C Hurwitz, the dual design on (A^H, C^H).
inline FeedbackDesign design_observer_report(const CMatrix& a, const CMatrix& c, double rank_tol = 1e-10) {
  if (a.rows() != a.cols() || c.cols() != a.rows())
    throw Error(ErrorCode::DimensionMismatch, "design_observer: A must be n x n and C p x n");
  FeedbackDesign d;
  try {
    d = design_feedback_report(a.adjoint(), c.adjoint(), rank_tol);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotStabilizable) throw Error(ErrorCode::NotDetectable, "(A, C) fails the PBH rank test");
    throw;
  }
  d.gain = d.gain.adjoint().eval();
  return d;
}

inline CMatrix design_observer(const CMatrix& a, const CMatrix& c, double rank_tol = 1e-10) {
  return design_observer_report(a, c, rank_tol).gain;
}

// ---------------------------------------------------------------------------
// Observer-based controller

struct ControllerMetadata {
  double feedback_abscissa = 0.0;  // spectral abscissa of A_u + B_u K_u
  double observer_abscissa = 0.0;  // spectral abscissa of A_u + L_u C_u
  double feedback_residual = 0.0;
  double observer_residual = 0.0;
};

struct ObserverController {
  CMatrix E, F, G;
  CMatrix K_u, L_u;
  int n_u = 0;
  int n_r = 0;
  std::vector<int> labels;  // plant blocks copied by the controller state
  ControllerMetadata metadata;

  [[nodiscard]] StateSpaceSystem as_system() const { return StateSpaceSystem::make(E, F, G); }
};

/// Splits a truncation into its unstable prefix (size n_u) and retained stable rest.
inline int unstable_state_dim(const SpectrumPartition& partition, const Truncation& truncation) {
  const std::set<int> unstable(partition.unstable_indices.begin(), partition.unstable_indices.end());
  int n_u = 0;
  bool prefix = true;
  for (std::size_t i = 0; i < truncation.labels.size(); ++i) {
    const bool u = unstable.count(truncation.labels[i]) > 0;
    if (u && !prefix) throw Error(ErrorCode::InvalidArgument, "unstable blocks must precede retained stable blocks");
    if (u) n_u += static_cast<int>(truncation.block_dims[i]);
    prefix = prefix && u;
  }
  int found = 0;
  for (int label : truncation.labels) found += static_cast<int>(unstable.count(label));
  if (found != static_cast<int>(unstable.size()))
    throw Error(ErrorCode::UnstableModeDiscarded, "truncation does not contain every unstable block");
  return n_u;
}

/// E = A_N + [L; 0] C_N + B_N [K, 0], F = -[L; 0], G = [K, 0].
inline ObserverController assemble_observer_controller(const StateSpaceSystem& plant_N, int n_u, const CMatrix& k_u,
                                                       const CMatrix& l_u) {
  const auto n = plant_N.state_dim();
  const auto m = plant_N.input_dim();
  const auto p = plant_N.output_dim();
  if (k_u.rows() != m || k_u.cols() != n_u || l_u.rows() != n_u || l_u.cols() != p)
    throw Error(ErrorCode::DimensionMismatch, "gain shapes do not match the unstable part");
  ObserverController c;
  c.n_u = n_u;
  c.n_r = static_cast<int>(n) - n_u;
  c.K_u = k_u;
  c.L_u = l_u;
  CMatrix l_pad = CMatrix::Zero(n, p);
  l_pad.topRows(n_u) = l_u;
  c.G = CMatrix::Zero(m, n);
  c.G.leftCols(n_u) = k_u;
  c.E = plant_N.A + l_pad * plant_N.C + plant_N.B * c.G;
  c.F = -l_pad;
  return c;
}

inline ObserverController synthesize_controller(const SpectrumPartition& partition, const Truncation& truncation,
                                                double rank_tol = 1e-10) {
  const int n_u = unstable_state_dim(partition, truncation);
  const StateSpaceSystem& s = truncation.system;
  const CMatrix a_u = s.A.topLeftCorner(n_u, n_u);
  const CMatrix b_u = s.B.topRows(n_u);
  const CMatrix c_u = s.C.leftCols(n_u);
  const FeedbackDesign fb = design_feedback_report(a_u, b_u, rank_tol);
  const FeedbackDesign ob = design_observer_report(a_u, c_u, rank_tol);
  ObserverController c = assemble_observer_controller(s, n_u, fb.gain, ob.gain);
  c.labels = truncation.labels;
  c.metadata = {fb.closed_loop_abscissa, ob.closed_loop_abscissa, fb.riccati_residual, ob.riccati_residual};
  return c;
}

inline void require_hurwitz(const CMatrix& a, const std::string& what) {
  const double s = spectral_abscissa(a).value;
  if (!(s < 0.0)) throw Error(ErrorCode::NotHurwitz, what + " has spectral abscissa " + std::to_string(s) + " >= 0");
}

/// Loop from the tail output (added to the measurement) to the control, restricted
/// to its reachable and observable part: state (x_u, e_u).
inline StateSpaceSystem reduced_R_system(const CMatrix& a_u, const CMatrix& b_u, const CMatrix& c_u, const CMatrix& k_u,
                                         const CMatrix& l_u) {
  const auto n = a_u.rows();
  const CMatrix acl = a_u + b_u * k_u;
  const CMatrix aob = a_u + l_u * c_u;
  require_hurwitz(acl, "A_u + B_u K_u");
  require_hurwitz(aob, "A_u + L_u C_u");
  CMatrix a = CMatrix::Zero(2 * n, 2 * n);
  a.topLeftCorner(n, n) = acl;
  a.topRightCorner(n, n) = b_u * k_u;
  a.bottomRightCorner(n, n) = aob;
  CMatrix b = CMatrix::Zero(2 * n, l_u.cols());
  b.bottomRows(n) = -l_u;
  CMatrix c(k_u.rows(), 2 * n);
  c.leftCols(n) = k_u;
  c.rightCols(n) = k_u;
  return StateSpaceSystem::make(std::move(a), std::move(b), std::move(c));
}

/// Same loop in the full state (x_u, x_r, e_u, e_r).
inline StateSpaceSystem full_R_system(const StateSpaceSystem& plant_N, int n_u, const CMatrix& k_u, const CMatrix& l_u) {
  const auto n = plant_N.state_dim();
  const auto n_r = n - n_u;
  const CMatrix a_u = plant_N.A.topLeftCorner(n_u, n_u);
  const CMatrix a_r = plant_N.A.bottomRightCorner(n_r, n_r);
  const CMatrix b_u = plant_N.B.topRows(n_u);
  const CMatrix b_r = plant_N.B.bottomRows(n_r);
  const CMatrix c_u = plant_N.C.leftCols(n_u);
  const CMatrix c_r = plant_N.C.rightCols(n_r);
  const auto dim = 2 * n;
  CMatrix a = CMatrix::Zero(dim, dim);
  // offsets: x_u 0, x_r n_u, e_u n, e_r n + n_u
  a.block(0, 0, n_u, n_u) = a_u + b_u * k_u;
  a.block(0, n, n_u, n_u) = b_u * k_u;
  a.block(n_u, 0, n_r, n_u) = b_r * k_u;
  a.block(n_u, n_u, n_r, n_r) = a_r;
  a.block(n_u, n, n_r, n_u) = b_r * k_u;
  a.block(n, n, n_u, n_u) = a_u + l_u * c_u;
  a.block(n, n + n_u, n_u, n_r) = l_u * c_r;
  a.block(n + n_u, n + n_u, n_r, n_r) = a_r;
  CMatrix b = CMatrix::Zero(dim, l_u.cols());
  b.block(n, 0, n_u, l_u.cols()) = -l_u;
  CMatrix c = CMatrix::Zero(k_u.rows(), dim);
  c.block(0, 0, k_u.rows(), n_u) = k_u;
  c.block(0, n, k_u.rows(), n_u) = k_u;
  return StateSpaceSystem::make(std::move(a), std::move(b), std::move(c));
}

/// Loop for an arbitrary controller (E, F, G): state (x_N, w), input added to the measurement.
inline StateSpaceSystem loop_R_system(const StateSpaceSystem& plant_N, const StateSpaceSystem& controller) {
  const CMatrix a = closed_loop_direct(plant_N, controller);
  const auto n = plant_N.state_dim(), q = controller.state_dim();
  CMatrix b = CMatrix::Zero(n + q, controller.input_dim());
  b.bottomRows(q) = controller.B;
  CMatrix c = CMatrix::Zero(controller.output_dim(), n + q);
  c.rightCols(q) = controller.C;
  return StateSpaceSystem::make(a, std::move(b), std::move(c));
}

// ---------------------------------------------------------------------------
// Certification

struct CertifyOptions {
  double margin_fraction = 0.5;
  int beta_grid_size = 13;
  std::optional<double> beta;  // evaluate at this beta only
};

/// R-loop data entering the certificate: IO bound from `io_system`, IS bound from `is_system`.
struct LoopSystems {
  StateSpaceSystem io_system;
  StateSpaceSystem is_system;
};

struct LoopEnvelopes {
  DecayEnvelope io;
  DecayEnvelope is;
};

inline LoopEnvelopes loop_envelopes(const LoopSystems& loop, double margin_fraction) {
  return {decay_envelope(loop.io_system.A, margin_fraction), decay_envelope(loop.is_system.A, margin_fraction)};
}

/// Largest usable beta: every envelope and the tail must decay faster.
inline double alpha_min(const LoopEnvelopes& env, const TailModel& tail) {
  return std::min({env.io.alpha, env.is.alpha, tail.decay_alpha});
}

inline std::vector<double> beta_grid(double alpha_min_value, int size) {
  std::vector<double> g;
  for (int j = 0; j < size; ++j) g.push_back(std::ldexp(alpha_min_value, -(j + 1)));
  return g;
}

inline GainPair loop_io_gains(const StateSpaceSystem& s, const DecayEnvelope& env, double beta) {
  return gain_strong(env, beta, norm2(s.B), norm2(s.C), norm2(s.A));
}

inline StabilityCertificate certify_at(const LoopSystems& loop, const LoopEnvelopes& env, const TailModel& tail,
                                       double beta, int N) {
  const GainBound g_r = loop_io_gains(loop.io_system, env.io, beta).g;
  const GainBound h_r = loop_io_gains(loop.is_system, env.is, beta).h;
  const GainPair t = tail_gains(tail, beta);
  return certify_small_gain(g_r, h_r, t.g, t.h, N);
}

/// Scans beta = alpha_min / 2^(j+1), largest first, returning the first Certified
/// certificate or the one at the smallest beta.
inline StabilityCertificate certify_loop(const LoopSystems& loop, const TailModel& tail, int N, const CertifyOptions& opt) {
  for (const auto* s : {&loop.io_system, &loop.is_system}) require_hurwitz(s->A, "controller loop");
  if (!(tail.decay_alpha > 0.0)) throw Error(ErrorCode::InfiniteUnstablePart, "tail does not decay");
  const LoopEnvelopes env = loop_envelopes(loop, opt.margin_fraction);
  const double amin = alpha_min(env, tail);
  if (opt.beta) return certify_at(loop, env, tail, *opt.beta, N);
  if (opt.beta_grid_size < 1) throw Error(ErrorCode::InvalidArgument, "beta grid must be nonempty");
  StabilityCertificate last;
  for (double beta : beta_grid(amin, opt.beta_grid_size)) {
    last = certify_at(loop, env, tail, beta, N);
    if (last.verdict == Verdict::Certified) return last;
  }
  return last;
}

inline LoopSystems observer_loop(const Truncation& truncation, const ObserverController& c) {
  const StateSpaceSystem& s = truncation.system;
  const auto n_u = c.n_u;
  return {reduced_R_system(s.A.topLeftCorner(n_u, n_u), s.B.topRows(n_u), s.C.leftCols(n_u), c.K_u, c.L_u),
          full_R_system(s, n_u, c.K_u, c.L_u)};
}

inline StabilityCertificate certify_observer_controller(const Truncation& truncation, const ObserverController& c,
                                                        const CertifyOptions& opt = {}) {
  StabilityCertificate cert = certify_loop(observer_loop(truncation, c), truncation.tail, truncation.n_blocks, opt);
  cert.n_u = c.n_u;
  cert.n_r = c.n_r;
  return cert;
}

inline StabilityCertificate certify_general_controller(const Truncation& truncation, const StateSpaceSystem& controller,
                                                       const CertifyOptions& opt = {}) {
  const StateSpaceSystem loop = loop_R_system(truncation.system, controller);
  StabilityCertificate cert;
  try {
    cert = certify_loop({loop, loop}, truncation.tail, truncation.n_blocks, opt);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotHurwitz) throw;
    cert.truncation_N = truncation.n_blocks;
    cert.diagnostics.push_back(std::string("controller loop is not exponentially stable: ") + e.what());
    cert.verdict = Verdict::Failed;
  }
  cert.n_u = 0;
  cert.n_r = static_cast<int>(controller.state_dim());
  return cert;
}

// ---------------------------------------------------------------------------
// End-to-end synthesis with the truncation search

struct SynthesisOptions {
  double margin_fraction = 0.5;
  int beta_grid_size = 13;
  double rank_tol = 1e-10;
  int max_halvings = 40;
  std::optional<int> N;             // fixed truncation order
  std::optional<double> epsilon;    // starting tail input bound
};

struct SynthesisAttempt {
  double epsilon = 0.0;
  int N = 0;
  double product = 0.0;
  Verdict verdict = Verdict::Failed;
};

struct SynthesisResult {
  ObserverController controller;
  StabilityCertificate certificate;
  Truncation truncation;
  SpectrumPartition partition;
  std::vector<SynthesisAttempt> attempts;
  double gain_R_estimate = 0.0;
};

/**
 * Designs K_u, L_u on the unstable part, then halves epsilon (tail input bound)
 * until the small-gain certificate passes or the resolved modes run out.
 */
inline SynthesisResult synthesize(const ModalSystem& sys, const SynthesisOptions& opt = {}) {
  SynthesisResult r;
  r.partition = partition_spectrum(sys);
  const ModeCheckReport modes = check_modes(sys, opt.rank_tol);
  if (!modes.stabilizable) throw Error(ErrorCode::NotStabilizable, "unstable part is not stabilizable");
  if (!modes.detectable) throw Error(ErrorCode::NotDetectable, "unstable part is not detectable");
  const int n_unstable = static_cast<int>(r.partition.unstable_indices.size());
  const int total = static_cast<int>(sys.blocks.size());
  const CertifyOptions copt{opt.margin_fraction, opt.beta_grid_size, std::nullopt};

  auto attempt = [&](int N, double eps) {
    Truncation t = truncate(sys, N);
    ObserverController c = synthesize_controller(r.partition, t, opt.rank_tol);
    StabilityCertificate cert = certify_observer_controller(t, c, copt);
    r.attempts.push_back({eps, N, cert.product, cert.verdict});
    r.truncation = std::move(t);
    r.controller = std::move(c);
    r.certificate = std::move(cert);
    return r.certificate.verdict == Verdict::Certified;
  };

  if (opt.N) {
    attempt(*opt.N, 0.0);
    return r;
  }

  // reference gain of the loop at half its decay rate
  {
    const Truncation tu = truncate(sys, n_unstable);
    const ObserverController cu = synthesize_controller(r.partition, tu, opt.rank_tol);
    const LoopSystems loop = observer_loop(tu, cu);
    const DecayEnvelope env = decay_envelope(loop.io_system.A, opt.margin_fraction);
    r.gain_R_estimate = env.alpha > 0.0 && std::isfinite(env.alpha)
                            ? loop_io_gains(loop.io_system, env, 0.5 * env.alpha).g.value
                            : 0.0;
  }
  double eps = opt.epsilon.value_or(r.gain_R_estimate > 0.0 ? 0.5 / r.gain_R_estimate : 1.0);
  int last_N = -1;
  for (int h = 0; h <= opt.max_halvings; ++h, eps *= 0.5) {
    int N = total;
    try {
      N = select_truncation(sys, eps);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotReachable) throw;
    }
    if (N == last_N) {
      if (N == total) break;
      continue;
    }
    last_N = N;
    if (attempt(N, eps)) return r;
    if (N == total) break;
  }
  r.certificate.diagnostics.push_back("no certificate within the resolved modes (N up to " + std::to_string(total) +
                                      "); increase N_max");
  return r;
}

}  // namespace modalstab
