#pragma once

// Plants in modal (block-diagonal) coordinates: composition, spectral
// partition and truncation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "modalstab/linalg.hpp"

namespace modalstab {

/// Restriction of the generator to one generalized eigenspace (d = 1, 2 or 3).
struct ModalBlock {
  CMatrix block;   // d x d
  CMatrix input;   // d x m
  CMatrix output;  // p x d
  int label = 0;

  [[nodiscard]] Eigen::Index dim() const { return block.rows(); }
};

/// Certified data for the infinitely many modes that are not resolved.
struct TailModel {
  double decay_alpha = 1.0;        // Re(lambda) <= -decay_alpha on the tail
  double input_norm = 0.0;         // ||P_s B||
  double output_graph_norm = 0.0;  // bound on ||C_s||_{Dom(A_s) -> Y}
  double amplitude_a = 1.0;        // ||exp(A_s t)|| <= a exp(-alpha t)
};

struct ModalSystem {
  std::vector<ModalBlock> blocks;
  TailModel tail;
  int input_dim = 1;
  int output_dim = 1;
};

/// Dense finite-dimensional Sys(A, B, C) with feedthrough D.
struct StateSpaceSystem {
  CMatrix A, B, C, D;

  [[nodiscard]] Eigen::Index state_dim() const { return A.rows(); }
  [[nodiscard]] Eigen::Index input_dim() const { return B.cols(); }
  [[nodiscard]] Eigen::Index output_dim() const { return C.rows(); }

  void validate() const {
    const auto n = A.rows();
    if (A.cols() != n || B.rows() != n || C.cols() != n || D.rows() != C.rows() || D.cols() != B.cols())
      throw Error(ErrorCode::DimensionMismatch,
                  "state-space dimensions inconsistent: A " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) +
                      ", B " + std::to_string(B.rows()) + "x" + std::to_string(B.cols()) + ", C " +
                      std::to_string(C.rows()) + "x" + std::to_string(C.cols()) + ", D " + std::to_string(D.rows()) +
                      "x" + std::to_string(D.cols()));
    if (!all_finite(A) || !all_finite(B) || !all_finite(C) || !all_finite(D))
      throw Error(ErrorCode::InvalidArgument, "state-space matrices contain non-finite entries");
  }

  static StateSpaceSystem make(CMatrix a, CMatrix b, CMatrix c) {
    StateSpaceSystem s{std::move(a), std::move(b), std::move(c), CMatrix()};
    s.D = CMatrix::Zero(s.C.rows(), s.B.cols());
    s.validate();
    return s;
  }

  static StateSpaceSystem make(CMatrix a, CMatrix b, CMatrix c, CMatrix d) {
    StateSpaceSystem s{std::move(a), std::move(b), std::move(c), std::move(d)};
    s.validate();
    return s;
  }
};

struct SpectrumPartition {
  std::vector<int> unstable_indices;          // labels, canonical order
  std::vector<int> retained_stable_indices;   // labels, canonical order
  TailModel tail;
  double margin_omega = -1.0;  // every stable eigenvalue has Re <= margin_omega < 0
};

// ---------------------------------------------------------------------------
// Block spectra and canonical ordering

/// Rightmost eigenvalue of a block; among equal real parts the smallest |Im|.
inline Complex rightmost_eigenvalue(const CMatrix& block) {
  const CVector ev = eigenvalues(block);
  Complex best = ev(0);
  for (Eigen::Index i = 1; i < ev.size(); ++i) {
    if (ev(i).real() > best.real() ||
        (ev(i).real() == best.real() && std::abs(ev(i).imag()) < std::abs(best.imag())))
      best = ev(i);
  }
  return best;
}

inline bool is_unstable(const ModalBlock& b) { return rightmost_eigenvalue(b.block).real() >= 0.0; }

/// Descending Re of the rightmost eigenvalue, then ascending |Im|, then label.
inline void sort_canonical(std::vector<ModalBlock>& blocks) {
  std::vector<std::pair<Complex, std::size_t>> keys;
  keys.reserve(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) keys.emplace_back(rightmost_eigenvalue(blocks[i].block), i);
  std::sort(keys.begin(), keys.end(), [&](const auto& x, const auto& y) {
    if (x.first.real() != y.first.real()) return x.first.real() > y.first.real();
    const double ax = std::abs(x.first.imag()), ay = std::abs(y.first.imag());
    if (ax != ay) return ax < ay;
    return blocks[x.second].label < blocks[y.second].label;
  });
  std::vector<ModalBlock> sorted;
  sorted.reserve(blocks.size());
  for (const auto& k : keys) sorted.push_back(std::move(blocks[k.second]));
  blocks = std::move(sorted);
}

inline void validate(const ModalSystem& sys) {
  if (sys.input_dim < 0 || sys.output_dim < 0) throw Error(ErrorCode::InvalidArgument, "negative input/output dimension");
  std::vector<int> labels;
  for (const auto& b : sys.blocks) {
    const auto d = b.block.rows();
    if (d < 1 || d > 3 || b.block.cols() != d) throw Error(ErrorCode::InvalidArgument, "block must be square of size 1..3");
    if (b.input.rows() != d || b.input.cols() != sys.input_dim || b.output.cols() != d ||
        b.output.rows() != sys.output_dim)
      throw Error(ErrorCode::DimensionMismatch, "block " + std::to_string(b.label) + " has inconsistent input/output shape");
    if (!all_finite(b.block) || !all_finite(b.input) || !all_finite(b.output))
      throw Error(ErrorCode::InvalidArgument, "block " + std::to_string(b.label) + " has non-finite entries");
    labels.push_back(b.label);
  }
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end())
    throw Error(ErrorCode::InvalidArgument, "block labels must be distinct");
  const auto& t = sys.tail;
  if (!std::isfinite(t.decay_alpha) || !(t.input_norm >= 0.0) || !std::isfinite(t.input_norm) ||
      !(t.output_graph_norm >= 0.0) || !std::isfinite(t.output_graph_norm) || !(t.amplitude_a >= 1.0) ||
      !std::isfinite(t.amplitude_a))
    throw Error(ErrorCode::InvalidArgument, "tail model norms must be finite, nonnegative, amplitude >= 1");
}

/// Validates and returns the system with blocks in canonical order.
inline ModalSystem make_modal_system(std::vector<ModalBlock> blocks, TailModel tail, int input_dim, int output_dim) {
  ModalSystem sys{std::move(blocks), tail, input_dim, output_dim};
  validate(sys);
  sort_canonical(sys.blocks);
  return sys;
}

// ---------------------------------------------------------------------------
// Spectral partition

inline SpectrumPartition partition_spectrum(const ModalSystem& sys) {
  if (!(sys.tail.decay_alpha > 0.0))
    throw Error(ErrorCode::InfiniteUnstablePart,
                "tail decay rate " + std::to_string(sys.tail.decay_alpha) +
                    " <= 0: infinitely many modes with Re >= 0, no finite-dimensional stabilizer exists");
  std::vector<ModalBlock> blocks = sys.blocks;
  sort_canonical(blocks);
  SpectrumPartition part;
  part.tail = sys.tail;
  part.margin_omega = -sys.tail.decay_alpha;
  for (const auto& b : blocks) {
    const double re = rightmost_eigenvalue(b.block).real();
    if (re >= 0.0) {
      part.unstable_indices.push_back(b.label);
    } else {
      part.retained_stable_indices.push_back(b.label);
      part.margin_omega = std::max(part.margin_omega, re);
    }
  }
  return part;
}

// ---------------------------------------------------------------------------
// Resolvent and compositions

inline bool near_eigenvalue(Complex lambda, Complex eig) {
  return std::abs(lambda - eig) < 1e-9 * (1.0 + std::abs(lambda));
}

/// C_k (lambda - A_k)^{-1} for every resolved block, concatenated in block order.
inline CMatrix resolvent_output(const ModalSystem& sys, Complex lambda) {
  Eigen::Index n = 0;
  for (const auto& b : sys.blocks) n += b.dim();
  CMatrix out(sys.output_dim, n);
  Eigen::Index col = 0;
  for (const auto& b : sys.blocks) {
    const CVector ev = eigenvalues(b.block);
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (near_eigenvalue(lambda, ev(i)))
        throw Error(ErrorCode::ResolventAtEigenvalue, "lambda coincides with an eigenvalue of block " + std::to_string(b.label));
    const auto d = b.dim();
    const CMatrix shifted = lambda * CMatrix::Identity(d, d) - b.block;
    out.middleCols(col, d) = shifted.transpose().partialPivLu().solve(b.output.transpose()).transpose();
    col += d;
  }
  return out;
}

/// C (lambda - A)^{-1} for a dense system.
inline CMatrix resolvent_output(const StateSpaceSystem& s, Complex lambda) {
  const auto n = s.state_dim();
  const CVector ev = eigenvalues(s.A);
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (near_eigenvalue(lambda, ev(i))) throw Error(ErrorCode::ResolventAtEigenvalue, "lambda is an eigenvalue of A");
  const CMatrix shifted = lambda * CMatrix::Identity(n, n) - s.A;
  return shifted.transpose().partialPivLu().solve(s.C.transpose()).transpose();
}

/// Cascade s2 o s1 (output of s1 drives s2), state [x1; x2].
inline StateSpaceSystem serial_compose(const StateSpaceSystem& s1, const StateSpaceSystem& s2) {
  s1.validate();
  s2.validate();
  if (s1.output_dim() != s2.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "serial_compose: output dim of s1 != input dim of s2");
  const auto n1 = s1.state_dim(), n2 = s2.state_dim();
  CMatrix a = CMatrix::Zero(n1 + n2, n1 + n2);
  a.topLeftCorner(n1, n1) = s1.A;
  a.bottomLeftCorner(n2, n1) = s2.B * s1.C;
  a.bottomRightCorner(n2, n2) = s2.A;
  CMatrix b(n1 + n2, s1.input_dim());
  b.topRows(n1) = s1.B;
  b.bottomRows(n2) = s2.B * s1.D;
  CMatrix c(s2.output_dim(), n1 + n2);
  c.leftCols(n1) = s2.D * s1.C;
  c.rightCols(n2) = s2.C;
  return StateSpaceSystem::make(std::move(a), std::move(b), std::move(c), s2.D * s1.D);
}

namespace detail {
inline void check_loop_dims(const StateSpaceSystem& plant, const StateSpaceSystem& ctrl) {
  plant.validate();
  ctrl.validate();
  if (ctrl.input_dim() != plant.output_dim() || ctrl.output_dim() != plant.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "controller input/output dims do not match plant output/input dims");
  if (plant.D.size() > 0 && plant.D.cwiseAbs().maxCoeff() != 0.0)
    throw Error(ErrorCode::InvalidArgument, "closed loop requires a strictly proper plant (D = 0)");
  if (ctrl.D.size() > 0 && ctrl.D.cwiseAbs().maxCoeff() != 0.0)
    throw Error(ErrorCode::InvalidArgument, "closed loop requires a strictly proper controller (D = 0)");
}
}  // namespace detail

/// Closed-loop generator [[A, B G], [F C, E]] in the state (x, w).
inline CMatrix closed_loop_direct(const StateSpaceSystem& plant, const StateSpaceSystem& controller) {
  detail::check_loop_dims(plant, controller);
  const auto n = plant.state_dim(), q = controller.state_dim();
  CMatrix m(n + q, n + q);
  m.topLeftCorner(n, n) = plant.A;
  m.topRightCorner(n, q) = plant.B * controller.C;
  m.bottomLeftCorner(q, n) = controller.B * plant.C;
  m.bottomRightCorner(q, q) = controller.A;
  return m;
}

/**
 * Closed-loop generator in the lambda-shifted coordinates (x, w + F C_lambda x),
 * where C_lambda = C (lambda - A)^{-1} is bounded. Similar to closed_loop_direct
 * for every admissible lambda.
 */
inline CMatrix close_loop(const StateSpaceSystem& plant, const StateSpaceSystem& controller, Complex lambda) {
  detail::check_loop_dims(plant, controller);
  const auto n = plant.state_dim(), q = controller.state_dim();
  const CMatrix& a = plant.A;
  const CMatrix& b = plant.B;
  const CMatrix& e = controller.A;
  const CMatrix& f = controller.B;
  const CMatrix& g = controller.C;
  const CMatrix c_lambda = resolvent_output(plant, lambda);
  const CMatrix fcl = f * c_lambda;  // q x n
  const CMatrix bg = b * g;          // n x q
  CMatrix m(n + q, n + q);
  m.topLeftCorner(n, n) = a - bg * fcl;
  m.topRightCorner(n, q) = bg;
  m.bottomLeftCorner(q, n) = lambda * fcl - e * fcl - fcl * bg * fcl;
  m.bottomRightCorner(q, q) = e + fcl * bg;
  return m;
}

// ---------------------------------------------------------------------------
// Truncation

/// Per-block contribution when the block is moved to the tail.
struct BlockTailData {
  double input_sq = 0.0;   // ||B_k||_F^2
  double graph_rho = 0.0;  // |C_k x| <= rho (||x|| + ||A_k x||)
  Envelope env;            // ||exp(A_k t)|| <= a exp(-alpha t)
};

/**
 * rho = ||C|| ||C A^{-1}|| / (||C|| + ||C A^{-1}||): the best constant with
 * |C x| <= rho (||x|| + ||A x||) obtainable from the two one-sided bounds.
 * For a scalar block this is |c| / (1 + |lambda|).
 */
inline BlockTailData block_tail_data(const ModalBlock& b) {
  BlockTailData out;
  out.input_sq = b.input.squaredNorm();
  const double c = norm2(b.output);
  Eigen::PartialPivLU<CMatrix> lu(b.block);
  const CMatrix cm = b.block.transpose().partialPivLu().solve(b.output.transpose()).transpose();
  const double cminv = all_finite(cm) ? norm2(cm) : std::numeric_limits<double>::infinity();
  out.graph_rho = (c == 0.0 || cminv == 0.0) ? 0.0 : (std::isinf(cminv) ? c : c * cminv / (c + cminv));

  const auto d = b.dim();
  if (d == 1) {
    out.env = {1.0, -b.block(0, 0).real()};
    return out;
  }
  Eigen::ComplexEigenSolver<CMatrix> es(b.block);
  const double kappa = es.info() == Eigen::Success ? cond2(es.eigenvectors()) : std::numeric_limits<double>::infinity();
  if (std::isfinite(kappa) && kappa < 1e8) {
    out.env = {std::max(1.0, kappa), -spectral_abscissa(b.block).value};
  } else {
    out.env = lyapunov_envelope(b.block, 0.5);  // near-defective block
  }
  return out;
}

/// Dense system over the first N canonical blocks plus the updated tail.
struct Truncation {
  StateSpaceSystem system;
  TailModel tail;
  std::vector<int> labels;
  std::vector<Eigen::Index> block_dims;
  int n_blocks = 0;
};

inline Truncation truncate(const ModalSystem& sys, int n_keep) {
  std::vector<ModalBlock> blocks = sys.blocks;
  sort_canonical(blocks);
  const int total = static_cast<int>(blocks.size());
  if (n_keep < 0 || n_keep > total)
    throw Error(ErrorCode::InvalidArgument,
                "truncate: N = " + std::to_string(n_keep) + " outside [0, " + std::to_string(total) + "]");
  for (int i = n_keep; i < total; ++i)
    if (is_unstable(blocks[i]))
      throw Error(ErrorCode::UnstableModeDiscarded,
                  "block " + std::to_string(blocks[i].label) + " has Re >= 0 and would be discarded at N = " +
                      std::to_string(n_keep));

  Truncation t;
  t.n_blocks = n_keep;
  Eigen::Index n = 0;
  for (int i = 0; i < n_keep; ++i) n += blocks[i].dim();
  CMatrix a = CMatrix::Zero(n, n), b(n, sys.input_dim), c(sys.output_dim, n);
  Eigen::Index off = 0;
  for (int i = 0; i < n_keep; ++i) {
    const auto& blk = blocks[i];
    const auto d = blk.dim();
    a.block(off, off, d, d) = blk.block;
    b.middleRows(off, d) = blk.input;
    c.middleCols(off, d) = blk.output;
    t.labels.push_back(blk.label);
    t.block_dims.push_back(d);
    off += d;
  }
  t.system = StateSpaceSystem::make(std::move(a), std::move(b), std::move(c));

  t.tail = sys.tail;
  if (n_keep < total) {
    double in_sq = sys.tail.input_norm * sys.tail.input_norm;
    double out_sq = sys.tail.output_graph_norm * sys.tail.output_graph_norm;
    for (int i = n_keep; i < total; ++i) {
      const BlockTailData d = block_tail_data(blocks[i]);
      in_sq += d.input_sq;
      out_sq += d.graph_rho * d.graph_rho;
      t.tail.decay_alpha = std::min(t.tail.decay_alpha, d.env.alpha);
      t.tail.amplitude_a = std::max(t.tail.amplitude_a, d.env.amplitude);
    }
    t.tail.input_norm = std::sqrt(in_sq);
    t.tail.output_graph_norm = std::sqrt(out_sq);
  }
  return t;
}

inline int count_unstable_blocks(const ModalSystem& sys) {
  return static_cast<int>(std::count_if(sys.blocks.begin(), sys.blocks.end(), [](const ModalBlock& b) { return is_unstable(b); }));
}

/// Tail input norm after keeping the first N canonical blocks, for N = 0..blocks.
inline std::vector<double> tail_input_norms(const ModalSystem& sys) {
  std::vector<ModalBlock> blocks = sys.blocks;
  sort_canonical(blocks);
  const std::size_t total = blocks.size();
  std::vector<double> suffix(total + 1);
  double acc = sys.tail.input_norm * sys.tail.input_norm;
  suffix[total] = std::sqrt(acc);
  for (std::size_t i = total; i-- > 0;) {
    acc += blocks[i].input.squaredNorm();
    suffix[i] = std::sqrt(acc);
  }
  return suffix;
}

/// Smallest N >= #unstable blocks whose post-truncation tail input norm is < epsilon.
inline int select_truncation(const ModalSystem& sys, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "select_truncation: epsilon must be > 0");
  const std::vector<double> norms = tail_input_norms(sys);
  const int total = static_cast<int>(sys.blocks.size());
  for (int n = count_unstable_blocks(sys); n <= total; ++n)
    if (norms[n] < epsilon) return n;
  throw Error(ErrorCode::NotReachable, "tail input norm " + std::to_string(norms[total]) +
                                           " >= epsilon " + std::to_string(epsilon) +
                                           " even with every resolved block kept; increase N_max");
}

}  // namespace modalstab
