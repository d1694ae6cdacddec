#pragma once

// Exponentially weighted input-output (IO) and input-state (IS) gain bounds,
// their composition, and the small-gain stability certificate.

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "modalstab/linalg.hpp"
#include "modalstab/modal_core.hpp"

namespace modalstab {

enum class GainKind { IS, IO };
enum class GainProvenance { LemmaWeak, LemmaStrong, Composed, LyapunovEnvelope, Empirical };

inline std::string_view to_string(GainKind k) { return k == GainKind::IS ? "IS" : "IO"; }

inline std::string_view to_string(GainProvenance p) {
  switch (p) {
    case GainProvenance::LemmaWeak: return "LemmaWeak";
    case GainProvenance::LemmaStrong: return "LemmaStrong";
    case GainProvenance::Composed: return "Composed";
    case GainProvenance::LyapunovEnvelope: return "LyapunovEnvelope";
    case GainProvenance::Empirical: return "Empirical";
  }
  return "Unknown";
}

/// Bound on the beta-weighted gain measured with n input / m output derivatives.
struct GainBound {
  double beta = 0.0;
  double value = 0.0;
  GainKind kind = GainKind::IO;
  int n = 0;
  int m = 0;
  GainProvenance provenance = GainProvenance::LemmaWeak;
};

/// ||exp(A t)|| <= amplitude_a * exp(-alpha t).
struct DecayEnvelope {
  double amplitude_a = 1.0;
  double alpha = 0.0;
};

struct GainPair {
  GainBound h;  // input-to-state
  GainBound g;  // input-to-output
};

namespace detail {
inline void check_beta(const DecayEnvelope& env, double beta) {
  if (!std::isfinite(beta)) throw Error(ErrorCode::InvalidArgument, "beta must be finite");
  if (!(beta < env.alpha))
    throw Error(ErrorCode::BetaExceedsDecay,
                "beta = " + std::to_string(beta) + " >= decay rate alpha = " + std::to_string(env.alpha));
  if (!(env.amplitude_a >= 1.0)) throw Error(ErrorCode::InvalidArgument, "envelope amplitude must be >= 1");
}
}  // namespace detail

/// IS-(1,1) and IO-(1,0) bounds for an unbounded-output system, using the graph norm of C.
inline GainPair gain_weak(const DecayEnvelope& env, double beta, double normB, double normC_graph) {
  detail::check_beta(env, beta);
  const double a = env.amplitude_a, gap = env.alpha - beta;
  GainPair p;
  p.h = {beta, std::max(a * normB / gap, (a + 1.0) * normB), GainKind::IS, 1, 1, GainProvenance::LemmaWeak};
  p.g = {beta, a * normB * normC_graph * (1.0 + gap) / gap, GainKind::IO, 1, 0, GainProvenance::LemmaWeak};
  return p;
}

/// IS-(0,1) and IO-(0,1) bounds for a bounded generator.
inline GainPair gain_strong(const DecayEnvelope& env, double beta, double normB, double normC, double normA) {
  detail::check_beta(env, beta);
  const double a = env.amplitude_a, gap = env.alpha - beta;
  const double h = std::max(a * normB / gap, a * normB * normA / gap + normB);
  GainPair p;
  p.h = {beta, h, GainKind::IS, 0, 1, GainProvenance::LemmaStrong};
  p.g = {beta, std::max(a * normB * normC / gap, a * normB * normA * normC / gap + normB * normC), GainKind::IO, 0, 1,
         GainProvenance::LemmaStrong};
  return p;
}

namespace detail {
inline void check_chain(const GainBound& first, const GainBound& second) {
  if (first.beta != second.beta)
    throw Error(ErrorCode::BetaMismatch, "gain bounds at beta " + std::to_string(first.beta) + " and " +
                                             std::to_string(second.beta) + " are not comparable");
  if (first.m < second.n)
    throw Error(ErrorCode::SmoothnessMismatch, "first stage delivers " + std::to_string(first.m) +
                                                   " output derivatives, second stage needs " + std::to_string(second.n));
}
}  // namespace detail

/// IO bound of the cascade s2 o s1: g1 * g2.
inline GainBound compose_serial(const GainBound& g1, const GainBound& g2) {
  if (g1.kind != GainKind::IO || g2.kind != GainKind::IO)
    throw Error(ErrorCode::InvalidArgument, "compose_serial expects two IO bounds");
  detail::check_chain(g1, g2);
  return {g1.beta, g1.value * g2.value, GainKind::IO, g1.n, g2.m, GainProvenance::Composed};
}

/// IS bound of the cascade s2 o s1: h1 + h2 * g1.
inline GainBound compose_is(const GainBound& h1, const GainBound& h2, const GainBound& g1) {
  if (h1.kind != GainKind::IS || h2.kind != GainKind::IS || g1.kind != GainKind::IO)
    throw Error(ErrorCode::InvalidArgument, "compose_is expects (IS, IS, IO) bounds");
  if (h1.beta != h2.beta || h1.beta != g1.beta) throw Error(ErrorCode::BetaMismatch, "compose_is: beta values differ");
  detail::check_chain(g1, h2);
  return {h1.beta, h1.value + h2.value * g1.value, GainKind::IS, h1.n, std::min(h1.m, h2.m), GainProvenance::Composed};
}

/// Lyapunov-certified envelope with alpha = -abscissa * margin_fraction.
inline DecayEnvelope decay_envelope(const CMatrix& a, double margin_fraction = 0.5) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::DimensionMismatch, "decay_envelope: non-square matrix");
  const Envelope e = lyapunov_envelope(a, margin_fraction);
  return {e.amplitude, e.alpha};
}

/// IS-(1,1) and IO-(1,0) bounds of the discarded tail.
inline GainPair tail_gains(const TailModel& tail, double beta) {
  return gain_weak({tail.amplitude_a, tail.decay_alpha}, beta, tail.input_norm, tail.output_graph_norm);
}

inline GainBound tail_gain(const TailModel& tail, double beta) { return tail_gains(tail, beta).g; }

enum class Verdict { Certified, Failed };

inline std::string_view to_string(Verdict v) { return v == Verdict::Certified ? "Certified" : "Failed"; }

struct StabilityCertificate {
  double beta = 0.0;
  GainBound gain_R;
  GainBound gain_tail;
  GainBound is_R;
  GainBound is_tail;
  double product = std::numeric_limits<double>::infinity();
  int truncation_N = 0;
  int n_u = 0;
  int n_r = 0;
  Verdict verdict = Verdict::Failed;
  std::vector<std::string> diagnostics;
};

namespace detail {
inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}
}  // namespace detail

/**
 * Certified iff gain_R * gain_tail < 1 and both IS bounds are finite. Expects the
 * loop controller bounds as IO-(0,1)/IS-(0,1) and the tail as IO-(1,0)/IS-(1,1).
 */
inline StabilityCertificate certify_small_gain(const GainBound& gain_R, const GainBound& is_R, const GainBound& gain_tail,
                                               const GainBound& is_tail, int N) {
  StabilityCertificate c;
  c.beta = gain_R.beta;
  c.gain_R = gain_R;
  c.gain_tail = gain_tail;
  c.is_R = is_R;
  c.is_tail = is_tail;
  c.truncation_N = N;
  auto& d = c.diagnostics;
  bool ok = true;
  if (!(c.beta > 0.0)) {
    d.push_back("beta must be > 0, got " + detail::fmt(c.beta));
    ok = false;
  }
  if (gain_tail.beta != c.beta || is_R.beta != c.beta || is_tail.beta != c.beta) {
    d.push_back("constituent bounds do not share beta");
    ok = false;
  }
  if (gain_R.kind != GainKind::IO || gain_R.n != 0 || gain_R.m != 1 || gain_tail.kind != GainKind::IO ||
      gain_tail.n != 1 || gain_tail.m != 0 || is_R.kind != GainKind::IS || is_tail.kind != GainKind::IS) {
    d.push_back("gain kinds must be IO-(0,1) for the controller loop and IO-(1,0) for the tail");
    ok = false;
  }
  if (!std::isfinite(is_R.value) || !std::isfinite(is_tail.value)) {
    d.push_back("input-to-state bound is not finite");
    ok = false;
  }
  c.product = (gain_tail.value == 0.0 && std::isfinite(gain_R.value)) ? 0.0 : gain_R.value * gain_tail.value;
  d.push_back("beta=" + detail::fmt(c.beta) + " gain_R=" + detail::fmt(gain_R.value) + " gain_tail=" +
              detail::fmt(gain_tail.value) + " product=" + detail::fmt(c.product) + " is_R=" + detail::fmt(is_R.value) +
              " is_tail=" + detail::fmt(is_tail.value) + " N=" + std::to_string(N));
  if (!(c.product < 1.0)) {
    d.push_back("gain product >= 1; increase the truncation order N (smaller tail gain) or N_max");
    ok = false;
  }
  c.verdict = ok ? Verdict::Certified : Verdict::Failed;
  return c;
}

}  // namespace modalstab
