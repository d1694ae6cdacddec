#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "modalstab/expm.hpp"
#include "modalstab/gains.hpp"
#include "modalstab/plants.hpp"
#include "modalstab/sim_oracle.hpp"
#include "test_util.hpp"

using namespace modalstab;
using namespace modalstab::test;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Overflow;
}

GainBound io01(double v, double beta) { return {beta, v, GainKind::IO, 0, 1, GainProvenance::LemmaStrong}; }
GainBound io10(double v, double beta) { return {beta, v, GainKind::IO, 1, 0, GainProvenance::LemmaWeak}; }
GainBound is(double v, double beta, int n = 0, int m = 1) { return {beta, v, GainKind::IS, n, m, GainProvenance::LemmaStrong}; }

}  // namespace

TEST(GainWeak, UnitExample) {
  const GainPair p = gain_weak({1.0, 1.0}, 0.0, 1.0, 1.0);
  EXPECT_EQ(p.h.value, 2.0);
  EXPECT_EQ(p.g.value, 2.0);
  EXPECT_EQ(p.h.kind, GainKind::IS);
  EXPECT_EQ(p.h.n, 1);
  EXPECT_EQ(p.h.m, 1);
  EXPECT_EQ(p.g.kind, GainKind::IO);
  EXPECT_EQ(p.g.n, 1);
  EXPECT_EQ(p.g.m, 0);
}

TEST(GainWeak, ZeroInputGivesZero) {
  const GainPair p = gain_weak({3.0, 2.0}, 0.5, 0.0, 4.0);
  EXPECT_EQ(p.h.value, 0.0);
  EXPECT_EQ(p.g.value, 0.0);
}

TEST(GainWeak, DivergesAsBetaApproachesAlpha) {
  double prev = 0.0;
  for (double gap : {0.5, 0.1, 1e-2, 1e-4, 1e-8}) {
    const double g = gain_weak({1.0, 1.0}, 1.0 - gap, 1.0, 1.0).g.value;
    EXPECT_GT(g, prev);
    prev = g;
  }
  EXPECT_GT(prev, 1e7);
  EXPECT_EQ(code_of([] { gain_weak({1.0, 1.0}, 1.0, 1.0, 1.0); }), ErrorCode::BetaExceedsDecay);
}

TEST(GainStrong, UnitExample) {
  const GainPair p = gain_strong({1.0, 2.0}, 0.0, 1.0, 1.0, 2.0);
  EXPECT_EQ(p.h.value, 2.0);
  EXPECT_EQ(p.g.value, 2.0);
  EXPECT_EQ(p.g.n, 0);
  EXPECT_EQ(p.g.m, 1);
}

TEST(GainStrong, DegenerateNorms) {
  EXPECT_EQ(gain_strong({2.0, 3.0}, 1.0, 1.5, 0.0, 4.0).g.value, 0.0);
  const double a = 2.0, alpha = 3.0, beta = 1.0, nb = 1.5;
  EXPECT_EQ(gain_strong({a, alpha}, beta, nb, 1.0, 0.0).h.value, std::max(a * nb / (alpha - beta), nb));
}

TEST(GainBounds, NonDecreasingInBeta) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const DecayEnvelope env{1.0 + u(rng), u(rng)};
    const double nb = u(rng), nc = u(rng), na = u(rng);
    GainPair pw = gain_weak(env, 0.0, nb, nc), ps = gain_strong(env, 0.0, nb, nc, na);
    for (int i = 1; i < 40; ++i) {
      const double beta = env.alpha * i / 40.0;
      const GainPair w = gain_weak(env, beta, nb, nc), s = gain_strong(env, beta, nb, nc, na);
      EXPECT_GE(w.h.value, pw.h.value);
      EXPECT_GE(w.g.value, pw.g.value);
      EXPECT_GE(s.h.value, ps.h.value);
      EXPECT_GE(s.g.value, ps.g.value);
      pw = w;
      ps = s;
    }
  }
}

TEST(Compose, SerialAndInputToState) {
  EXPECT_DOUBLE_EQ(compose_serial(io01(0.3, 0.1), {0.1, 2.0, GainKind::IO, 1, 0, GainProvenance::LemmaWeak}).value, 0.6);
  EXPECT_DOUBLE_EQ(compose_is(is(1.0, 0.1), is(2.0, 0.1), io01(0.5, 0.1)).value, 2.0);
  EXPECT_EQ(code_of([] { compose_serial(io01(0.3, 0.1), io01(2.0, 0.2)); }), ErrorCode::BetaMismatch);
  EXPECT_EQ(code_of([] { compose_serial(io10(0.3, 0.1), {0.1, 2.0, GainKind::IO, 1, 0, GainProvenance::LemmaWeak}); }),
            ErrorCode::SmoothnessMismatch);
}

TEST(DecayEnvelope, NegativeIdentity) {
  const DecayEnvelope e = decay_envelope(-CMatrix::Identity(2, 2), 0.5);
  EXPECT_NEAR(e.alpha, 0.5, 1e-15);
  EXPECT_NEAR(e.amplitude_a, 1.0, 1e-12);
}

TEST(DecayEnvelope, DiagonalAmplitudeIsRootConditionNumber) {
  // (A + I/2)^T P + P (A + I/2) = -I gives P = diag(1, 1/3), so a = sqrt(cond P) = sqrt(3)
  const DecayEnvelope e = decay_envelope(mat({{-1.0, 0.0}, {0.0, -2.0}}), 0.5);
  EXPECT_NEAR(e.alpha, 0.5, 1e-15);
  EXPECT_NEAR(e.amplitude_a, std::sqrt(3.0), 1e-12);
}

TEST(DecayEnvelope, MarginalMatrixIsRejected) {
  EXPECT_EQ(code_of([] { decay_envelope(mat({{0.0, 1.0}, {0.0, -1.0}}), 0.5); }), ErrorCode::NotHurwitz);
}

TEST(DecayEnvelope, DominatesSampledExponential) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 8;
    const CMatrix a = random_hurwitz(rng, n, 0.05 + 0.02 * (trial % 5));
    const DecayEnvelope e = decay_envelope(a);
    const CMatrix step = matrix_exponential(a, 0.1);
    CMatrix m = CMatrix::Identity(n, n);
    for (int i = 0; i <= 200; ++i) {
      const double t = 0.1 * i;
      EXPECT_LE(norm2(m), e.amplitude_a * std::exp(-e.alpha * t) * (1.0 + 1e-8)) << trial << " t=" << t;
      m = step * m;
    }
  }
}

TEST(TailGain, ZeroInputNorm) {
  EXPECT_EQ(tail_gain({2.0, 0.0, 5.0, 1.0}, 0.5).value, 0.0);
}

TEST(TailGain, DecreasesWithTruncationOrder) {
  std::vector<double> c;
  for (int k = 0; k < 500; ++k) c.push_back(1.0 / ((k + 1.0) * (k + 1.0)));
  const ModalSystem sys = build_heat(0.0, SourceProfile::from_coefficients(c), 64);
  const double g4 = tail_gain(truncate(sys, 4).tail, 0.1).value;
  const double g8 = tail_gain(truncate(sys, 8).tail, 0.1).value;
  EXPECT_TRUE(std::isfinite(g4));
  EXPECT_GT(g4, 0.0);
  EXPECT_LT(g8, g4);
  double prev = std::numeric_limits<double>::infinity();
  for (int N = 1; N <= 65; ++N) {
    const double g = tail_gain(truncate(sys, N).tail, 0.1).value;
    EXPECT_LT(g, prev) << N;
    prev = g;
  }
}

TEST(TailGain, BetaAboveDecayThrows) {
  EXPECT_EQ(code_of([] { tail_gain({0.05, 1.0, 1.0, 1.0}, 0.1); }), ErrorCode::BetaExceedsDecay);
}

TEST(SmallGain, Verdicts) {
  const double b = 0.2;
  const StabilityCertificate ok = certify_small_gain(io01(0.5, b), is(1.0, b), io10(1.9, b), is(1.0, b, 1, 1), 3);
  EXPECT_EQ(ok.verdict, Verdict::Certified);
  EXPECT_DOUBLE_EQ(ok.product, 0.95);
  EXPECT_EQ(ok.truncation_N, 3);

  const StabilityCertificate bad = certify_small_gain(io01(0.5, b), is(1.0, b), io10(2.1, b), is(1.0, b, 1, 1), 3);
  EXPECT_EQ(bad.verdict, Verdict::Failed);
  bool suggests_n = false;
  for (const auto& d : bad.diagnostics) suggests_n = suggests_n || d.find("increase the truncation order N") != std::string::npos;
  EXPECT_TRUE(suggests_n);

  const StabilityCertificate zero = certify_small_gain(io01(1e30, b), is(1.0, b), io10(0.0, b), is(0.0, b, 1, 1), 1);
  EXPECT_EQ(zero.verdict, Verdict::Certified);
  EXPECT_EQ(zero.product, 0.0);
}

TEST(SmallGain, RejectsInconsistentInputs) {
  const double b = 0.2;
  EXPECT_EQ(certify_small_gain(io01(0.5, b), is(1.0, b), io10(1.0, 0.3), is(1.0, b, 1, 1), 1).verdict, Verdict::Failed);
  EXPECT_EQ(certify_small_gain(io10(0.5, b), is(1.0, b), io10(1.0, b), is(1.0, b, 1, 1), 1).verdict, Verdict::Failed);
  EXPECT_EQ(certify_small_gain(io01(0.5, b), is(INFINITY, b), io10(1.0, b), is(1.0, b, 1, 1), 1).verdict, Verdict::Failed);
  EXPECT_EQ(certify_small_gain(io01(0.5, 0.0), is(1.0, 0.0), io10(1.0, 0.0), is(1.0, 0.0, 1, 1), 1).verdict, Verdict::Failed);
}

TEST(SmallGain, Deterministic) {
  const double b = 0.123;
  const auto c1 = certify_small_gain(io01(0.7, b), is(3.0, b), io10(1.3, b), is(2.0, b, 1, 1), 5);
  const auto c2 = certify_small_gain(io01(0.7, b), is(3.0, b), io10(1.3, b), is(2.0, b, 1, 1), 5);
  EXPECT_EQ(c1.product, c2.product);
  EXPECT_EQ(c1.verdict, c2.verdict);
  EXPECT_EQ(c1.diagnostics, c2.diagnostics);
}

TEST(GainStrong, EmpiricalGainNeverExceedsBound) {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 6;
    const CMatrix a = random_hurwitz(rng, n, 0.3);
    const StateSpaceSystem s = StateSpaceSystem::make(a, random_matrix(rng, n, 2), random_matrix(rng, 2, n));
    const DecayEnvelope env = decay_envelope(a);
    const double beta = 0.5 * env.alpha;
    const double bound = gain_strong(env, beta, norm2(s.B), norm2(s.C), norm2(s.A)).g.value;
    EXPECT_LE(brute_force_gain(s, beta, 20.0, 200), bound) << trial;
  }
}
