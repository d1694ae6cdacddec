// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "modalstab/cli.hpp"
#include "modalstab/expm.hpp"
#include "test_util.hpp"

using namespace modalstab;
using namespace modalstab::test;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("modalstab_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

cli::Context context(const Json& config, const fs::path& out) {
  cli::Context ctx;
  ctx.config = config_from_json(config);
  ctx.out_dir = out;
  static std::ostringstream sink;
  ctx.log = &sink;
  return ctx;
}

double simpson(const std::function<double(double)>& f, double lo, double hi, int n = 20000) {
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

Json inverse_square_config(double b) {
  Json values = Json::array();
  for (int k = 0; k < 1000; ++k) values.push_back(1.0 / ((k + 1.0) * (k + 1.0)));
  return {{"plant", {{"type", "heat"}, {"b", b}, {"f", {{"kind", "coefficients"}, {"values", values}}}, {"N_max", 64}}}};
}

// 1: stabilizability verdict against the closed-form inner-product criterion
Outcome heat_verdicts() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Profile {
    Json json;
    std::function<double(int)> inner;  // <cos(pi k xi), f>
  };
  const std::vector<Profile> profiles = {
      {1.0, [](int k) { return k == 0 ? 1.0 : 0.0; }},
      {{{"kind", "cosine"}, {"k", 1}, {"value", 1.0}}, [](int k) { return k == 1 ? 0.5 : 0.0; }},
      {{{"kind", "indicator"}, {"lo", 0.0}, {"hi", 0.5}, {"value", 1.0}},
       [](int k) { return k == 0 ? 0.5 : std::sin(kPi * k / 2.0) / (kPi * k); }},
  };
  Outcome o;
  int cases = 0, matches = 0;
  const fs::path dir = scratch("verdicts");
  for (double b : {-1.0, 5.0, 15.0, 42.0}) {
    for (const auto& p : profiles) {
      bool expected = true;
      for (int k = 0; kPi * kPi * k * k <= b; ++k) expected = expected && std::abs(p.inner(k)) > 1e-12;
      const Json cfg = {{"plant", {{"type", "heat"}, {"b", b}, {"f", p.json}}}};
      const int rc = cli::cmd_analyze(context(cfg, dir));
      const Json a = read_json_file(dir / "analysis.json");
      ++cases;
      matches += rc == 0 && a["verdict"]["stabilizable"].get<bool>() == expected;
    }
  }
  const double dt = seconds_since(t0);
  o.pass = cases == 12 && matches == 12 && dt < 1.0;
  o.detail = std::to_string(matches) + "/" + std::to_string(cases) + " verdicts match, " + std::to_string(dt) + " s";
  fs::remove_all(dir);
  return o;
}

// 2: wave spectrum and the damping threshold
Outcome wave_spectrum() {
  double worst = 0.0;
  for (double kappa : {0.1, 1.0, 3.0}) {
    const ModalSystem sys = build_wave(5.0, kappa, SourceProfile::constant(1.0), 63);
    for (const auto& blk : sys.blocks) {
      const double k = blk.label + 0.5;
      const Complex disc = std::sqrt(Complex(kappa * kappa - 4.0 * kPi * kPi * k * k + 4.0 * 5.0));
      const Complex r1 = (-kappa + disc) / 2.0, r2 = (-kappa - disc) / 2.0;
      const CVector ev = eigenvalues(blk.block);
      worst = std::max(worst, std::min(std::max(std::abs(ev(0) - r1), std::abs(ev(1) - r2)),
                                       std::max(std::abs(ev(0) - r2), std::abs(ev(1) - r1))));
    }
  }
  bool flip = true;
  for (double kappa : {-0.1, 0.0, 0.1}) {
    bool finite = true;
    try {
      partition_spectrum(build_wave(5.0, kappa, SourceProfile::constant(1.0), 64));
    } catch (const Error& e) {
      finite = e.code() != ErrorCode::InfiniteUnstablePart;
    }
    flip = flip && finite == (kappa > 0.0);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "max eigenvalue error %.3g, finite unstable part iff kappa > 0: %s", worst, flip ? "yes" : "no");
  return {worst <= 1e-12 && flip, buf};
}

// 3: lift search and the mode constraint expression against quadrature
Outcome boundary_lift() {
  const std::vector<std::pair<double, SourceProfile>> cases = {
      {5.0, SourceProfile::constant(1.0)}, {-1.0, SourceProfile::constant(0.0)}, {kPi * kPi, SourceProfile::constant(1.0)}};
  bool found = true;
  double worst = 0.0;
  int compared = 0;
  for (const auto& [b, f] : cases) {
    LiftSearchResult r;
    try {
      r = search_lift_parameter(b, f, default_lift_grid(b));
    } catch (const Error&) {
      found = false;
      continue;
    }
    const BoundaryPlant p = build_heat_boundary(b, f, r.a, 64);
    const double s = std::sqrt(r.a - b);
    const double fval = f.value;
    for (const auto& e : p.lift.constraint_report.entries) {
      if (e.kind != "mode") continue;
      const int k = e.k;
      const double norm = k == 0 ? 1.0 : 0.5;
      const double lam = b - kPi * kPi * k * k;
      const double hk = simpson([&](double x) { return std::cosh(s * x) / (s * std::sinh(s)) * std::cos(kPi * k * x); }, 0.0, 1.0) / norm;
      const double fk = simpson([&](double x) { return fval * std::cos(kPi * k * x); }, 0.0, 1.0) / norm;
      worst = std::max(worst, std::abs(e.value - ((lam - r.a) / lam * hk - fk / lam)));
      ++compared;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "admissible a found: %s, %d mode constraints, max deviation %.3g", found ? "yes" : "no", compared, worst);
  return {found && compared == 2 && worst <= 1e-10, buf};
}

// 4: synthesize and simulate heat b = 5, f = 1
Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = scratch("end_to_end");
  const Json cfg = {{"plant", {{"type", "heat"}, {"b", 5.0}, {"f", 1.0}, {"N_max", 64}}}};
  const int rc_syn = cli::cmd_synthesize(context(cfg, dir));
  const int rc_sim = rc_syn == 0 ? cli::cmd_simulate(context(cfg, dir)) : -1;
  const double dt = seconds_since(t0);
  if (rc_syn != 0 || rc_sim != 0) return {false, "synthesize exit " + std::to_string(rc_syn) + ", simulate exit " + std::to_string(rc_sim)};
  const Json cert = read_json_file(dir / "certificate.json");
  const Json sim = read_json_file(dir / "simulation.json");
  const double product = cert["product"].get<double>(), beta = cert["beta"].get<double>();
  const double abscissa = sim["closed_loop_spectral_abscissa"].get<double>();
  const double rate = sim["decay_rate"].is_number() ? sim["decay_rate"].get<double>() : NAN;
  const double rel = std::abs(rate + abscissa) / std::abs(abscissa);
  char buf[200];
  std::snprintf(buf, sizeof buf, "product %.3g at beta %.3g, abscissa %.4f, decay rate %.4f (rel diff %.3g), %.2f s", product, beta,
                abscissa, rate, rel, dt);
  fs::remove_all(dir);
  return {cert["verdict"] == "Certified" && product < 1.0 && beta > 0.0 && abscissa < -1e-3 && rel <= 0.1 && dt < 10.0, buf};
}

// 5: shifted closed-loop generator against the direct block form
Outcome similarity() {
  std::mt19937 rng(20240501);
  double worst = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 6, q = 1 + (trial / 6) % 4, m = 1 + trial % 2, p = 1 + (trial / 2) % 2;
    const StateSpaceSystem plant = StateSpaceSystem::make(random_matrix(rng, n, n), random_matrix(rng, n, m), random_matrix(rng, p, n));
    const StateSpaceSystem ctrl = StateSpaceSystem::make(random_matrix(rng, q, q), random_matrix(rng, q, p), random_matrix(rng, m, q));
    const CMatrix direct = closed_loop_direct(plant, ctrl);
    const double scale = std::max(1.0, norm2(direct));
    const Complex l1(1.0 + norm2(plant.A)), l2(-2.0 - norm2(plant.A), 0.5);
    const CMatrix m1 = close_loop(plant, ctrl, l1), m2 = close_loop(plant, ctrl, l2);
    worst = std::max(worst, spectrum_distance(m1, direct) / scale);
    worst_shift = std::max(worst_shift, spectrum_distance(m1, m2) / scale);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "50 instances, max spectrum mismatch %.3g, between shifts %.3g (relative)", worst, worst_shift);
  return {worst <= 1e-8 && worst_shift <= 1e-8, buf};
}

// 6: certified bounds against brute-force lower bounds and sampled exponentials
Outcome gain_soundness() {
  std::mt19937 rng(77);
  int gain_violations = 0, envelope_violations = 0;
  double closest = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 8;
    const CMatrix a = random_hurwitz(rng, n, 0.1 + 0.05 * (trial % 4));
    const StateSpaceSystem s = StateSpaceSystem::make(a, random_matrix(rng, n, 1 + trial % 2), random_matrix(rng, 1 + trial % 3, n));
    const DecayEnvelope env = decay_envelope(a);
    const double beta = 0.5 * env.alpha;
    const double bound = gain_strong(env, beta, norm2(s.B), norm2(s.C), norm2(s.A)).g.value;
    const double empirical = brute_force_gain(s, beta, 20.0, 200);
    gain_violations += empirical > bound;
    closest = std::max(closest, empirical / bound);
    const CMatrix step = matrix_exponential(a, 0.1);
    CMatrix e = CMatrix::Identity(n, n);
    for (int i = 0; i <= 200; ++i) {
      envelope_violations += norm2(e) > env.amplitude_a * std::exp(-env.alpha * 0.1 * i) * (1.0 + 1e-8);
      e = step * e;
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "50 systems, gain violations %d (max empirical/bound %.3g), envelope violations %d", gain_violations,
                closest, envelope_violations);
  return {gain_violations == 0 && envelope_violations == 0, buf};
}

// 7: sweep over N for the inverse-square source
Outcome sweep_monotone() {
  const Json cfg_json = inverse_square_config(5.0);
  const RunConfig cfg = config_from_json(cfg_json);
  const BuiltPlant plant = build_plant(cfg.plant);
  std::vector<int> ns;
  for (int n = 1; n <= 65; ++n) ns.push_back(n);
  const auto rows = cli::sweep(plant.system, ns, cfg);
  bool decreasing = true, persistent = true, seen = false;
  int threshold = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) decreasing = decreasing && rows[i].tail_gain < rows[i - 1].tail_gain;
    const bool c = rows[i].verdict == Verdict::Certified;
    if (seen && !c) persistent = false;
    if (c && !seen) threshold = rows[i].N;
    seen = seen || c;
  }
  return {decreasing && persistent && seen,
          "tail gain strictly decreasing: " + std::string(decreasing ? "yes" : "no") + ", first Certified N = " +
              std::to_string(threshold) + ", stays Certified: " + (persistent ? "yes" : "no")};
}

// 8: reduced loop bound independent of the retained stable dimension
Outcome r_gain_independence() {
  const RunConfig cfg = config_from_json(inverse_square_config(5.0));
  const ModalSystem sys = build_plant(cfg.plant).system;
  const SpectrumPartition part = partition_spectrum(sys);
  const ObserverController c0 = synthesize_controller(part, truncate(sys, 1));
  std::vector<double> values;
  for (int n_r : {0, 2, 8}) {
    const Truncation t = truncate(sys, 1 + n_r);
    const ObserverController c = assemble_observer_controller(t.system, c0.n_u, c0.K_u, c0.L_u);
    const StateSpaceSystem r = observer_loop(t, c).io_system;
    const DecayEnvelope env = decay_envelope(r.A);
    values.push_back(loop_io_gains(r, env, 0.25 * env.alpha).g.value);
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "IO bound for n_r = 0, 2, 8: %.17g, %.17g, %.17g", values[0], values[1], values[2]);
  return {values[0] == values[1] && values[0] == values[2], buf};
}

// 9: block-wise against dense simulation
Outcome oracle_equivalence() {
  const ModalSystem sys = build_heat(5.0, SourceProfile::indicator(0.0, 0.5), 64);
  const int N = 16;
  const Truncation t = truncate(sys, N);
  CVector x0(N);
  for (int i = 0; i < N; ++i) x0(i) = std::cos(0.7 * i) / (1.0 + i);
  const CVector u = CVector::Constant(1, Complex(-0.4));
  const Trajectory dense = simulate_open_loop(t.system, x0, u, 10.0, 0.01);
  const Trajectory modal = simulate_modal(sys, N, x0, u, 10.0, 0.01);
  double worst = 0.0;
  for (std::size_t i = 0; i < dense.states.size(); ++i)
    worst = std::max(worst, (dense.states[i] - modal.states[i]).norm() / dense.states[i].norm());
  char buf[120];
  std::snprintf(buf, sizeof buf, "%zu samples over 10 time units, max relative difference %.3g", dense.states.size(), worst);
  return {dense.states.size() == modal.states.size() && worst <= 1e-10, buf};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"heat stabilizability verdicts", heat_verdicts},
      {"wave spectrum and damping threshold", wave_spectrum},
      {"boundary lift search and constraints", boundary_lift},
      {"end-to-end heat stabilization", end_to_end},
      {"closed-loop similarity", similarity},
      {"gain bound soundness", gain_soundness},
      {"quasi-finite sweep", sweep_monotone},
      {"reduced loop gain independence", r_gain_independence},
      {"modal vs dense simulation", oracle_equivalence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu: %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.c_str());
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
