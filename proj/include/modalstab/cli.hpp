#pragma once

// Commands behind the modalstab executable. Each returns the process exit code:
// 0 ok, 1 other error, 2 schema error, 3 infinite unstable part,
// 4 no certificate, 5 synthesis failure, 6 plant/controller dimension mismatch.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "modalstab/gains.hpp"
#include "modalstab/io.hpp"
#include "modalstab/modal_core.hpp"
#include "modalstab/plants.hpp"
#include "modalstab/sim_oracle.hpp"
#include "modalstab/synthesis.hpp"

namespace modalstab::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kOtherError = 1,
  kSchemaError = 2,
  kInfiniteUnstablePart = 3,
  kCertificateNotFound = 4,
  kSynthesisFailure = 5,
  kDimensionMismatch = 6,
};

struct Context {
  RunConfig config;
  fs::path out_dir = ".";
  std::ostream* log = &std::cout;
};

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline Json eigenvalues_json(const CMatrix& block) {
  Json arr = Json::array();
  const CVector ev = eigenvalues(block);
  for (Eigen::Index i = 0; i < ev.size(); ++i) arr.push_back(complex_to_json(ev(i)));
  return arr;
}

inline Json lift_json(const BoundaryLiftData& d) {
  Json entries = Json::array();
  for (const auto& e : d.constraint_report.entries)
    entries.push_back({{"kind", e.kind}, {"k", e.k}, {"value", e.value}, {"passed", e.passed}});
  return {{"a", d.a},
          {"h_at_0", d.h_at_0},
          {"C_g1", d.c_g1},
          {"kernel_mode", d.kernel_mode},
          {"constraints", entries},
          {"constraints_passed", d.constraint_report.all_passed}};
}

inline Json tail_json(const TailModel& t) {
  return {{"decay_alpha", t.decay_alpha},
          {"input_norm", t.input_norm},
          {"output_graph_norm", t.output_graph_norm},
          {"amplitude_a", t.amplitude_a}};
}

inline std::vector<ModalBlock> canonical_blocks(const ModalSystem& sys) {
  std::vector<ModalBlock> b = sys.blocks;
  sort_canonical(b);
  return b;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// analyze

struct Analysis {
  BuiltPlant plant;
  std::optional<SpectrumPartition> partition;
  ModeCheckReport modes;
  Json report;
};

inline Analysis analyze(const RunConfig& cfg) {
  Analysis a;
  a.plant = build_plant(cfg.plant);
  const ModalSystem& sys = a.plant.system;
  Json& r = a.report;
  r["plant"] = plant_to_json(cfg.plant);
  if (a.plant.lift) r["lift"] = detail::lift_json(*a.plant.lift);
  r["tail"] = detail::tail_json(sys.tail);
  try {
    a.partition = partition_spectrum(sys);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InfiniteUnstablePart) throw;
    r["verdict"] = {{"finite_unstable_part", false},
                    {"stabilizable", nullptr},
                    {"detectable", nullptr},
                    {"stabilizable_by_finite_controller", false}};
    r["diagnostics"] = Json::array({e.what()});
    return a;
  }
  a.modes = check_modes(sys, cfg.rank_tol);
  const auto blocks = detail::canonical_blocks(sys);
  Json modes = Json::array();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const ModalBlock& b = blocks[i];
    const BlockModeCheck& mc = a.modes.blocks[i];
    Json m;
    m["label"] = b.label;
    if (b.label >= 0) {
      const double k = b.label + a.plant.basis_shift;
      m["k"] = k;
      if (!a.plant.lift) {
        const double coeff = b.input(b.dim() - 1, 0).real();
        m["coefficient"] = coeff;
        m["inner_product"] = coeff * cosine_norm_sq(k);
      } else {
        m["input"] = b.input(0, 0).real();
      }
    }
    m["eigenvalues"] = detail::eigenvalues_json(b.block);
    m["unstable"] = mc.unstable;
    if (mc.unstable) {
      m["stabilizable"] = mc.stabilizable;
      m["detectable"] = mc.detectable;
    }
    modes.push_back(std::move(m));
  }
  r["modes"] = modes;
  r["unstable_modes"] = a.partition->unstable_indices;
  r["margin_omega"] = a.partition->margin_omega;
  r["offending_modes"] = {{"stabilizable", a.modes.offending_stabilizable}, {"detectable", a.modes.offending_detectable}};
  r["verdict"] = {{"finite_unstable_part", true},
                  {"stabilizable", a.modes.stabilizable},
                  {"detectable", a.modes.detectable},
                  {"stabilizable_by_finite_controller", a.modes.stabilizable && a.modes.detectable}};
  return a;
}

inline int cmd_analyze(const Context& ctx) {
  const Analysis a = analyze(ctx.config);
  write_json_atomic(ctx.out_dir / "analysis.json", a.report);
  const Json& v = a.report["verdict"];
  *ctx.log << "analysis: finite_unstable_part=" << v["finite_unstable_part"].dump()
           << " stabilizable=" << v["stabilizable"].dump() << " detectable=" << v["detectable"].dump() << "\n";
  return a.partition ? kOk : kInfiniteUnstablePart;
}

// ---------------------------------------------------------------------------
// synthesize

inline SynthesisOptions synthesis_options(const RunConfig& c) {
  SynthesisOptions o;
  o.margin_fraction = c.margin_fraction;
  o.beta_grid_size = c.beta_grid_size;
  o.rank_tol = c.rank_tol;
  o.max_halvings = c.max_halvings;
  o.N = c.N;
  o.epsilon = c.epsilon;
  return o;
}

inline int cmd_synthesize(const Context& ctx) {
  const Analysis a = analyze(ctx.config);
  if (!a.partition) {
    write_json_atomic(ctx.out_dir / "analysis.json", a.report);
    *ctx.log << "synthesize: plant has infinitely many unstable modes\n";
    return kInfiniteUnstablePart;
  }
  if (!a.modes.stabilizable || !a.modes.detectable) {
    *ctx.log << "synthesize: unstable part is not " << (a.modes.stabilizable ? "detectable" : "stabilizable") << "\n";
    return kSynthesisFailure;
  }
  const SynthesisResult res = synthesize(a.plant.system, synthesis_options(ctx.config));
  Json ctrl = controller_to_json(res.controller, res.truncation.n_blocks, ctx.config.plant);
  write_json_atomic(ctx.out_dir / "controller.json", ctrl);
  Json cert = certificate_to_json(res.certificate);
  Json attempts = Json::array();
  for (const auto& at : res.attempts)
    attempts.push_back({{"epsilon", at.epsilon}, {"N", at.N}, {"product", at.product}, {"verdict", to_string(at.verdict)}});
  cert["attempts"] = attempts;
  cert["gain_R_estimate"] = res.gain_R_estimate;
  write_json_atomic(ctx.out_dir / "certificate.json", cert);
  *ctx.log << "synthesize: N=" << res.certificate.truncation_N << " beta=" << format_g17(res.certificate.beta)
           << " product=" << format_g17(res.certificate.product) << " verdict=" << to_string(res.certificate.verdict) << "\n";
  return res.certificate.verdict == Verdict::Certified ? kOk : kCertificateNotFound;
}

// ---------------------------------------------------------------------------
// certify

inline ControllerDocument load_controller(const Context& ctx) {
  const fs::path path = ctx.config.controller ? fs::path(*ctx.config.controller) : ctx.out_dir / "controller.json";
  return controller_from_json(read_json_file(path));
}

inline void check_controller_dims(const StateSpaceSystem& controller, const ModalSystem& plant) {
  if (controller.input_dim() != plant.output_dim || controller.output_dim() != plant.input_dim)
    throw Error(ErrorCode::DimensionMismatch, "controller is " + std::to_string(controller.output_dim()) + "x" +
                                                  std::to_string(controller.input_dim()) + " (outputs x inputs), plant needs " +
                                                  std::to_string(plant.input_dim) + "x" + std::to_string(plant.output_dim));
}

/// True when the controller equals the observer controller rebuilt from its stored K_u, L_u.
inline bool has_observer_structure(const ControllerDocument& doc, const Truncation& t, const SpectrumPartition& part) {
  if (!doc.n_u || !doc.K_u || !doc.L_u) return false;
  if (doc.system.state_dim() != t.system.state_dim()) return false;
  int n_u = 0;
  try {
    n_u = unstable_state_dim(part, t);
  } catch (const Error&) {
    return false;
  }
  if (n_u != *doc.n_u) return false;
  const ObserverController rebuilt = assemble_observer_controller(t.system, n_u, *doc.K_u, *doc.L_u);
  auto close = [](const CMatrix& x, const CMatrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && (x - y).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + y.cwiseAbs().maxCoeff());
  };
  auto close_or_empty = [&](const CMatrix& x, const CMatrix& y) { return x.size() == 0 ? x.rows() == y.rows() && x.cols() == y.cols() : close(x, y); };
  return close_or_empty(doc.system.A, rebuilt.E) && close_or_empty(doc.system.B, rebuilt.F) &&
         close_or_empty(doc.system.C, rebuilt.G);
}

inline int cmd_certify(const Context& ctx) {
  const BuiltPlant plant = build_plant(ctx.config.plant);
  const SpectrumPartition part = partition_spectrum(plant.system);
  const ControllerDocument doc = load_controller(ctx);
  check_controller_dims(doc.system, plant.system);
  const std::optional<int> N = ctx.config.N ? ctx.config.N : doc.N;
  if (!N) throw SchemaError("certify: truncation order N missing from both config and controller file");
  if (*N > static_cast<int>(plant.system.blocks.size()))
    throw Error(ErrorCode::DimensionMismatch, "controller truncation order exceeds the resolved plant modes");
  const Truncation t = truncate(plant.system, *N);
  CertifyOptions opt{ctx.config.margin_fraction, ctx.config.beta_grid_size, ctx.config.beta};
  StabilityCertificate cert;
  std::string route;
  if (has_observer_structure(doc, t, part)) {
    ObserverController c;
    c.E = doc.system.A;
    c.F = doc.system.B;
    c.G = doc.system.C;
    c.K_u = *doc.K_u;
    c.L_u = *doc.L_u;
    c.n_u = *doc.n_u;
    c.n_r = static_cast<int>(t.system.state_dim()) - c.n_u;
    try {
      cert = certify_observer_controller(t, c, opt);
      route = "observer";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotHurwitz) throw;
      cert = certify_general_controller(t, doc.system, opt);
      route = "general";
    }
  } else {
    cert = certify_general_controller(t, doc.system, opt);
    route = "general";
  }
  Json j = certificate_to_json(cert);
  j["route"] = route;
  write_json_atomic(ctx.out_dir / "certificate.json", j);
  *ctx.log << "certify: route=" << route << " beta=" << format_g17(cert.beta) << " product=" << format_g17(cert.product)
           << " verdict=" << to_string(cert.verdict) << "\n";
  return cert.verdict == Verdict::Certified ? kOk : kCertificateNotFound;
}

// ---------------------------------------------------------------------------
// simulate

inline CVector initial_state(const Json& spec, Eigen::Index n) {
  CVector x = CVector::Zero(n);
  if (spec.is_string() && spec == "first_basis") {
    if (n > 0) x(0) = 1.0;
  } else if (spec.is_string() && spec == "ones") {
    x.setOnes();
  } else {
    if (static_cast<Eigen::Index>(spec.size()) != n)
      throw Error(ErrorCode::DimensionMismatch, "x0 has " + std::to_string(spec.size()) + " entries, plant state has " + std::to_string(n));
    for (Eigen::Index i = 0; i < n; ++i) x(i) = spec[static_cast<std::size_t>(i)].get<double>();
  }
  return x;
}

inline int cmd_simulate(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  const BuiltPlant plant = build_plant(cfg.plant);
  partition_spectrum(plant.system);
  const ControllerDocument doc = load_controller(ctx);
  check_controller_dims(doc.system, plant.system);
  const Truncation full = truncate(plant.system, static_cast<int>(plant.system.blocks.size()));
  const CVector x0 = initial_state(cfg.x0, full.system.state_dim());
  const CVector w0 = CVector::Zero(doc.system.state_dim());
  const Trajectory tr = simulate_closed_loop(full.system, doc.system, x0, w0, cfg.horizon, cfg.dt);
  const AbscissaResult abscissa = spectral_abscissa(closed_loop_direct(full.system, doc.system));

  std::ostringstream csv;
  write_trajectory_csv(csv, tr);
  write_file_atomic(ctx.out_dir / "trajectory.csv", csv.str());

  Json s;
  double rate = std::numeric_limits<double>::quiet_NaN();
  try {
    rate = estimate_decay_rate(tr, cfg.skip_fraction);
    s["decay_rate"] = rate;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateTrajectory) throw;
    s["decay_rate"] = nullptr;
    s["diagnostics"] = Json::array({e.what()});
  }
  s["closed_loop_spectral_abscissa"] = abscissa.value;
  s["abscissa_witness"] = complex_to_json(abscissa.witness);
  s["rate_vs_abscissa_relative_difference"] =
      std::isfinite(rate) && abscissa.value != 0.0 ? Json(std::abs(rate + abscissa.value) / std::abs(abscissa.value)) : Json(nullptr);
  const fs::path cert_path = ctx.out_dir / "certificate.json";
  s["certificate_beta"] = nullptr;
  if (fs::exists(cert_path)) {
    const Json cert = read_json_file(cert_path);
    if (cert.contains("beta")) s["certificate_beta"] = cert["beta"];
  }
  s["plant_state_dim"] = full.system.state_dim();
  s["controller_state_dim"] = doc.system.state_dim();
  s["horizon"] = cfg.horizon;
  s["dt"] = cfg.dt;
  s["skip_fraction"] = cfg.skip_fraction;
  s["final_state_norm"] = tr.states.back().norm();
  write_json_atomic(ctx.out_dir / "simulation.json", s);
  *ctx.log << "simulate: abscissa=" << format_g17(abscissa.value) << " decay_rate=" << format_g17(rate) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  int N = 0;
  double tail_gain = 0.0;
  double gain_R = 0.0;
  double product = 0.0;
  Verdict verdict = Verdict::Failed;
};

/// Certifies every N in the list at one common beta (the smallest grid point of the
/// most restrictive decay rate), so the columns are comparable across N.
inline std::vector<SweepRow> sweep(const ModalSystem& sys, const std::vector<int>& N_list, const RunConfig& cfg,
                                   double* common_beta = nullptr) {
  if (N_list.empty()) throw SchemaError("sweep: N_list must be a nonempty array");
  const SpectrumPartition part = partition_spectrum(sys);
  const ModeCheckReport modes = check_modes(sys, cfg.rank_tol);
  if (!modes.stabilizable) throw Error(ErrorCode::NotStabilizable, "unstable part is not stabilizable");
  if (!modes.detectable) throw Error(ErrorCode::NotDetectable, "unstable part is not detectable");
  const int total = static_cast<int>(sys.blocks.size());
  const int n_unstable = static_cast<int>(part.unstable_indices.size());
  struct Item {
    Truncation t;
    LoopSystems loop;
    LoopEnvelopes env;
  };
  std::vector<Item> items;
  double amin = std::numeric_limits<double>::infinity();
  for (int N : N_list) {
    if (N < n_unstable || N > total)
      throw SchemaError("sweep: N = " + std::to_string(N) + " outside [" + std::to_string(n_unstable) + ", " +
                        std::to_string(total) + "]");
    Truncation t = truncate(sys, N);
    const ObserverController c = synthesize_controller(part, t, cfg.rank_tol);
    LoopSystems loop = observer_loop(t, c);
    const LoopEnvelopes env = loop_envelopes(loop, cfg.margin_fraction);
    amin = std::min(amin, alpha_min(env, t.tail));
    items.push_back({std::move(t), std::move(loop), env});
  }
  const double beta = cfg.beta ? *cfg.beta : std::ldexp(amin, -cfg.beta_grid_size);
  if (common_beta) *common_beta = beta;
  std::vector<SweepRow> rows;
  for (const auto& it : items) {
    const StabilityCertificate cert = certify_at(it.loop, it.env, it.t.tail, beta, it.t.n_blocks);
    rows.push_back({it.t.n_blocks, cert.gain_tail.value, cert.gain_R.value, cert.product, cert.verdict});
  }
  return rows;
}

inline int cmd_sweep(const Context& ctx) {
  if (!ctx.config.has_N_list || ctx.config.N_list.empty()) throw SchemaError("sweep: N_list must be a nonempty array");
  const BuiltPlant plant = build_plant(ctx.config.plant);
  double beta = 0.0;
  const std::vector<SweepRow> rows = sweep(plant.system, ctx.config.N_list, ctx.config, &beta);
  std::ostringstream csv;
  csv << "N,tail_gain,gain_R,product,verdict\n";
  for (const auto& r : rows)
    csv << r.N << ',' << format_g17(r.tail_gain) << ',' << format_g17(r.gain_R) << ',' << format_g17(r.product) << ','
        << to_string(r.verdict) << '\n';
  write_file_atomic(ctx.out_dir / "sweep.csv", csv.str());
  int threshold = -1;
  for (const auto& r : rows)
    if (r.verdict == Verdict::Certified) {
      threshold = r.N;
      break;
    }
  *ctx.log << "sweep: beta=" << format_g17(beta) << " rows=" << rows.size() << " first_certified_N=" << threshold << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// dispatch

/// Runs one command, mapping failures onto the exit-code contract.
inline int run(const std::string& command, const Context& ctx, std::ostream& err = std::cerr) {
  try {
    fs::create_directories(ctx.out_dir);
    if (command == "analyze") return cmd_analyze(ctx);
    if (command == "synthesize") return cmd_synthesize(ctx);
    if (command == "certify") return cmd_certify(ctx);
    if (command == "simulate") return cmd_simulate(ctx);
    if (command == "sweep") return cmd_sweep(ctx);
    err << "unknown command '" << command << "'\n";
    return kSchemaError;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kSchemaError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::InfiniteUnstablePart: return kInfiniteUnstablePart;
      case ErrorCode::NotStabilizable:
      case ErrorCode::NotDetectable:
      case ErrorCode::RiccatiDivergence: return kSynthesisFailure;
      case ErrorCode::DimensionMismatch:
        return (command == "simulate" || command == "certify") ? kDimensionMismatch : kOtherError;
      default: return kOtherError;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kOtherError;
  }
}

}  // namespace modalstab::cli
