#pragma once

// JSON documents: run configuration, matrices, controllers and certificates.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "modalstab/gains.hpp"
#include "modalstab/plants.hpp"
#include "modalstab/synthesis.hpp"

namespace modalstab {

using Json = nlohmann::ordered_json;

/// Configuration or document that does not match its schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Matrices

/// Row-major nested arrays; entries are numbers unless some imaginary part exceeds 1e-10.
inline Json matrix_to_json(const CMatrix& m) {
  const bool real = max_imag_abs(m) < 1e-10;
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (real) {
        row.push_back(m(i, j).real());
      } else {
        row.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Complex complex_from_json(const Json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) return {v[0].get<double>(), v[1].get<double>()};
  throw SchemaError(where + ": expected a number or [re, im]");
}

inline CMatrix matrix_from_json(const Json& j, const std::string& where, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of rows");
  if (static_cast<Eigen::Index>(j.size()) != rows)
    throw Error(ErrorCode::DimensionMismatch, where + ": expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array()) throw SchemaError(where + ": row " + std::to_string(i) + " is not an array");
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw Error(ErrorCode::DimensionMismatch,
                  where + ": row " + std::to_string(i) + " has " + std::to_string(row.size()) + " entries, expected " + std::to_string(cols));
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = complex_from_json(row[static_cast<std::size_t>(c)], where);
  }
  return m;
}

inline Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

// ---------------------------------------------------------------------------
// Schema helpers

namespace detail {

inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw SchemaError(where + ": unknown key '" + key + "'");
}

inline double get_number(const Json& obj, const std::string& key, const std::string& where) {
  const Json& v = obj.at(key);
  if (!v.is_number()) throw SchemaError(where + "." + key + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw SchemaError(where + "." + key + ": must be finite");
  return x;
}

inline int get_int(const Json& obj, const std::string& key, const std::string& where) {
  const Json& v = obj.at(key);
  if (!v.is_number_integer()) throw SchemaError(where + "." + key + ": expected an integer");
  return v.get<int>();
}

inline std::vector<double> get_number_list(const Json& obj, const std::string& key, const std::string& where) {
  const Json& v = obj.at(key);
  if (!v.is_array()) throw SchemaError(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw SchemaError(where + "." + key + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Source profiles and plant specs

inline SourceProfile profile_from_json(const Json& j) {
  const std::string where = "plant.f";
  if (j.is_number()) return SourceProfile::constant(j.get<double>());
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw SchemaError(where + ": expected a number or an object with a 'kind'");
  const std::string kind = j["kind"].get<std::string>();
  SourceProfile p;
  if (kind == "constant") {
    detail::reject_unknown(j, {"kind", "value"}, where);
    p = SourceProfile::constant(j.contains("value") ? detail::get_number(j, "value", where) : 1.0);
  } else if (kind == "cosine") {
    detail::reject_unknown(j, {"kind", "k", "value"}, where);
    if (!j.contains("k")) throw SchemaError(where + ": cosine profile needs 'k'");
    p = SourceProfile::cosine(detail::get_number(j, "k", where), j.contains("value") ? detail::get_number(j, "value", where) : 1.0);
  } else if (kind == "indicator") {
    detail::reject_unknown(j, {"kind", "lo", "hi", "value"}, where);
    if (!j.contains("lo") || !j.contains("hi")) throw SchemaError(where + ": indicator profile needs 'lo' and 'hi'");
    p = SourceProfile::indicator(detail::get_number(j, "lo", where), detail::get_number(j, "hi", where),
                                 j.contains("value") ? detail::get_number(j, "value", where) : 1.0);
  } else if (kind == "coefficients") {
    detail::reject_unknown(j, {"kind", "values"}, where);
    if (!j.contains("values")) throw SchemaError(where + ": coefficient profile needs 'values'");
    p = SourceProfile::from_coefficients(detail::get_number_list(j, "values", where));
  } else if (kind == "samples") {
    detail::reject_unknown(j, {"kind", "values", "tolerance"}, where);
    if (!j.contains("values")) throw SchemaError(where + ": sample profile needs 'values'");
    p = SourceProfile::from_samples(detail::get_number_list(j, "values", where));
    if (j.contains("tolerance")) p.sample_tolerance = detail::get_number(j, "tolerance", where);
  } else {
    throw SchemaError(where + ": unknown kind '" + kind + "'");
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return p;
}

inline Json profile_to_json(const SourceProfile& p) {
  using K = SourceProfile::Kind;
  switch (p.kind) {
    case K::Constant: return {{"kind", "constant"}, {"value", p.value}};
    case K::Cosine: return {{"kind", "cosine"}, {"k", p.k0}, {"value", p.value}};
    case K::Indicator: return {{"kind", "indicator"}, {"lo", p.lo}, {"hi", p.hi}, {"value", p.value}};
    case K::Coefficients: return {{"kind", "coefficients"}, {"values", p.coefficients}};
    case K::Samples: return {{"kind", "samples"}, {"values", p.samples}, {"tolerance", p.sample_tolerance}};
    case K::Function: return {{"kind", "function"}};
  }
  return nullptr;
}

inline PlantSpec plant_from_json(const Json& j) {
  const std::string where = "plant";
  detail::reject_unknown(j, {"type", "b", "kappa", "f", "N_max", "a_grid", "a"}, where);
  PlantSpec s;
  if (!j.contains("type") || !j["type"].is_string()) throw SchemaError("plant.type: required string");
  s.type = j["type"].get<std::string>();
  if (s.type != "heat" && s.type != "wave" && s.type != "heat_boundary")
    throw SchemaError("plant.type: must be 'heat', 'heat_boundary' or 'wave'");
  if (!j.contains("b")) throw SchemaError("plant.b: required");
  s.b = detail::get_number(j, "b", where);
  if (s.type == "wave") {
    if (!j.contains("kappa")) throw SchemaError("plant.kappa: required for wave plants");
    s.kappa = detail::get_number(j, "kappa", where);
  } else if (j.contains("kappa")) {
    throw SchemaError("plant.kappa: only valid for wave plants");
  }
  s.f = j.contains("f") ? profile_from_json(j["f"]) : SourceProfile::constant(1.0);
  if (j.contains("N_max")) s.N_max = detail::get_int(j, "N_max", where);
  if (s.N_max < 1) throw SchemaError("plant.N_max: must be >= 1");
  if (j.contains("a_grid") || j.contains("a")) {
    if (s.type != "heat_boundary") throw SchemaError("plant.a_grid / plant.a: only valid for heat_boundary plants");
    if (j.contains("a_grid")) s.a_grid = detail::get_number_list(j, "a_grid", where);
    if (j.contains("a")) s.a = detail::get_number(j, "a", where);
  }
  return s;
}

inline Json plant_to_json(const PlantSpec& s) {
  Json j = {{"type", s.type}, {"b", s.b}};
  if (s.type == "wave") j["kappa"] = s.kappa;
  j["f"] = profile_to_json(s.f);
  j["N_max"] = s.N_max;
  if (s.type == "heat_boundary") {
    j["a_grid"] = s.a_grid.empty() ? default_lift_grid(s.b) : s.a_grid;
    if (s.a) j["a"] = *s.a;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  PlantSpec plant;
  std::optional<int> N;
  std::optional<double> epsilon;
  double margin_fraction = 0.5;
  int beta_grid_size = 13;
  double rank_tol = 1e-10;
  int max_halvings = 40;
  std::optional<double> beta;
  double horizon = 10.0;
  double dt = 0.01;
  double skip_fraction = 0.3;
  Json x0 = "first_basis";
  std::optional<std::string> controller;
  std::vector<int> N_list;
  bool has_N_list = false;
  int seed = 0;
};

inline void validate(const RunConfig& c) {
  if (!(c.margin_fraction > 0.0 && c.margin_fraction < 1.0)) throw SchemaError("margin_fraction: must lie in (0, 1)");
  if (c.beta_grid_size < 1) throw SchemaError("beta_grid_size: must be >= 1");
  if (!(c.rank_tol > 0.0 && c.rank_tol < 1.0)) throw SchemaError("rank_tol: must lie in (0, 1)");
  if (c.max_halvings < 0) throw SchemaError("max_halvings: must be >= 0");
  if (c.epsilon && !(*c.epsilon > 0.0)) throw SchemaError("epsilon: must be > 0");
  if (c.N && *c.N < 0) throw SchemaError("N: must be >= 0");
  if (c.beta && !(*c.beta > 0.0)) throw SchemaError("beta: must be > 0");
  if (!(c.horizon > 0.0)) throw SchemaError("horizon: must be > 0");
  if (!(c.dt > 0.0) || c.dt > c.horizon) throw SchemaError("dt: must lie in (0, horizon]");
  if (!(c.skip_fraction >= 0.0 && c.skip_fraction < 1.0)) throw SchemaError("skip_fraction: must lie in [0, 1)");
  if (!(c.x0.is_string() && (c.x0 == "first_basis" || c.x0 == "ones")) && !c.x0.is_array())
    throw SchemaError("x0: must be \"first_basis\", \"ones\" or an array of numbers");
  for (int n : c.N_list)
    if (n < 0) throw SchemaError("N_list: entries must be >= 0");
}

inline RunConfig config_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"plant", "N", "epsilon", "margin_fraction", "beta_grid_size", "rank_tol", "max_halvings", "beta",
                          "horizon", "dt", "skip_fraction", "x0", "controller", "N_list", "seed"},
                         "config");
  RunConfig c;
  if (!j.contains("plant")) throw SchemaError("config.plant: required");
  c.plant = plant_from_json(j["plant"]);
  const std::string w = "config";
  if (j.contains("N")) c.N = detail::get_int(j, "N", w);
  if (j.contains("epsilon")) c.epsilon = detail::get_number(j, "epsilon", w);
  if (j.contains("margin_fraction")) c.margin_fraction = detail::get_number(j, "margin_fraction", w);
  if (j.contains("beta_grid_size")) c.beta_grid_size = detail::get_int(j, "beta_grid_size", w);
  if (j.contains("rank_tol")) c.rank_tol = detail::get_number(j, "rank_tol", w);
  if (j.contains("max_halvings")) c.max_halvings = detail::get_int(j, "max_halvings", w);
  if (j.contains("beta")) c.beta = detail::get_number(j, "beta", w);
  if (j.contains("horizon")) c.horizon = detail::get_number(j, "horizon", w);
  if (j.contains("dt")) c.dt = detail::get_number(j, "dt", w);
  if (j.contains("skip_fraction")) c.skip_fraction = detail::get_number(j, "skip_fraction", w);
  if (j.contains("x0")) {
    c.x0 = j["x0"];
    if (c.x0.is_array())
      for (const auto& e : c.x0)
        if (!e.is_number()) throw SchemaError("x0: array entries must be numbers");
  }
  if (j.contains("controller")) {
    if (!j["controller"].is_string()) throw SchemaError("config.controller: expected a path string");
    c.controller = j["controller"].get<std::string>();
  }
  if (j.contains("N_list")) {
    if (!j["N_list"].is_array()) throw SchemaError("config.N_list: expected an array of integers");
    for (const auto& e : j["N_list"]) {
      if (!e.is_number_integer()) throw SchemaError("config.N_list: expected an array of integers");
      c.N_list.push_back(e.get<int>());
    }
    c.has_N_list = true;
  }
  if (j.contains("seed")) c.seed = detail::get_int(j, "seed", w);
  validate(c);
  return c;
}

inline Json config_to_json(const RunConfig& c) {
  Json j;
  j["plant"] = plant_to_json(c.plant);
  if (c.N) j["N"] = *c.N;
  if (c.epsilon) j["epsilon"] = *c.epsilon;
  j["margin_fraction"] = c.margin_fraction;
  j["beta_grid_size"] = c.beta_grid_size;
  j["rank_tol"] = c.rank_tol;
  j["max_halvings"] = c.max_halvings;
  if (c.beta) j["beta"] = *c.beta;
  j["horizon"] = c.horizon;
  j["dt"] = c.dt;
  j["skip_fraction"] = c.skip_fraction;
  j["x0"] = c.x0;
  if (c.controller) j["controller"] = *c.controller;
  if (c.has_N_list) j["N_list"] = c.N_list;
  j["seed"] = c.seed;
  return j;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Writes through a temporary file in the same directory and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json_atomic(const std::filesystem::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Controller and certificate documents

inline Json controller_to_json(const ObserverController& c, int N, const PlantSpec& plant) {
  Json j;
  j["format"] = "modalstab-controller";
  j["plant"] = plant_to_json(plant);
  j["N"] = N;
  j["labels"] = c.labels;
  j["dims"] = {{"n_u", c.n_u},
               {"n_r", c.n_r},
               {"state", c.E.rows()},
               {"input", c.F.cols()},
               {"output", c.G.rows()}};
  j["E"] = matrix_to_json(c.E);
  j["F"] = matrix_to_json(c.F);
  j["G"] = matrix_to_json(c.G);
  j["K_u"] = matrix_to_json(c.K_u);
  j["L_u"] = matrix_to_json(c.L_u);
  j["design"] = {{"method", "riccati_unit_weights"},
                 {"target_rate", -std::max(c.metadata.feedback_abscissa, c.metadata.observer_abscissa)},
                 {"feedback_abscissa", c.metadata.feedback_abscissa},
                 {"observer_abscissa", c.metadata.observer_abscissa},
                 {"feedback_riccati_residual", c.metadata.feedback_residual},
                 {"observer_riccati_residual", c.metadata.observer_residual}};
  return j;
}

struct ControllerDocument {
  StateSpaceSystem system;
  std::optional<int> N;
  std::optional<int> n_u;
  std::optional<CMatrix> K_u, L_u;
};

inline ControllerDocument controller_from_json(const Json& j) {
  if (!j.is_object()) throw SchemaError("controller: expected an object");
  for (const char* key : {"E", "F", "G"})
    if (!j.contains(key)) throw SchemaError(std::string("controller.") + key + ": required");
  const Json& e = j["E"];
  if (!e.is_array()) throw SchemaError("controller.E: expected an array of rows");
  const auto q = static_cast<Eigen::Index>(e.size());
  const Json& f = j["F"];
  const Json& g = j["G"];
  if (!f.is_array() || !g.is_array()) throw SchemaError("controller.F / G: expected arrays of rows");
  const Eigen::Index p = (q > 0 && f[0].is_array()) ? static_cast<Eigen::Index>(f[0].size()) : 0;
  const auto m = static_cast<Eigen::Index>(g.size());
  ControllerDocument d;
  CMatrix em = matrix_from_json(e, "controller.E", q, q);
  CMatrix fm = matrix_from_json(f, "controller.F", q, p);
  CMatrix gm = matrix_from_json(g, "controller.G", m, q);
  d.system = StateSpaceSystem::make(std::move(em), std::move(fm), std::move(gm));
  if (j.contains("N")) d.N = detail::get_int(j, "N", "controller");
  if (j.contains("dims") && j["dims"].is_object() && j["dims"].contains("n_u"))
    d.n_u = detail::get_int(j["dims"], "n_u", "controller.dims");
  if (d.n_u && j.contains("K_u") && j.contains("L_u")) {
    d.K_u = matrix_from_json(j["K_u"], "controller.K_u", m, *d.n_u);
    d.L_u = matrix_from_json(j["L_u"], "controller.L_u", *d.n_u, p);
  }
  return d;
}

inline Json gain_to_json(const GainBound& g) {
  return {{"value", g.value},
          {"beta", g.beta},
          {"kind", std::string(to_string(g.kind)) + "-(" + std::to_string(g.n) + "," + std::to_string(g.m) + ")"},
          {"provenance", to_string(g.provenance)}};
}

inline Json certificate_to_json(const StabilityCertificate& c) {
  Json j;
  j["beta"] = c.beta;
  j["product"] = c.product;
  j["gain_R"] = c.gain_R.value;
  j["gain_tail"] = c.gain_tail.value;
  j["is_R"] = c.is_R.value;
  j["is_tail"] = c.is_tail.value;
  j["N"] = c.truncation_N;
  j["n_u"] = c.n_u;
  j["n_r"] = c.n_r;
  j["verdict"] = to_string(c.verdict);
  j["bounds"] = {{"gain_R", gain_to_json(c.gain_R)},
                 {"gain_tail", gain_to_json(c.gain_tail)},
                 {"is_R", gain_to_json(c.is_R)},
                 {"is_tail", gain_to_json(c.is_tail)}};
  j["diagnostics"] = c.diagnostics;
  return j;
}

}  // namespace modalstab
