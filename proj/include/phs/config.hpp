#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "phs/control_sim.hpp"
#include "phs/toml_subset.hpp"

namespace phs {

using json = nlohmann::json;

struct InitialBump {
  int component = 0;
  double a = 0.0, b = 1.0;
  Complex amplitude = 1.0;
};

struct SimulationSpec {
  double T = 1.0;
  double dt = 0.0;
  int snapshot_every = 0;
  Interp interp = Interp::cubic_spline;
  std::vector<InitialBump> bumps;
  std::string initial_csv;  // resolved path, replaces the bumps when set
  std::vector<double> input_knots;
  CMatrix input_values;  // p x knots
  Interp input_interp = Interp::cubic_spline;
};

struct CertificateSpec {
  double tau = 1.0;
  int trials = 8;
};

/// A parsed and validated configuration. `document` is the canonical tree that
/// round-trips through toml::dump / toml::parse.
struct SystemConfig {
  std::string name;
  std::string description;
  json document;
  std::filesystem::path base_dir;
  PortHamiltonianSystem system;
  CMatrix W_B1, W_B2, W_C;
  GridPtr grid;
  double audit_constant = 100.0;
  unsigned seed = 0;
  std::optional<SimulationSpec> simulation;
  std::optional<CertificateSpec> certificate;

  BoundaryControlSystem control() const { return BoundaryControlSystem::make(system, W_B1, W_B2, W_C); }

  SimulationOptions simulation_options() const {
    SimulationOptions o;
    o.grid = grid;
    o.c_audit = audit_constant;
    if (simulation) {
      o.T = simulation->T;
      o.dt = simulation->dt;
      o.snapshot_every = simulation->snapshot_every;
      o.interp = simulation->interp;
    }
    return o;
  }

  State initial_state() const {
    const int n = system.n();
    const Interp interp = simulation ? simulation->interp : Interp::cubic_spline;
    if (simulation && !simulation->initial_csv.empty()) {
      const State s = read_csv(simulation->initial_csv, interp);
      if (s.n() != n) throw ConfigError("initial state CSV has the wrong number of components", "simulation.initial");
      return s;
    }
    std::vector<InitialBump> bumps = simulation ? simulation->bumps : std::vector<InitialBump>{};
    return State::sample(
        grid, n,
        [&](double xi) {
          CVector v = CVector::Zero(n);
          for (const auto& b : bumps) {
            if (xi <= b.a || xi >= b.b) continue;
            const double s = (2 * xi - b.a - b.b) / (b.b - b.a);
            v(b.component) += b.amplitude * std::exp(1.0 - 1.0 / (1.0 - s * s));
          }
          return v;
        },
        interp);
  }

  /// Input through the configured knots, sampled every dt on [0, T] (zero when no knots are given).
  SampledInput input(double dt) const {
    const int p = static_cast<int>(W_B1.rows());
    if (!simulation || simulation->input_knots.empty()) return SampledInput::zero(p);
    const auto& knots = simulation->input_knots;
    if (knots.size() == 1) return SampledInput({knots[0]}, simulation->input_values);
    const double T = simulation->T;
    const int m = static_cast<int>(std::ceil(T / dt - 1e-9)) + 1;
    std::vector<double> t(m);
    CMatrix v(p, m);
    GridPtr kg = knots.size() >= 3 ? Grid::from_nodes(knots) : nullptr;
    const State spline = kg ? State(kg, simulation->input_values, simulation->input_interp, Tail::hold_last) : State();
    for (int k = 0; k < m; ++k) {
      t[k] = std::min(T, k * T / (m - 1));
      const double s = std::clamp(t[k], knots.front(), knots.back());
      if (kg) {
        v.col(k) = spline.at(s);
      } else {
        const double w = (s - knots[0]) / (knots[1] - knots[0]);
        v.col(k) = (1 - w) * simulation->input_values.col(0) + w * simulation->input_values.col(1);
      }
    }
    return SampledInput(t, v);
  }
};

namespace config_detail {

[[noreturn]] inline void fail(const std::string& field, const std::string& msg) { throw ConfigError(msg, "field " + field); }

inline const json* find(const json& t, const std::string& key) {
  if (!t.is_object()) return nullptr;
  const auto it = t.find(key);
  return it == t.end() ? nullptr : &*it;
}

inline double number(const json& v, const std::string& field) {
  if (!v.is_number()) fail(field, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(field, "must be finite");
  return d;
}

inline double number_or(const json& t, const std::string& key, double fallback, const std::string& prefix) {
  const json* v = find(t, key);
  return v ? number(*v, prefix + key) : fallback;
}

inline int integer(const json& v, const std::string& field) {
  if (!v.is_number_integer()) fail(field, "expected an integer");
  return v.get<int>();
}

inline std::string text(const json& v, const std::string& field) {
  if (!v.is_string()) fail(field, "expected a string");
  return v.get<std::string>();
}

inline Complex complex_value(const json& v, const std::string& field) {
  if (v.is_number()) return number(v, field);
  if (v.is_array() && v.size() == 2) return {number(v[0], field), number(v[1], field)};
  fail(field, "expected a number or a [re, im] pair");
}

inline CMatrix matrix(const json& v, const std::string& field, int cols = -1) {
  if (!v.is_array()) fail(field, "expected an array of rows");
  const int rows = static_cast<int>(v.size());
  if (rows == 0) return CMatrix(0, std::max(cols, 0));
  if (!v[0].is_array()) fail(field + "[0]", "expected a row array");
  const int c = static_cast<int>(v[0].size());
  if (cols >= 0 && c != cols) fail(field, "expected " + std::to_string(cols) + " columns, found " + std::to_string(c));
  CMatrix m(rows, c);
  for (int i = 0; i < rows; ++i) {
    const std::string rf = field + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || static_cast<int>(v[i].size()) != c) fail(rf, "rows must all have " + std::to_string(c) + " entries");
    for (int j = 0; j < c; ++j) m(i, j) = complex_value(v[i][j], rf + "[" + std::to_string(j) + "]");
  }
  return m;
}

inline std::vector<double> numbers(const json& v, const std::string& field) {
  if (!v.is_array()) fail(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], field + "[" + std::to_string(k) + "]"));
  return out;
}

inline Interp interp(const json& t, const std::string& key, const std::string& prefix) {
  const json* v = find(t, key);
  if (!v) return Interp::cubic_spline;
  const std::string s = text(*v, prefix + key);
  if (s == "cubic_spline") return Interp::cubic_spline;
  if (s == "monotone_cubic") return Interp::monotone_cubic;
  if (s == "linear") return Interp::linear;
  fail(prefix + key, "unknown interpolation '" + s + "' (cubic_spline, monotone_cubic, linear)");
}

inline ScalarCoefficient coefficient(const json& e, const std::string& field, const std::filesystem::path& base) {
  const json* k = find(e, "kind");
  if (!k) fail(field + ".kind", "missing coefficient kind");
  const std::string kind = text(*k, field + ".kind");
  auto req = [&](const char* key) {
    const json* v = find(e, key);
    if (!v) fail(field + "." + key, "missing for kind '" + kind + "'");
    return number(*v, field + "." + key);
  };
  try {
    if (kind == "constant") return ScalarCoefficient::constant(req("value"));
    if (kind == "affine_reciprocal") return ScalarCoefficient::affine_reciprocal(req("c"), req("a"));
    if (kind == "affine") return ScalarCoefficient::affine(req("c"), req("a"));
    if (kind == "power_tail")
      return ScalarCoefficient::power_tail(req("c"), req("alpha"), req("value0"), number_or(e, "slope0", 0.0, field + "."));
    if (kind == "tabulated") {
      const json* xs = find(e, "nodes");
      const json* ys = find(e, "values");
      if (!xs || !ys) fail(field, "tabulated coefficients need 'nodes' and 'values'");
      return ScalarCoefficient::tabulated(numbers(*xs, field + ".nodes"), numbers(*ys, field + ".values"));
    }
    if (kind == "csv") {
      const json* p = find(e, "path");
      if (!p) fail(field + ".path", "missing for kind 'csv'");
      const auto path = base / text(*p, field + ".path");
      if (!std::filesystem::exists(path)) fail(field + ".path", "file not found: " + path.string());
      return ScalarCoefficient::from_csv(path.string());
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    fail(field, err.what());
  }
  fail(field + ".kind", "unknown coefficient kind '" + kind + "'");
}

inline MatrixCoefficient hamiltonian(const json& h, int n, const std::filesystem::path& base) {
  const std::string f = "system.H";
  if (!h.is_object()) fail(f, "expected a table");
  CMatrix base_matrix = CMatrix::Zero(n, n);
  if (const json* m = find(h, "matrix")) base_matrix = matrix(*m, f + ".matrix", n);
  if (base_matrix.rows() != n) fail(f + ".matrix", "expected " + std::to_string(n) + " rows");
  std::vector<MatrixCoefficient::Entry> entries;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) entries.push_back(MatrixCoefficient::entry(base_matrix(i, j)));
  bool constant = true;
  bool diagonal = true;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && base_matrix(i, j) != Complex(0.0)) diagonal = false;
  if (const json* list = find(h, "entry")) {
    if (!list->is_array()) fail(f + ".entry", "expected [[system.H.entry]] blocks");
    for (std::size_t k = 0; k < list->size(); ++k) {
      const std::string ef = f + ".entry[" + std::to_string(k) + "]";
      const json& e = (*list)[k];
      const json* r = find(e, "row");
      const json* c = find(e, "col");
      if (!r || !c) fail(ef, "needs 'row' and 'col'");
      const int i = integer(*r, ef + ".row"), j = integer(*c, ef + ".col");
      if (i < 0 || j < 0 || i >= n || j >= n) fail(ef, "entry index out of range");
      const auto coef = coefficient(e, ef, base);
      entries[i * n + j] = MatrixCoefficient::entry(coef);
      entries[j * n + i] = MatrixCoefficient::entry(coef);  // real coefficients: symmetric placement keeps H Hermitian
      constant = false;
      if (i != j) diagonal = false;
    }
  }
  MatrixCoefficient::Flags flags{true, true, diagonal, constant};
  MatrixCoefficient H(n, std::move(entries), flags);
  try {
    H.validate(probe_points());
  } catch (const Error& err) {
    fail(f, err.what());
  }
  return H;
}

inline GridPtr grid(const json* g) {
  const std::string f = "grid";
  if (!g) return Grid::uniform(0.0, 10.0, 1001);
  const std::string layout = find(*g, "layout") ? text(*find(*g, "layout"), f + ".layout") : "uniform";
  try {
    if (layout == "custom") {
      const json* p = find(*g, "points");
      if (!p) fail(f + ".points", "custom layout needs 'points'");
      auto x = numbers(*p, f + ".points");
      if (x.empty() || x.front() != 0.0) fail(f + ".points", "grid must start at 0");
      return Grid::from_nodes(std::move(x));
    }
    const double r = number_or(*g, "R_max", 10.0, f + ".");
    const json* nn = find(*g, "nodes");
    const int nodes = nn ? integer(*nn, f + ".nodes") : 1001;
    if (layout == "uniform") return Grid::uniform(0.0, r, nodes);
    if (layout == "log_stretched") return Grid::log_stretched(r, nodes, number_or(*g, "cluster", 1.0, f + "."));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    fail(f, err.what());
  }
  fail(f + ".layout", "unknown layout '" + layout + "' (uniform, log_stretched, custom)");
}

inline SimulationSpec simulation(const json& s, int n, int p, const std::filesystem::path& base) {
  const std::string f = "simulation";
  SimulationSpec spec;
  spec.T = number_or(s, "T", 1.0, f + ".");
  spec.dt = number_or(s, "dt", 0.0, f + ".");
  if (!(spec.T > 0.0)) fail(f + ".T", "must be positive");
  if (spec.dt < 0.0) fail(f + ".dt", "must be nonnegative (0 picks the default)");
  if (const json* k = find(s, "snapshot_every")) spec.snapshot_every = integer(*k, f + ".snapshot_every");
  spec.interp = interp(s, "interp", f + ".");
  if (const json* csv = find(s, "initial_csv")) {
    const auto path = base / text(*csv, f + ".initial_csv");
    if (!std::filesystem::exists(path)) fail(f + ".initial_csv", "file not found: " + path.string());
    spec.initial_csv = path.string();
  }
  if (const json* list = find(s, "initial")) {
    if (!list->is_array()) fail(f + ".initial", "expected [[simulation.initial]] blocks");
    for (std::size_t k = 0; k < list->size(); ++k) {
      const std::string bf = f + ".initial[" + std::to_string(k) + "]";
      const json& b = (*list)[k];
      InitialBump bump;
      const json* c = find(b, "component");
      if (!c) fail(bf + ".component", "missing");
      bump.component = integer(*c, bf + ".component");
      if (bump.component < 0 || bump.component >= n) fail(bf + ".component", "out of range");
      const json* a = find(b, "a");
      const json* e = find(b, "b");
      if (!a || !e) fail(bf, "needs support ends 'a' and 'b'");
      bump.a = number(*a, bf + ".a");
      bump.b = number(*e, bf + ".b");
      if (!(bump.b > bump.a) || bump.a < 0.0) fail(bf, "support must satisfy 0 <= a < b");
      if (const json* amp = find(b, "amplitude")) bump.amplitude = complex_value(*amp, bf + ".amplitude");
      spec.bumps.push_back(bump);
    }
  }
  if (const json* u = find(s, "input")) {
    const std::string uf = f + ".input";
    const json* knots = find(*u, "knots");
    const json* values = find(*u, "values");
    if (!knots || !values) fail(uf, "needs 'knots' and 'values'");
    spec.input_knots = numbers(*knots, uf + ".knots");
    spec.input_values = matrix(*values, uf + ".values", static_cast<int>(spec.input_knots.size()));
    if (spec.input_values.rows() != p) fail(uf + ".values", "needs one row per input (p = " + std::to_string(p) + ")");
    for (std::size_t k = 1; k < spec.input_knots.size(); ++k)
      if (!(spec.input_knots[k] > spec.input_knots[k - 1])) fail(uf + ".knots", "must be strictly increasing");
    spec.input_interp = interp(*u, "interp", uf + ".");
  }
  return spec;
}

}  // namespace config_detail

/// Builds a configuration from a parsed tree; relative paths resolve against base_dir.
inline SystemConfig build_config(const json& doc, const std::filesystem::path& base_dir = ".") {
  using namespace config_detail;
  if (!doc.is_object()) fail("<root>", "expected a table");
  static const std::vector<std::string> known{"name",        "description", "system",     "boundary", "grid",
                                              "tolerances", "simulation",  "certificate", "seeds"};
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) fail(it.key(), "unknown section");

  SystemConfig c;
  c.document = doc;
  c.base_dir = base_dir;
  if (const json* v = find(doc, "name")) c.name = text(*v, "name");
  if (const json* v = find(doc, "description")) c.description = text(*v, "description");

  const json* sys = find(doc, "system");
  if (!sys || !sys->is_object()) fail("system", "missing [system] table");
  const json* p1 = find(*sys, "P1");
  if (!p1) fail("system.P1", "missing");
  c.system.P1 = matrix(*p1, "system.P1");
  const int n = static_cast<int>(c.system.P1.rows());
  if (n == 0 || c.system.P1.cols() != n) fail("system.P1", "must be a nonempty square matrix");
  if (const json* n_decl = find(*sys, "n"))
    if (integer(*n_decl, "system.n") != n) fail("system.n", "does not match the size of P1");
  c.system.P0 = CMatrix::Zero(n, n);
  if (const json* p0 = find(*sys, "P0")) c.system.P0 = matrix(*p0, "system.P0", n);
  if (c.system.P0.rows() != n) fail("system.P0", "must be n x n");
  c.system.scale = number_or(*sys, "scale", 1.0, "system.");
  const json* h = find(*sys, "H");
  if (!h) fail("system.H", "missing");
  c.system.H = hamiltonian(*h, n, base_dir);

  const json* bnd = find(doc, "boundary");
  const json empty = json::object();
  if (!bnd) bnd = &empty;
  const json* wb = find(*bnd, "W_B");
  const json* wb1 = find(*bnd, "W_B1");
  if (wb && wb1) fail("boundary", "give either W_B or W_B1 (with W_B2), not both");
  c.W_B1 = wb1 ? matrix(*wb1, "boundary.W_B1", n) : wb ? matrix(*wb, "boundary.W_B", n) : CMatrix(0, n);
  c.W_B2 = find(*bnd, "W_B2") ? matrix(*find(*bnd, "W_B2"), "boundary.W_B2", n) : CMatrix(0, n);
  if (wb && find(*bnd, "W_B2")) fail("boundary.W_B2", "only allowed together with W_B1");
  c.W_C = find(*bnd, "W_C") ? matrix(*find(*bnd, "W_C"), "boundary.W_C", n) : CMatrix(0, n);
  c.system.W_B.resize(c.W_B1.rows() + c.W_B2.rows(), n);
  c.system.W_B << c.W_B1, c.W_B2;

  c.grid = grid(find(doc, "grid"));
  if (const json* t = find(doc, "tolerances")) c.audit_constant = number_or(*t, "audit_constant", 100.0, "tolerances.");
  if (const json* s = find(doc, "seeds"))
    if (const json* k = find(*s, "properties")) c.seed = static_cast<unsigned>(integer(*k, "seeds.properties"));
  if (const json* s = find(doc, "simulation"))
    c.simulation = simulation(*s, n, static_cast<int>(c.W_B1.rows()), base_dir);
  if (const json* s = find(doc, "certificate")) {
    CertificateSpec cs;
    cs.tau = number_or(*s, "tau", 1.0, "certificate.");
    if (const json* k = find(*s, "trials")) cs.trials = integer(*k, "certificate.trials");
    if (!(cs.tau > 0.0) || cs.trials < 1) fail("certificate", "needs tau > 0 and trials >= 1");
    c.certificate = cs;
  }
  return c;
}

inline SystemConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  return build_config(toml::parse(text), base_dir);
}

/// Reads a config file; `.json` files are read as JSON, anything else as the text format.
inline SystemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file", path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  if (path.extension() == ".json") {
    try {
      doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
      throw ConfigError(e.what(), path.string());
    }
  } else {
    try {
      doc = toml::parse(buf.str());
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), path.string());
    }
  }
  return build_config(doc, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

/// Canonical text of a configuration.
inline std::string canonical_text(const SystemConfig& c) { return toml::dump(c.document); }

}  // namespace phs
