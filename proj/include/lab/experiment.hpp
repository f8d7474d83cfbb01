#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "extension.hpp"
#include "fiber.hpp"
#include "geometry.hpp"
#include "oracle.hpp"
#include "svalues.hpp"

namespace lab {

inline constexpr const char* kArtifactVersion = "1";

/// Config problems carry the offending line for CLI diagnostics.
struct ConfigError : std::runtime_error {
  int line;
  ConfigError(int line_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

struct ConfigSection {
  std::string name;
  int line = 0;
  std::vector<std::pair<std::string, std::string>> entries;  // in file order
  std::map<std::string, int> key_lines;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  return out;
}

/// Portable uniform draws straight off the engine words, so output bytes do
/// not depend on the standard library's distribution internals.
inline double draw_uniform(std::mt19937_64& g, double lo, double hi) {
  const double u = static_cast<double>(g() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

inline int draw_int(std::mt19937_64& g, int lo, int hi) {
  return lo + static_cast<int>(g() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline std::string fmt(double x) {
  char b[48];
  std::snprintf(b, sizeof b, "%.16e", x);
  return b;
}

inline std::string fmt_bool(bool v) { return v ? "true" : "false"; }

inline std::string csv_field(const std::string& s) {
  if (s.find(',') == std::string::npos) return s;
  return "\"" + s + "\"";
}

}  // namespace detail

/// key = value sections, one per experiment run; '#' starts a comment.
inline std::vector<ConfigSection> parse_config_text(const std::string& text) {
  std::vector<ConfigSection> out;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = raw;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(lineno, "unterminated section header");
      std::string name = detail::trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw ConfigError(lineno, "empty section name");
      ConfigSection sec;
      sec.name = name;
      sec.line = lineno;
      out.push_back(std::move(sec));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(lineno, "expected key = value");
    if (out.empty()) throw ConfigError(lineno, "key outside of any [experiment] section");
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(lineno, "empty key");
    ConfigSection& sec = out.back();
    if (sec.key_lines.count(key))
      throw ConfigError(lineno, "duplicate key '" + key + "' in section [" + sec.name + "]");
    sec.entries.emplace_back(key, val);
    sec.key_lines[key] = lineno;
  }
  return out;
}

/// Registry entry: name, equation tag for provenance, and the key schema.
struct ExperimentInfo {
  std::string name;
  std::string equation;
  std::vector<std::string> required;
  std::vector<std::pair<std::string, std::string>> optional;  // key -> default
};

inline const std::vector<ExperimentInfo>& experiment_registry() {
  static const std::vector<ExperimentInfo> reg = {
      {"krein-check",
       "Eq (7.8)",
       {"b", "lambda"},
       {{"geometry", "slab"},
        {"n", "2"},
        {"ell", "1"},
        {"msq", "1"},
        {"R", "50"},
        {"grid_n", "10000"},
        {"tol", "1e-6"},
        {"terms", "6"},
        {"seed", "12345"},
        {"output", "."}}},
      {"mfunction-scan",
       "Thm 7.1(iii)",
       {"b", "lambda"},
       {{"geometry", "slab"},
        {"n", "2"},
        {"ell", "1"},
        {"msq", "1"},
        {"lambda_im", ""},
        {"R", "10"},
        {"output", "."}}},
      {"weyl-robin-dirichlet",
       "Eq (9.6)",
       {"b", "R"},
       {{"geometry", "slab"},
        {"n", "2"},
        {"ell", "1"},
        {"msq", "1"},
        {"lambda", "-1"},
        {"output", "."}}},
      {"weyl-robin-pair",
       "Example 10.4 / Eq (9.13)",
       {"b1", "b2", "R"},
       {{"geometry", "slab"},
        {"n", "2"},
        {"ell", "1"},
        {"msq", "1"},
        {"lambda", "-1"},
        {"output", "."}}},
      {"weyl-iterates",
       "Cor 9.3 / Eq (9.10)",
       {"b"},
       {{"geometry", "slab"},
        {"n", "2"},
        {"ell", "1"},
        {"msq", "1"},
        {"np", "2"},
        {"R", "300"},
        {"grid_n", "800"},
        {"output", "."}}},
      {"dirichlet-weyl",
       "Eq (9.1)",
       {"R", "k_max", "t"},
       {{"geometry", "slab"}, {"n", "2"}, {"ell", "1"}, {"msq", "1"}, {"output", "."}}},
      {"lowerbound-scan",
       "Thm 8.3 / Eq (8.2)",
       {"mu"},
       {{"geometry", "half-cylinder"},
        {"n", "2"},
        {"ell", "1"},
        {"msq", "1"},
        {"R", "200"},
        {"output", "."}}},
      {"birman-check",
       "Thm 8.1 1°",
       {},
       {{"geometry", "slab"},
        {"n", "2"},
        {"ell", "1"},
        {"msq", "1"},
        {"b", ""},
        {"count", "1"},
        {"b_min", "0"},
        {"b_max", "10"},
        {"seed", "12345"},
        {"R", "10"},
        {"grid_n", "400"},
        {"output", "."}}},
      {"garding-check",
       "Eq (8.5)",
       {"bc"},
       {{"geometry", "half-cylinder"},
        {"n", "2"},
        {"ell", "1"},
        {"msq", "1"},
        {"b", ""},
        {"coeffs", ""},
        {"R", "1000"},
        {"grid_n", "200"},
        {"expect", ""},
        {"output", "."}}},
      {"diagram-check",
       "Thm 5.3",
       {"b"},
       {{"geometry", "slab"},
        {"n", "2"},
        {"ell", "1"},
        {"msq", "1"},
        {"count", "50"},
        {"seed", "12345"},
        {"R", "10"},
        {"grid_n", "2000"},
        {"lam_min", "-10"},
        {"lam_max", "-0.01"},
        {"tol", "1e-6"},
        {"tol_inv", "1e-8"},
        {"output", "."}}},
  };
  return reg;
}

inline const ExperimentInfo* find_experiment(const std::string& name) {
  for (const auto& e : experiment_registry())
    if (e.name == name) return &e;
  return nullptr;
}

/// Effective (defaults-merged) parameters with typed, line-diagnosed access.
class Params {
 public:
  Params(const ConfigSection& sec, const ExperimentInfo& info) : secline_(sec.line) {
    std::set<std::string> known;
    for (const auto& k : info.required) known.insert(k);
    for (const auto& [k, v] : info.optional) {
      known.insert(k);
      eff_[k] = v;
      lines_[k] = sec.line;
    }
    for (const auto& [k, v] : sec.entries) {
      if (!known.count(k))
        throw ConfigError(sec.key_lines.at(k),
                          "unknown key '" + k + "' for experiment " + info.name);
      eff_[k] = v;
      lines_[k] = sec.key_lines.at(k);
    }
    for (const auto& k : info.required)
      if (!eff_.count(k))
        throw ConfigError(sec.line, "missing required key '" + k + "' for " + info.name);
  }

  bool has(const std::string& key) const {
    auto it = eff_.find(key);
    return it != eff_.end() && !it->second.empty();
  }
  const std::string& str(const std::string& key) const { return eff_.at(key); }
  int line_of(const std::string& key) const {
    auto it = lines_.find(key);
    return it == lines_.end() ? secline_ : it->second;
  }

  double num(const std::string& key) const { return parse_num(key, str(key)); }

  long integer(const std::string& key) const {
    const std::string& v = str(key);
    char* end = nullptr;
    long r = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
      throw ConfigError(line_of(key), "key '" + key + "' is not an integer: " + v);
    return r;
  }

  std::vector<double> num_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& part : detail::split_list(str(key))) {
      if (part.empty())
        throw ConfigError(line_of(key), "key '" + key + "' has an empty list entry");
      out.push_back(parse_num(key, part));
    }
    if (out.empty()) throw ConfigError(line_of(key), "key '" + key + "' is an empty list");
    return out;
  }

  const std::map<std::string, std::string>& effective() const { return eff_; }

 private:
  double parse_num(const std::string& key, const std::string& v) const {
    char* end = nullptr;
    double r = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
      throw ConfigError(line_of(key), "key '" + key + "' is not a number: " + v);
    return r;
  }

  std::map<std::string, std::string> eff_;
  std::map<std::string, int> lines_;
  int secline_;
};

inline Geometry geometry_from(const Params& p) {
  Geometry g;
  const std::string& kind = p.str("geometry");
  if (kind == "slab")
    g.domain = Domain::Slab;
  else if (kind == "half-cylinder")
    g.domain = Domain::HalfCylinder;
  else
    throw ConfigError(p.line_of("geometry"), "geometry must be slab or half-cylinder");
  g.n = static_cast<int>(p.integer("n"));
  g.ell = p.num("ell");
  try {
    g.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(p.line_of("n"), ex.what());
  }
  return g;
}

inline ModelOperator operator_from(const Params& p) {
  ModelOperator op;
  op.msq = p.num("msq");
  try {
    op.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(p.line_of("msq"), ex.what());
  }
  return op;
}

/// One experiment's emitted artifacts before hitting the filesystem.
struct ExperimentResult {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::map<std::string, std::string> summary;
  bool assertion_failed = false;
  std::string message;  // stderr note on assertion failure or warning
};

namespace detail {

inline std::string csv_text(const ExperimentResult& r) {
  std::ostringstream os;
  for (std::size_t i = 0; i < r.header.size(); ++i)
    os << (i ? "," : "") << csv_field(r.header[i]);
  os << "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_field(row[i]);
    os << "\n";
  }
  return os.str();
}

inline std::string meta_text(const ExperimentInfo& info, const Params& p,
                             const ExperimentResult& r) {
  std::ostringstream os;
  os << "experiment = " << info.name << "\n";
  os << "equation = " << info.equation << "\n";
  os << "artifact_version = " << kArtifactVersion << "\n";
  os << "status = " << (r.assertion_failed ? "assertion-failed" : "ok") << "\n";
  for (const auto& [k, v] : p.effective()) os << "config." << k << " = " << v << "\n";
  for (const auto& [k, v] : r.summary) os << "summary." << k << " = " << v << "\n";
  return os.str();
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void require_slab(const Params& p, const char* name) {
  if (p.str("geometry") != "slab")
    throw ConfigError(p.line_of("geometry"),
                      std::string(name) + " requires geometry = slab");
}

}  // namespace detail

// ---- runners ----

inline ExperimentResult run_krein_check(const Params& p, bool dry) {
  detail::require_slab(p, "krein-check");
  const Geometry geom = geometry_from(p);
  const ModelOperator op = operator_from(p);
  const double b = p.num("b"), lambda = p.num("lambda"), R = p.num("R"), tol = p.num("tol");
  const int gridN = static_cast<int>(p.integer("grid_n"));
  const int terms = static_cast<int>(p.integer("terms"));
  const auto seed = static_cast<std::uint64_t>(p.integer("seed"));
  if (gridN < 16) throw ConfigError(p.line_of("grid_n"), "grid_n too small");
  if (terms < 1) throw ConfigError(p.line_of("terms"), "terms must be >= 1");
  ExperimentResult res;
  if (dry) return res;

  const Realization real = Realization::robin(b);
  auto modes = lattice_modes(geom, op, R);
  std::mt19937_64 rng(seed);
  std::vector<TrigPoly> fs(modes.size());
  for (auto& f : fs) {  // pre-drawn in lattice (sorted) mode order
    f.ell = geom.ell;
    f.c.resize(terms);
    for (double& c : f.c) c = detail::draw_uniform(rng, -1.0, 1.0);
  }
  std::vector<double> resid(modes.size());
  std::vector<std::string> errs(modes.size());
  parallel_for(modes.size(), [&](std::size_t i) {
    try {
      const Mode& m = modes[i];
      auto ff = [&](double x) { return cplx(fs[i].at(x), 0.0); };
      auto uk = krein_apply_richardson(real, lambda, m, ff, geom.ell, gridN, geom, op);
      auto uo = oracle_solve_richardson(m, lambda, FiberBC::robin(b), ff, 0.0, geom.ell, gridN);
      const double h = geom.ell / gridN;
      double num = 0.0;
      std::vector<cplx> diff(uk.size());
      for (std::size_t j = 0; j < uk.size(); ++j) diff[j] = uk[j] - uo[j];
      num = trapezoid_normsq(diff, h);
      const double den = trapezoid_normsq(uo, h);
      resid[i] = std::sqrt(num / std::max(den, 1e-300));
    } catch (const std::exception& ex) {
      errs[i] = ex.what();
    }
  });
  for (const auto& e : errs)
    if (!e.empty()) throw std::domain_error(e);

  res.header = {"mode", "residual"};
  double worst = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    res.rows.push_back({modes[i].label(), detail::fmt(resid[i])});
    worst = std::max(worst, resid[i]);
  }
  res.summary["max_residual"] = detail::fmt(worst);
  res.summary["modes"] = std::to_string(modes.size());
  res.summary["tolerance"] = detail::fmt(tol);
  if (worst > tol) {
    res.assertion_failed = true;
    res.message = "krein-check: max residual " + detail::fmt(worst) + " exceeds tolerance " +
                  detail::fmt(tol);
  }
  return res;
}

inline ExperimentResult run_mfunction_scan(const Params& p, bool dry) {
  const Geometry geom = geometry_from(p);
  const ModelOperator op = operator_from(p);
  const double b = p.num("b"), R = p.num("R");
  const std::vector<double> lre = p.num_list("lambda");
  std::vector<double> lim(lre.size(), 0.0);
  if (p.has("lambda_im")) {
    lim = p.num_list("lambda_im");
    if (lim.size() != lre.size())
      throw ConfigError(p.line_of("lambda_im"), "lambda_im length must match lambda");
  }
  ExperimentResult res;
  if (dry) return res;

  const Realization real = Realization::robin(b);
  std::vector<std::size_t> order(lre.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::pair(lre[i], lim[i]) < std::pair(lre[j], lim[j]);
  });
  res.header = {"lambda_re", "lambda_im", "mode", "m_re", "m_im"};
  for (std::size_t oi : order) {
    const cplx lambda(lre[oi], lim[oi]);
    MFunctionSample samp = m_function(real, lambda, R, geom, op);
    for (std::size_t k = 0; k < samp.modes.size(); ++k)
      res.rows.push_back({detail::fmt(lambda.real()), detail::fmt(lambda.imag()),
                          samp.modes[k].label(), detail::fmt(samp.values[k].real()),
                          detail::fmt(samp.values[k].imag())});
  }
  res.summary["lambda_count"] = std::to_string(lre.size());
  return res;
}

namespace detail {

inline void weyl_series_result(const SingularValueSeries& series, double weight_power,
                               std::optional<double> expected, ExperimentResult& res) {
  FitResult fit = weyl_fit(series, expected);
  res.header = {"j", "s_j", "s_weighted", "mode"};
  for (std::size_t j = 0; j < series.size(); ++j) {
    const double sv = series.values[j];
    res.rows.push_back({std::to_string(j + 1), fmt(sv),
                        fmt(sv * std::pow(double(j + 1), weight_power)),
                        series.source_modes[j].label()});
  }
  res.summary["exponent"] = fmt(fit.exponent);
  res.summary["constant"] = fmt(fit.constant);
  res.summary["plateau"] = fmt(fit.plateau);
  res.summary["residual"] = fmt(fit.residual);
  res.summary["window_lo"] = std::to_string(fit.window_lo);
  res.summary["window_hi"] = std::to_string(fit.window_hi);
  if (expected) res.summary["expected_exponent"] = fmt(*expected);
}

}  // namespace detail

inline ExperimentResult run_weyl_robin_dirichlet(const Params& p, bool dry) {
  const Geometry geom = geometry_from(p);
  const ModelOperator op = operator_from(p);
  const double b = p.num("b"), lambda = p.num("lambda"), R = p.num("R");
  ExperimentResult res;
  if (dry) return res;
  auto series = svalues_vs_dirichlet(Realization::robin(b), lambda, R, geom, op);
  const double w = 2.0 / (geom.n - 1);
  detail::weyl_series_result(series, w, -w, res);
  return res;
}

inline ExperimentResult run_weyl_robin_pair(const Params& p, bool dry) {
  const Geometry geom = geometry_from(p);
  const ModelOperator op = operator_from(p);
  const double b1 = p.num("b1"), b2 = p.num("b2");
  const double lambda = p.num("lambda"), R = p.num("R");
  ExperimentResult res;
  if (dry) return res;
  auto series = svalues_robin_pair(b1, b2, lambda, R, geom, op);
  const double w = 3.0 / (geom.n - 1);
  detail::weyl_series_result(series, w, -w, res);
  // derived large-mode constant s(xi) |xi|^3 -> |b2-b1|/2 on the n=2 slab
  double best = -1.0, tail_const = 0.0;
  for (std::size_t j = 0; j < series.size(); ++j) {
    const double mod = series.source_modes[j].xi_norm();
    if (mod > best) {
      best = mod;
      tail_const = series.values[j] * std::pow(mod, 3.0);
    }
  }
  res.summary["tail_mode_modulus"] = detail::fmt(best);
  res.summary["tail_constant"] = detail::fmt(tail_const);
  res.summary["half_b_gap"] = detail::fmt(0.5 * std::abs(b2 - b1));
  return res;
}

inline ExperimentResult run_weyl_iterates(const Params& p, bool dry) {
  detail::require_slab(p, "weyl-iterates");
  const Geometry geom = geometry_from(p);
  const ModelOperator op = operator_from(p);
  const double b = p.num("b"), R = p.num("R");
  const int np = static_cast<int>(p.integer("np"));
  const int gridN = static_cast<int>(p.integer("grid_n"));
  if (np < 1 || np > 3) throw ConfigError(p.line_of("np"), "np must be 1, 2 or 3");
  ExperimentResult res;
  if (dry) return res;
  auto series = svalues_iterates(Realization::robin(b), np, R, geom, op, gridN);
  const double w = 2.0 * np / (geom.n - 1);
  detail::weyl_series_result(series, w, -w, res);
  return res;
}

inline ExperimentResult run_dirichlet_weyl(const Params& p, bool dry) {
  detail::require_slab(p, "dirichlet-weyl");
  const Geometry geom = geometry_from(p);
  const ModelOperator op = operator_from(p);
  const double R = p.num("R");
  const int kMax = static_cast<int>(p.integer("k_max"));
  std::vector<double> ts = p.num_list("t");
  ExperimentResult res;
  if (dry) return res;
  std::sort(ts.begin(), ts.end());
  WeylCountTable table = dirichlet_weyl(R, kMax, geom, op, ts);
  res.header = {"t", "count", "c_A_t", "ratio"};
  for (std::size_t i = 0; i < table.t.size(); ++i) {
    const double cat = table.c_A * std::pow(table.t[i], 0.5 * geom.n);
    res.rows.push_back({detail::fmt(table.t[i]), std::to_string(table.count[i]),
                        detail::fmt(cat), detail::fmt(table.count[i] / cat)});
  }
  res.summary["c_A"] = detail::fmt(table.c_A);
  return res;
}

inline ExperimentResult run_lowerbound_scan(const Params& p, bool dry) {
  const Geometry geom = geometry_from(p);
  const ModelOperator op = operator_from(p);
  std::vector<double> mus = p.num_list("mu");
  const double R = p.num("R");
  for (double mu : mus)
    if (!(mu < 0.0)) throw ConfigError(p.line_of("mu"), "all mu must be negative");
  ExperimentResult res;
  if (dry) return res;
  std::sort(mus.begin(), mus.end(), std::greater<double>());  // toward -infinity
  auto scan = q_mu_scan(mus, geom, op, R);
  res.header = {"mu", "bound", "minimizer_modulus", "at_edge"};
  int edge = 0;
  for (const auto& e : scan) {
    res.rows.push_back({detail::fmt(e.mu), detail::fmt(e.bound),
                        detail::fmt(e.minimizer_modulus), detail::fmt_bool(e.at_edge)});
    edge += e.at_edge ? 1 : 0;
  }
  res.summary["monotone"] = detail::fmt_bool(q_mu_monotone(scan));
  res.summary["edge_warnings"] = std::to_string(edge);
  if (edge > 0)
    res.message = "lowerbound-scan: minimizer at the truncation edge for " +
                  std::to_string(edge) + " value(s) of mu; increase R";
  return res;
}

inline ExperimentResult run_birman_check(const Params& p, bool dry) {
  const Geometry geom = geometry_from(p);
  const ModelOperator op = operator_from(p);
  const double R = p.num("R");
  const int gridN = static_cast<int>(p.integer("grid_n"));
  std::vector<double> bs;
  if (p.has("b")) {
    bs.push_back(p.num("b"));
  } else {
    const long count = p.integer("count");
    if (count < 1) throw ConfigError(p.line_of("count"), "count must be >= 1");
    const double bmin = p.num("b_min"), bmax = p.num("b_max");
    if (!(bmin <= bmax)) throw ConfigError(p.line_of("b_min"), "need b_min <= b_max");
    std::mt19937_64 rng(static_cast<std::uint64_t>(p.integer("seed")));
    for (long i = 0; i < count; ++i) bs.push_back(detail::draw_uniform(rng, bmin, bmax));
  }
  ExperimentResult res;
  if (dry) return res;
  res.header = {"b",          "m_A_gamma", "m_L_minushalf", "m_realization", "bound_rhs",
                "margin",     "hypothesis_ok", "inequality_ok"};
  int violations = 0;
  double fd_err = 0.0;
  for (double b : bs) {
    LowerBoundReport rep = birman_check(Realization::robin(b), geom, op, R, gridN);
    res.rows.push_back({detail::fmt(b), detail::fmt(rep.m_A_gamma),
                        detail::fmt(rep.m_L_minushalf), detail::fmt(rep.m_realization),
                        detail::fmt(rep.bound_rhs), detail::fmt(rep.margin),
                        detail::fmt_bool(rep.hypothesis_ok),
                        detail::fmt_bool(rep.inequality_ok)});
    if (rep.hypothesis_ok && !rep.inequality_ok) ++violations;
    fd_err = std::max(fd_err, rep.fd_error_estimate);
  }
  res.summary["violations"] = std::to_string(violations);
  res.summary["fd_error_estimate"] = detail::fmt(fd_err);
  if (violations > 0) {
    res.assertion_failed = true;
    res.message = "birman-check: inequality violated for " + std::to_string(violations) +
                  " configuration(s)";
  }
  return res;
}

inline ExperimentResult run_garding_check(const Params& p, bool dry) {
  const Geometry geom = geometry_from(p);
  const ModelOperator op = operator_from(p);
  const double R = p.num("R");
  const int gridN = static_cast<int>(p.integer("grid_n"));
  const std::string& bc = p.str("bc");
  Realization real = Realization::robin(0.0);
  if (bc == "robin") {
    if (!p.has("b")) throw ConfigError(p.line_of("bc"), "bc = robin requires key b");
    real = Realization::robin(p.num("b"));
  } else if (bc == "poly") {
    if (!p.has("coeffs")) throw ConfigError(p.line_of("bc"), "bc = poly requires key coeffs");
    std::vector<cplx> cs;
    for (double v : p.num_list("coeffs")) cs.emplace_back(v, 0.0);
    if (cs.size() > 2)
      throw ConfigError(p.line_of("coeffs"), "poly boundary conditions are affine in |xi'|");
    real = Realization{BoundarySymbol::poly_modulus(cs), std::nullopt};
  } else {
    throw ConfigError(p.line_of("bc"), "bc must be robin or poly");
  }
  std::optional<bool> expect;
  if (p.has("expect")) {
    const std::string& e = p.str("expect");
    if (e == "holds")
      expect = true;
    else if (e == "fails")
      expect = false;
    else
      throw ConfigError(p.line_of("expect"), "expect must be holds or fails");
  }
  ExperimentResult res;
  if (dry) return res;
  GardingReport rep = garding_check(l_symbol(real, geom, op), geom, op, R, gridN);
  res.header = {"holds", "symbol_holds", "form_holds", "c", "k", "cp", "kp", "witness"};
  res.rows.push_back({detail::fmt_bool(rep.holds), detail::fmt_bool(rep.symbol_holds),
                      detail::fmt_bool(rep.form_holds), detail::fmt(rep.c),
                      detail::fmt(rep.k), detail::fmt(rep.cp), detail::fmt(rep.kp),
                      rep.witness ? rep.witness->label() : ""});
  res.summary["holds"] = detail::fmt_bool(rep.holds);
  if (expect && rep.holds != *expect) {
    res.assertion_failed = true;
    res.message = std::string("garding-check: expected ") + (*expect ? "holds" : "fails") +
                  " but the symbol test reports " + (rep.holds ? "holds" : "fails");
  }
  return res;
}

inline ExperimentResult run_diagram_check(const Params& p, bool dry) {
  const Geometry geom = geometry_from(p);
  const ModelOperator op = operator_from(p);
  const double b = p.num("b");
  const long count = p.integer("count");
  const int R = static_cast<int>(p.integer("R"));
  const int gridN = static_cast<int>(p.integer("grid_n"));
  const double lmin = p.num("lam_min"), lmax = p.num("lam_max");
  const double tol = p.num("tol"), tol_inv = p.num("tol_inv");
  if (count < 1) throw ConfigError(p.line_of("count"), "count must be >= 1");
  if (!(lmin < lmax)) throw ConfigError(p.line_of("lam_min"), "need lam_min < lam_max");
  if (!(lmax < op.msq))
    throw ConfigError(p.line_of("lam_max"), "lam_max must stay below msq");
  ExperimentResult res;
  if (dry) return res;

  const Realization real = Realization::robin(b);
  std::mt19937_64 rng(static_cast<std::uint64_t>(p.integer("seed")));
  std::vector<Mode> modes(count);
  std::vector<double> lams(count);
  for (long i = 0; i < count; ++i) {  // pre-drawn in row order
    std::vector<int> xi(geom.n - 1);
    for (int& c : xi) c = detail::draw_int(rng, -R, R);
    modes[i] = make_mode(xi, op);
    lams[i] = detail::draw_uniform(rng, lmin, lmax);
  }
  std::vector<DiagramResiduals> out(count);
  std::vector<std::string> errs(count);
  parallel_for(count, [&](std::size_t i) {
    try {
      out[i] = diagram_check(real, lams[i], modes[i], gridN, geom, op);
    } catch (const std::exception& ex) {
      errs[i] = ex.what();
    }
  });
  for (const auto& e : errs)
    if (!e.empty()) throw std::domain_error(e);

  res.header = {"draw", "mode", "lambda", "null_residual", "pairing_residual",
                "inversion_residual"};
  double wn = 0.0, wp = 0.0, wi = 0.0;
  for (long i = 0; i < count; ++i) {
    res.rows.push_back({std::to_string(i), modes[i].label(), detail::fmt(lams[i]),
                        detail::fmt(out[i].null_residual),
                        detail::fmt(out[i].pairing_residual),
                        detail::fmt(out[i].inversion_residual)});
    wn = std::max(wn, out[i].null_residual);
    wp = std::max(wp, out[i].pairing_residual);
    wi = std::max(wi, out[i].inversion_residual);
  }
  res.summary["max_null_residual"] = detail::fmt(wn);
  res.summary["max_pairing_residual"] = detail::fmt(wp);
  res.summary["max_inversion_residual"] = detail::fmt(wi);
  if (wn > tol || wp > tol || wi > tol_inv) {
    res.assertion_failed = true;
    res.message = "diagram-check: residuals exceed tolerances (null " + detail::fmt(wn) +
                  ", pairing " + detail::fmt(wp) + ", inversion " + detail::fmt(wi) + ")";
  }
  return res;
}

inline ExperimentResult run_one(const std::string& name, const Params& p, bool dry) {
  if (name == "krein-check") return run_krein_check(p, dry);
  if (name == "mfunction-scan") return run_mfunction_scan(p, dry);
  if (name == "weyl-robin-dirichlet") return run_weyl_robin_dirichlet(p, dry);
  if (name == "weyl-robin-pair") return run_weyl_robin_pair(p, dry);
  if (name == "weyl-iterates") return run_weyl_iterates(p, dry);
  if (name == "dirichlet-weyl") return run_dirichlet_weyl(p, dry);
  if (name == "lowerbound-scan") return run_lowerbound_scan(p, dry);
  if (name == "birman-check") return run_birman_check(p, dry);
  if (name == "garding-check") return run_garding_check(p, dry);
  if (name == "diagram-check") return run_diagram_check(p, dry);
  throw std::logic_error("run_one: unreachable");
}

/// Parse, validate everything up front, then execute section by section.
/// Exit codes: 0 ok, 2 validation failure, 3 failed assertion or domain error.
inline int run(const std::string& configPath, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  std::ifstream in(configPath, std::ios::binary);
  if (!in) {
    err << "error: cannot read config file " << configPath << "\n";
    return 2;
  }
  std::stringstream buf;
  buf << in.rdbuf();

  std::vector<ConfigSection> sections;
  try {
    sections = parse_config_text(buf.str());
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return 2;
  }
  if (sections.empty()) {
    err << "config error: no experiments listed in " << configPath << "\n";
    return 2;
  }

  struct Plan {
    const ExperimentInfo* info;
    Params params;
    std::filesystem::path csv, meta;
  };
  std::vector<Plan> plans;
  std::set<std::string> outputs;
  for (const auto& sec : sections) {
    const ExperimentInfo* info = find_experiment(sec.name);
    if (!info) {
      err << "config error: line " << sec.line << ": unknown experiment '" << sec.name
          << "'\n";
      return 2;
    }
    try {
      Params params(sec, *info);
      run_one(info->name, params, /*dry=*/true);  // full key validation, no compute
      std::filesystem::path dir(params.str("output"));
      Plan plan{info, std::move(params), dir / (sec.name + ".csv"),
                dir / (sec.name + ".meta")};
      if (!outputs.insert(plan.csv.string()).second) {
        err << "config error: line " << sec.line << ": output file "
            << plan.csv.string() << " written by more than one section\n";
        return 2;
      }
      plans.push_back(std::move(plan));
    } catch (const ConfigError& ex) {
      err << "config error: " << ex.what() << "\n";
      return 2;
    }
  }

  int exit_code = 0;
  for (const auto& plan : plans) {
    ExperimentResult res;
    try {
      res = run_one(plan.info->name, plan.params, /*dry=*/false);
    } catch (const std::exception& ex) {
      err << "error: " << plan.info->name << ": " << ex.what() << "\n";
      return 3;
    }
    std::error_code ec;
    std::filesystem::create_directories(plan.csv.parent_path(), ec);
    try {
      detail::write_atomic(plan.csv, detail::csv_text(res));
      detail::write_atomic(plan.meta, detail::meta_text(*plan.info, plan.params, res));
    } catch (const std::exception& ex) {
      err << "error: " << ex.what() << "\n";
      return 2;
    }
    if (!res.message.empty()) err << res.message << "\n";
    if (res.assertion_failed) exit_code = 3;
    out << plan.info->name << ": wrote " << plan.csv.string() << " ("
        << res.rows.size() << " rows)\n";
  }
  return exit_code;
}

/// Stable text table: name, equation tag, and the key schema per experiment.
inline std::string list_experiments() {
  std::ostringstream os;
  for (const auto& e : experiment_registry()) {
    os << e.name << " → " << e.equation << "\n";
    os << "    required:";
    if (e.required.empty()) os << " (none)";
    for (const auto& k : e.required) os << " " << k;
    os << "\n    optional:";
    for (std::size_t i = 0; i < e.optional.size(); ++i)
      os << (i ? ", " : " ") << e.optional[i].first << "="
         << (e.optional[i].second.empty() ? "unset" : e.optional[i].second);
    os << "\n";
  }
  return os.str();
}

}  // namespace lab
