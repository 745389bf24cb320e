#ifndef KWAVE_CLI_HPP
#define KWAVE_CLI_HPP

// Batch front end: JSON config in, report.json + CSV artifacts out.
// Exit codes: 0 pass, 2 verdict fail, 1 error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kwave/error.hpp"
#include "kwave/expr.hpp"
#include "kwave/implicit_solution.hpp"
#include "kwave/involution.hpp"
#include "kwave/io.hpp"
#include "kwave/model.hpp"
#include "kwave/parallel.hpp"
#include "kwave/showcase.hpp"
#include "kwave/surface.hpp"
#include "kwave/wave_algebra.hpp"
#include "kwave/waves1d.hpp"

namespace kwave::cli {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

inline std::string child(const std::string& ptr, const std::string& key) { return ptr + "/" + key; }
inline std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

inline const json& require(const json& obj, const std::string& ptr, const std::string& key) {
  if (!obj.is_object()) throw ConfigError(ptr.empty() ? "/" : ptr, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(child(ptr, key), "missing required key");
  return *it;
}

inline const json* find(const json& obj, const std::string& key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw ConfigError(ptr, "expected a number");
  return j.get<double>();
}

inline int integer(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw ConfigError(ptr, "expected an integer");
  return j.get<int>();
}

inline std::string string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw ConfigError(ptr, "expected a string");
  return j.get<std::string>();
}

inline bool boolean(const json& j, const std::string& ptr) {
  if (!j.is_boolean()) throw ConfigError(ptr, "expected true or false");
  return j.get<bool>();
}

inline double number_or(const json& obj, const std::string& ptr, const std::string& key, double def) {
  const json* j = find(obj, key);
  return j ? number(*j, child(ptr, key)) : def;
}

inline int integer_or(const json& obj, const std::string& ptr, const std::string& key, int def) {
  const json* j = find(obj, key);
  return j ? integer(*j, child(ptr, key)) : def;
}

inline bool boolean_or(const json& obj, const std::string& ptr, const std::string& key, bool def) {
  const json* j = find(obj, key);
  return j ? boolean(*j, child(ptr, key)) : def;
}

inline std::string string_or(const json& obj, const std::string& ptr, const std::string& key, std::string def) {
  const json* j = find(obj, key);
  return j ? string(*j, child(ptr, key)) : def;
}

inline const json& array(const json& j, const std::string& ptr, std::optional<std::size_t> size = std::nullopt) {
  if (!j.is_array()) throw ConfigError(ptr, "expected an array");
  if (size && j.size() != *size)
    throw ConfigError(ptr, "expected " + std::to_string(*size) + " entries, found " + std::to_string(j.size()));
  return j;
}

inline Vector vector(const json& j, const std::string& ptr, std::optional<std::size_t> size = std::nullopt) {
  array(j, ptr, size);
  Vector v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = number(j[i], child(ptr, i));
  return v;
}

/// Numbers are accepted as constant expressions.
inline Expr expression(const json& j, const std::string& ptr) {
  try {
    if (j.is_number()) return Expr::constant(j.get<double>());
    return Expr::parse(string(j, ptr));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(ptr, e.what());
  }
}

inline CompiledExpr compiled(const json& j, const std::string& ptr, const std::vector<std::string>& vars) {
  const Expr e = expression(j, ptr);
  try {
    return e.compile(vars);
  } catch (const Error& err) {
    throw ConfigError(ptr, err.what());
  }
}

/// Vector field from an array of expressions in the given variables.
inline VectorField field(const json& j, const std::string& ptr, const std::vector<std::string>& vars,
                         std::size_t size) {
  array(j, ptr, size);
  std::vector<CompiledExpr> comps;
  for (std::size_t i = 0; i < j.size(); ++i) comps.push_back(compiled(j[i], child(ptr, i), vars));
  return [comps](const Vector& u) {
    Vector out(static_cast<int>(comps.size()));
    const std::span<const double> vals(u.data(), static_cast<std::size_t>(u.size()));
    for (std::size_t i = 0; i < comps.size(); ++i) out[static_cast<int>(i)] = comps[i](vals);
    return out;
  };
}

inline double bound(const json& j, const std::string& ptr, double inf) {
  if (j.is_null()) return inf;
  return number(j, ptr);
}

inline SystemModel build_model(const json& cfg) {
  const std::string ptr = "/model";
  const json& m = require(cfg, "", "model");
  const std::string name = string(require(m, ptr, "name"), child(ptr, "name"));
  if (name != "custom") {
    Bindings params;
    if (const json* p = find(m, "params")) {
      if (!p->is_object()) throw ConfigError(child(ptr, "params"), "expected an object");
      for (auto it = p->begin(); it != p->end(); ++it)
        params[it.key()] = number(it.value(), child(child(ptr, "params"), it.key()));
    }
    try {
      return registry_get(name, params);
    } catch (const PreconditionError& e) {
      throw ConfigError(name == "burgers" || name == "barotropic" || name == "mhd" ? child(ptr, "params")
                                                                                   : child(ptr, "name"),
                        e.what());
    }
  }
  const int p = integer(require(m, ptr, "p"), child(ptr, "p"));
  const int q = integer(require(m, ptr, "q"), child(ptr, "q"));
  if (p < 1) throw ConfigError(child(ptr, "p"), "p must be >= 1");
  if (q < 1) throw ConfigError(child(ptr, "q"), "q must be >= 1");
  std::vector<std::string> unknowns = numbered_names("u", q);
  if (const json* u = find(m, "unknowns")) {
    array(*u, child(ptr, "unknowns"), q);
    unknowns.clear();
    for (std::size_t i = 0; i < u->size(); ++i) unknowns.push_back(string((*u)[i], child(child(ptr, "unknowns"), i)));
  }
  const std::string mp = child(ptr, "matrices");
  const json& mats = array(require(m, ptr, "matrices"), mp, p);
  std::vector<std::vector<std::vector<Expr>>> entries(p);
  for (int i = 0; i < p; ++i) {
    const std::string ip = child(mp, i);
    array(mats[i], ip, q);
    for (int a = 0; a < q; ++a) {
      const std::string ap = child(ip, a);
      array(mats[i][a], ap, q);
      std::vector<Expr> row;
      for (int b = 0; b < q; ++b) {
        Expr e = expression(mats[i][a][b], child(ap, b));
        for (const auto& v : e.free_variables())
          if (std::find(unknowns.begin(), unknowns.end(), v) == unknowns.end())
            throw ConfigError(child(ap, b), "unbound variable '" + v + "'");
        row.push_back(std::move(e));
      }
      entries[i].push_back(std::move(row));
    }
  }
  ModelDomain domain(q);
  if (const json* d = find(m, "domain")) {
    const std::string dp = child(ptr, "domain");
    const double inf = std::numeric_limits<double>::infinity();
    if (const json* lo = find(*d, "lower")) {
      const json* hi = find(*d, "upper");
      array(*lo, child(dp, "lower"), q);
      if (hi) array(*hi, child(dp, "upper"), q);
      for (int i = 0; i < q; ++i)
        domain.constrain(i, bound((*lo)[i], child(child(dp, "lower"), i), -inf),
                         hi ? bound((*hi)[i], child(child(dp, "upper"), i), inf) : inf);
    } else if (const json* hi = find(*d, "upper")) {
      array(*hi, child(dp, "upper"), q);
      for (int i = 0; i < q; ++i) domain.constrain(i, -inf, bound((*hi)[i], child(child(dp, "upper"), i), inf));
    }
    const json* slo = find(*d, "sample_lower");
    const json* shi = find(*d, "sample_upper");
    if (slo || shi) {
      if (!slo || !shi) throw ConfigError(dp, "sample_lower and sample_upper go together");
      const Vector a = vector(*slo, child(dp, "sample_lower"), q);
      const Vector b = vector(*shi, child(dp, "sample_upper"), q);
      for (int i = 0; i < q; ++i) {
        try {
          domain.sample_box(i, a[i], b[i]);
        } catch (const PreconditionError& e) {
          throw ConfigError(child(child(dp, "sample_lower"), i), e.what());
        }
      }
    }
  }
  const std::string mname = string_or(m, ptr, "label", "custom");
  return make_custom(mname, p, q, entries, std::move(domain), unknowns);
}

inline std::vector<SimpleElement> build_elements(const json& cfg, const SystemModel& model) {
  const std::string ptr = "/elements";
  const json& els = array(require(cfg, "", "elements"), ptr);
  std::vector<SimpleElement> out;
  for (std::size_t i = 0; i < els.size(); ++i) {
    const std::string ep = child(ptr, i);
    SimpleElement e;
    e.gamma = field(require(els[i], ep, "gamma"), child(ep, "gamma"), model.unknowns(), model.q());
    e.lambda.field = field(require(els[i], ep, "lambda"), child(ep, "lambda"), model.unknowns(), model.p());
    if (boolean_or(els[i], ep, "normalize", false))
      e.lambda.normalization = WaveCovector::Normalization::FirstComponentOne;
    out.push_back(std::move(e));
  }
  if (out.empty()) throw ConfigError(ptr, "at least one element is required");
  return out;
}

inline GridAxis axis(const json& j, const std::string& ptr) {
  GridAxis a;
  a.lo = number(require(j, ptr, "lo"), child(ptr, "lo"));
  a.hi = number(require(j, ptr, "hi"), child(ptr, "hi"));
  a.n = integer(require(j, ptr, "n"), child(ptr, "n"));
  if (a.n < 2 || !(a.lo < a.hi)) throw ConfigError(ptr, "axis needs n >= 2 and lo < hi");
  return a;
}

inline json vec_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

/// Non-finite numbers become null in JSON; keep them explicit as strings instead.
inline json num_json(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

inline std::vector<Vector> points_from(const json& task, const std::string& ptr, int p, std::uint64_t seed,
                                       std::size_t default_n) {
  if (const json* pts = find(task, "points")) {
    const std::string pp = child(ptr, "points");
    array(*pts, pp);
    std::vector<Vector> out;
    for (std::size_t i = 0; i < pts->size(); ++i) out.push_back(vector((*pts)[i], child(pp, i), p));
    return out;
  }
  if (const json* box = find(task, "box")) {
    const std::string bp = child(ptr, "box");
    const Vector lo = vector(require(*box, bp, "lo"), child(bp, "lo"), p);
    const Vector hi = vector(require(*box, bp, "hi"), child(bp, "hi"), p);
    const int n = integer_or(*box, bp, "n", static_cast<int>(default_n));
    return sample_box(lo, hi, static_cast<std::size_t>(n), seed);
  }
  throw ConfigError(child(ptr, "points"), "task needs 'points' or 'box'");
}

struct RunContext {
  std::string command;
  json cfg = json::object();
  std::filesystem::path out_dir = "kwave-out";
  bool emit_frames = false;
  std::uint64_t seed = 0;
  std::ostream* log = &std::cerr;
};

inline std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// subcommands; each returns the report and sets `pass`

inline json cmd_check_involutivity(const RunContext& ctx, bool& pass) {
  const SystemModel model = build_model(ctx.cfg);
  const auto els = build_elements(ctx.cfg, model);
  const json& num = ctx.cfg.contains("numerics") ? ctx.cfg["numerics"] : json::object();
  const int n = integer_or(num, "/numerics", "samples", 100);
  const double tol_wave = number_or(num, "/numerics", "tol_wave", 1e-10);
  const double tol_span = number_or(num, "/numerics", "tol_span", 1e-8);
  const double tol_abel = number_or(num, "/numerics", "tol_abelian", 1e-8);
  const auto samples = model.domain().samples(static_cast<std::size_t>(n), ctx.seed);

  json rep;
  json waves = json::array();
  bool wave_ok = true;
  for (std::size_t e = 0; e < els.size(); ++e) {
    double worst = 0.0, worst_rel = 0.0;
    for (const auto& u : samples) {
      const Matrix M = directional_matrix(model, els[e].lambda, u);
      double anorm = 0.0;
      for (const auto& A : model.matrices(u)) anorm = std::max(anorm, A.norm());
      const double r = (M * els[e].gamma(u)).norm();
      worst = std::max(worst, r);
      worst_rel = std::max(worst_rel, r / (1.0 + anorm));
    }
    const bool ok = worst_rel <= tol_wave;
    wave_ok = wave_ok && ok;
    waves.push_back({{"element", e}, {"max_residual", worst}, {"max_relative", worst_rel}, {"holds", ok}});
  }
  rep["wave_relation"] = waves;

  std::vector<Vector> lam0;
  for (const auto& e : els) lam0.push_back(e.lambda(samples.front()));
  const auto ind = check_independence(lam0);
  json indj;
  indj["pairwise_independent"] = ind.pairwise_independent;
  indj["dependent_pairs"] = json::array();
  for (auto [i, j] : ind.dependent_pairs) indj["dependent_pairs"].push_back({i, j});
  indj["flagged_triples"] = json::array();
  for (auto t : ind.dependent_triples) indj["flagged_triples"].push_back({t[0], t[1], t[2]});
  rep["independence"] = indj;

  bool span_ok = true;
  json spans = json::array();
  if (els.size() >= 2) {
    SpanOptions so;
    so.tol_span = tol_span;
    const auto cs = check_span_condition(els, samples, so);
    for (const auto& c : cs) {
      span_ok = span_ok && c.in_span;
      double hi_max = 0.0, hj_max = 0.0;
      for (std::size_t a = 0; a < samples.size(); ++a) {
        hi_max = std::max(hi_max, std::abs(c.h_i[a]));
        hj_max = std::max(hj_max, std::abs(c.h_j[a]));
      }
      spans.push_back({{"pair", {c.i, c.j}},
                       {"max_residual", c.max_residual},
                       {"in_span", c.in_span},
                       {"max_abs_h_i", hi_max},
                       {"max_abs_h_j", hj_max}});
    }
    const auto ab = check_abelian(els, samples, tol_abel);
    rep["abelian"] = {{"abelian", ab.abelian}, {"max_residual", ab.max_residual}};
  }
  rep["span_condition"] = spans;
  rep["samples"] = n;
  rep["tolerances"] = {{"tol_wave", tol_wave}, {"tol_span", tol_span}, {"tol_abelian", tol_abel}};
  pass = wave_ok && span_ok && ind.pairwise_independent;
  rep["verdict"] = pass;
  return rep;
}

inline json cmd_abelianize(const RunContext& ctx, bool& pass) {
  const SystemModel model = build_model(ctx.cfg);
  const auto els = build_elements(ctx.cfg, model);
  if (els.size() != 2) throw ConfigError("/elements", "abelianize needs exactly two elements");
  const std::string tp = "/task";
  const json& task = require(ctx.cfg, "", "task");
  AbelianizeOptions opt;
  const Vector base = vector(require(task, tp, "base"), child(tp, "base"), model.q());
  if (const json* a = find(task, "s1")) opt.s1 = axis(*a, child(tp, "s1"));
  if (const json* a = find(task, "s2")) opt.s2 = axis(*a, child(tp, "s2"));
  const json& num = ctx.cfg.contains("numerics") ? ctx.cfg["numerics"] : json::object();
  opt.tol_span = number_or(num, "/numerics", "tol_span", opt.tol_span);
  opt.tol_abel = number_or(num, "/numerics", "tol_abel", opt.tol_abel);
  opt.max_step = number_or(num, "/numerics", "max_step", opt.max_step);
  opt.domain = &model.domain();
  const auto res = abelianize_pair(els[0].gamma, els[1].gamma, base, opt);

  atomic_write(ctx.out_dir / "abelianize.csv", [&](std::ostream& os) {
    os << "s1,s2,";
    for (const auto& u : model.unknowns()) os << u << ',';
    os << "f1,f2,valid\n";
    for (std::size_t f = 0; f < res.chart.size(); ++f) {
      const Vector s = res.chart.coordinates(f);
      os << csv_number(s[0]) << ',' << csv_number(s[1]) << ',';
      for (int a = 0; a < model.q(); ++a) os << (res.valid[f] ? csv_number(res.points[f][a]) : "nan") << ',';
      os << csv_number(res.f1[f]) << ',' << csv_number(res.f2[f]) << ',' << int(res.valid[f]) << '\n';
    }
  });
  json rep;
  rep["already_abelian"] = res.already_abelian;
  rep["degenerate"] = res.degenerate;
  if (!res.warning.empty()) rep["warning"] = res.warning;
  rep["max_rescaled_bracket"] = res.max_rescaled_bracket;
  rep["bracket_tolerance"] = res.bracket_tolerance;
  rep["max_span_residual"] = res.max_span_residual;
  std::size_t valid = 0;
  for (auto v : res.valid) valid += v;
  rep["valid_nodes"] = valid;
  rep["nodes"] = res.chart.size();
  rep["tolerances"] = {{"tol_span", opt.tol_span}, {"tol_abel", opt.tol_abel}, {"max_step", opt.max_step}};
  rep["artifacts"] = {"abelianize.csv"};
  pass = res.verified() && !res.degenerate;
  rep["verdict"] = pass;
  return rep;
}

inline json cmd_surface(const RunContext& ctx, bool& pass) {
  const SystemModel model = build_model(ctx.cfg);
  const auto els = build_elements(ctx.cfg, model);
  const std::string tp = "/task";
  const json& task = require(ctx.cfg, "", "task");
  const Vector base = vector(require(task, tp, "base"), child(tp, "base"), model.q());
  const json& axes = array(require(task, tp, "axes"), child(tp, "axes"), els.size());
  std::vector<GridAxis> ax;
  for (std::size_t i = 0; i < axes.size(); ++i) ax.push_back(axis(axes[i], child(child(tp, "axes"), i)));
  const json& num = ctx.cfg.contains("numerics") ? ctx.cfg["numerics"] : json::object();
  SurfaceOptions opt;
  opt.tol_path = number_or(num, "/numerics", "tol_path", opt.tol_path);
  opt.audit_fraction = number_or(num, "/numerics", "audit_fraction", opt.audit_fraction);
  opt.tol_abelian = number_or(num, "/numerics", "tol_abelian", opt.tol_abelian);
  opt.flow.step_tol = number_or(num, "/numerics", "step_tol", opt.flow.step_tol);
  opt.seed = ctx.seed;
  opt.flow.domain = &model.domain();
  SurfaceGrid grid;
  try {
    grid = SurfaceGrid(ax);
    for (int d = 0; d < grid.dims(); ++d) grid.origin(d);
  } catch (const PreconditionError& e) {
    throw ConfigError(child(tp, "axes"), e.what());
  }
  json rep;
  rep["tolerances"] = {{"tol_path", opt.tol_path},
                       {"audit_fraction", opt.audit_fraction},
                       {"tol_abelian", opt.tol_abelian},
                       {"step_tol", opt.flow.step_tol}};
  SurfaceMap s;
  try {
    s = integrate_surface(els, base, grid, opt);
  } catch (const PathIndependenceError& e) {
    rep["path_residual"] = e.residual();
    rep["worst_node"] = e.node();
    rep["error"] = e.what();
    pass = false;
    rep["verdict"] = false;
    return rep;
  }
  atomic_write(ctx.out_dir / "surface.csv", [&](std::ostream& os) { write_surface_csv(os, s); });
  rep["path_residual"] = s.path_residual;
  rep["audited_nodes"] = s.audited;
  rep["worst_node"] = s.worst_node;
  rep["invalid_nodes"] = s.invalid_count();
  rep["nodes"] = grid.size();
  rep["artifacts"] = {"surface.csv"};
  pass = true;
  if (boolean_or(task, tp, "check_lambda", false)) {
    const double tol = number_or(num, "/numerics", "tol_lambda", 1e-6);
    const bool normalized = boolean_or(task, tp, "normalized", false);
    const auto inv = check_lambda_involutivity(els, s, tol, normalized);
    json pairs = json::array();
    for (const auto& pr : inv.pairs)
      pairs.push_back({{"s", pr.s}, {"p", pr.p}, {"max_residual", pr.max_residual}, {"holds", pr.holds}});
    rep["lambda_involutivity"] = {{"pairs", pairs}, {"holds", inv.holds}, {"normalized", normalized}};
    rep["tolerances"]["tol_lambda"] = tol;
    pass = inv.holds;
  }
  rep["verdict"] = pass;
  return rep;
}

/// Implicit solution from task.solution: f (expressions in r1..rk), lambda (per wave, in the
/// model unknowns), optional gamma.
inline ImplicitSolution build_solution(const RunContext& ctx, const SystemModel& model, const json& task,
                                       const std::string& tp) {
  const std::string sp = child(tp, "solution");
  const json& js = require(task, tp, "solution");
  const json& lam = array(require(js, sp, "lambda"), child(sp, "lambda"));
  const int k = static_cast<int>(lam.size());
  if (k < 1) throw ConfigError(child(sp, "lambda"), "at least one covector is required");
  std::vector<WaveCovector> ls;
  for (int s = 0; s < k; ++s)
    ls.push_back({field(lam[s], child(child(sp, "lambda"), s), model.unknowns(), model.p())});
  const VectorField f = field(require(js, sp, "f"), child(sp, "f"), numbered_names("r", k), model.q());
  std::vector<VectorField> gammas;
  if (const json* g = find(js, "gamma")) {
    array(*g, child(sp, "gamma"), k);
    for (int s = 0; s < k; ++s) gammas.push_back(field((*g)[s], child(child(sp, "gamma"), s), model.unknowns(), model.q()));
  }
  auto sol = closed_form_solution(model.p(), model.q(), f, {}, ls, gammas);
  sol.domain = model.domain();
  (void)ctx;
  return sol;
}

inline json cmd_implicit_eval(const RunContext& ctx, bool& pass) {
  const SystemModel model = build_model(ctx.cfg);
  const std::string tp = "/task";
  const json& task = require(ctx.cfg, "", "task");
  const auto sol = build_solution(ctx, model, task, tp);
  const json& num = ctx.cfg.contains("numerics") ? ctx.cfg["numerics"] : json::object();
  SolveOptions so;
  so.tol_cat = number_or(num, "/numerics", "tol_cat", so.tol_cat);
  so.tol_fix = number_or(num, "/numerics", "tol_fix", so.tol_fix);
  const double h = number_or(num, "/numerics", "h", 1e-4);
  const auto points = points_from(task, tp, model.p(), ctx.seed, 50);

  struct Row {
    Vector u;
    double det = 0.0, residual = 0.0, rank_ratio = 0.0;
    int rank = 0;
    std::string error;
  };
  std::vector<Row> rows(points.size());
  parallel_for(points.size(), [&](std::size_t a) {
    try {
      const auto ps = solve_point(sol, points[a], std::nullopt, so);
      const auto dec = derivative_matrix(sol, points[a], ps.u, ps.phi);
      rows[a].u = ps.u;
      rows[a].det = ps.phi.det;
      rows[a].residual = ps.residual;
      rows[a].rank = dec.rank;
      const auto& sv = dec.singular_values;
      rows[a].rank_ratio = sv.size() > sol.k && sv[0] > 0 ? sv[sol.k] / sv[0] : 0.0;
    } catch (const CatastropheError& e) {
      rows[a].error = "catastrophe";
      rows[a].det = e.determinant();
    } catch (const Error& e) {
      rows[a].error = e.what();
    }
  });
  std::size_t failures = 0, catastrophes = 0;
  double max_ratio = 0.0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++failures;
      if (r.error == "catastrophe") ++catastrophes;
    } else {
      max_ratio = std::max(max_ratio, r.rank_ratio);
    }
  }
  atomic_write(ctx.out_dir / "field.csv", [&](std::ostream& os) {
    for (const auto& c : model.coordinates()) os << c << ',';
    for (const auto& u : model.unknowns()) os << u << ',';
    os << "det_phi,residual,status\n";
    for (std::size_t a = 0; a < points.size(); ++a) {
      for (int i = 0; i < model.p(); ++i) os << csv_number(points[a][i]) << ',';
      for (int i = 0; i < model.q(); ++i) os << (rows[a].error.empty() ? csv_number(rows[a].u[i]) : "nan") << ',';
      os << csv_number(rows[a].det) << ',' << csv_number(rows[a].residual) << ','
         << (rows[a].error.empty() ? "ok" : rows[a].error == "catastrophe" ? "catastrophe" : "error") << '\n';
    }
  });
  json rep;
  rep["points"] = points.size();
  rep["failures"] = failures;
  rep["catastrophes"] = catastrophes;
  rep["max_rank_ratio"] = max_ratio;
  if (boolean_or(task, tp, "check_residual", true) && failures == 0) {
    SolveOptions quiet = so;
    const auto rr = pde_residual(model, solution_sampler(sol, quiet), points, h);
    rep["pde_residual"] = {{"max", rr.max}, {"rms", rr.rms}};
  }
  rep["tolerances"] = {{"tol_cat", so.tol_cat}, {"tol_fix", so.tol_fix}, {"h", h}};
  rep["artifacts"] = {"field.csv"};
  pass = failures == 0;
  rep["verdict"] = pass;
  return rep;
}

inline json cmd_pfaffian_eval(const RunContext& ctx, bool& pass) {
  const std::string tp = "/task";
  const json& task = require(ctx.cfg, "", "task");
  const std::string sp = child(tp, "solution");
  const json& js = require(task, tp, "solution");
  const int p = integer(require(js, sp, "p"), child(sp, "p"));
  const json& lam = array(require(js, sp, "lambda_r"), child(sp, "lambda_r"));
  const int k = static_cast<int>(lam.size());
  if (k < 1) throw ConfigError(child(sp, "lambda_r"), "at least one covector is required");
  const auto rnames = numbered_names("r", k);
  std::vector<VectorField> lr;
  for (int s = 0; s < k; ++s) lr.push_back(field(lam[s], child(child(sp, "lambda_r"), s), rnames, p));
  VectorField psi;
  if (const json* ps = find(js, "psi")) psi = field(*ps, child(sp, "psi"), rnames, k);
  int q = k;
  VectorField f = [](const Vector& r) { return r; };
  if (const json* fj = find(js, "f")) {
    array(*fj, child(sp, "f"));
    q = static_cast<int>(fj->size());
    f = field(*fj, child(sp, "f"), rnames, q);
  }
  ImplicitSolution sol;
  sol.k = k;
  sol.p = p;
  sol.q = q;
  sol.f = f;
  sol.lambdas.resize(k);
  sol.pfaffian_lambda = [lr](int s, const Vector& r) { return lr[s](r); };
  if (psi) sol.psi = psi;
  Vector r0 = Vector::Zero(k);
  if (const json* g = find(task, "r0")) r0 = vector(*g, child(tp, "r0"), k);
  const auto points = points_from(task, tp, p, ctx.seed, 50);
  std::vector<std::optional<PfaffianSolution>> sols(points.size());
  std::vector<std::string> errs(points.size());
  parallel_for(points.size(), [&](std::size_t a) {
    try {
      sols[a] = solve_pfaffian_point(sol, points[a], r0);
    } catch (const Error& e) {
      errs[a] = e.what();
    }
  });
  std::size_t failures = 0;
  double max_res = 0.0;
  for (std::size_t a = 0; a < points.size(); ++a) {
    if (!sols[a]) ++failures;
    else max_res = std::max(max_res, sols[a]->residual);
  }
  atomic_write(ctx.out_dir / "pfaffian.csv", [&](std::ostream& os) {
    for (int i = 0; i < p; ++i) os << 'x' << i + 1 << ',';
    for (int s = 0; s < k; ++s) os << 'r' << s + 1 << ',';
    for (int i = 0; i < q; ++i) os << 'u' << i + 1 << ',';
    os << "residual,status\n";
    for (std::size_t a = 0; a < points.size(); ++a) {
      for (int i = 0; i < p; ++i) os << csv_number(points[a][i]) << ',';
      for (int s = 0; s < k; ++s) os << (sols[a] ? csv_number(sols[a]->r[s]) : "nan") << ',';
      for (int i = 0; i < q; ++i) os << (sols[a] ? csv_number(sols[a]->u[i]) : "nan") << ',';
      os << (sols[a] ? csv_number(sols[a]->residual) : "nan") << ',' << (sols[a] ? "ok" : "error") << '\n';
    }
  });
  json rep;
  rep["points"] = points.size();
  rep["failures"] = failures;
  rep["max_residual"] = max_res;
  rep["tolerances"] = {{"tol_newton", 1e-13}};
  rep["artifacts"] = {"pfaffian.csv"};
  pass = failures == 0;
  rep["verdict"] = pass;
  return rep;
}

inline json cmd_simulate2w(const RunContext& ctx, bool& pass) {
  const std::string tp = "/task";
  const json& task = require(ctx.cfg, "", "task");
  const Expr nu1 = expression(require(task, tp, "nu1"), child(tp, "nu1"));
  const Expr nu2 = expression(require(task, tp, "nu2"), child(tp, "nu2"));
  for (const auto& [e, key] : {std::pair{&nu1, "nu1"}, std::pair{&nu2, "nu2"}})
    for (const auto& v : e->free_variables())
      if (v != "r1" && v != "r2") throw ConfigError(child(tp, key), "unbound variable '" + v + "' (use r1, r2)");
  Vector r0 = Vector::Zero(2);
  if (const json* b = find(task, "background")) r0 = vector(*b, child(tp, "background"), 2);
  const DiagonalSystem sys = DiagonalSystem::from_expressions(nu1, nu2, r0[0], r0[1]);
  const std::string gp = child(tp, "grid");
  const json& g = require(task, tp, "grid");
  const double x_lo = number(require(g, gp, "x_lo"), child(gp, "x_lo"));
  const double x_hi = number(require(g, gp, "x_hi"), child(gp, "x_hi"));
  const int n = integer(require(g, gp, "n"), child(gp, "n"));
  if (n < 8 || !(x_lo < x_hi)) throw ConfigError(gp, "grid needs n >= 8 and x_lo < x_hi");
  const json& prof = array(require(task, tp, "profiles"), child(tp, "profiles"), 2);
  std::vector<CompiledExpr> pc;
  for (int s = 0; s < 2; ++s) pc.push_back(compiled(prof[s], child(child(tp, "profiles"), s), {"x"}));
  auto pf = [&](int s) {
    return [&pc, s](double x) {
      const double v[1] = {x};
      return pc[s](v);
    };
  };
  const InitialData data = InitialData::from_functions(x_lo, x_hi, n, pf(0), pf(1), number_or(task, tp, "t0", 0.0));
  SimOptions so;
  so.t_end = number(require(task, tp, "t_end"), child(tp, "t_end"));
  const std::string scheme = string_or(task, tp, "scheme", "characteristics");
  if (scheme == "characteristics") so.scheme = Scheme::Characteristics;
  else if (scheme == "upwind") so.scheme = Scheme::Upwind;
  else throw ConfigError(child(tp, "scheme"), "expected 'characteristics' or 'upwind'");
  const json& num = ctx.cfg.contains("numerics") ? ctx.cfg["numerics"] : json::object();
  so.cfl = number_or(num, "/numerics", "cfl", so.cfl);
  if (!(so.cfl > 0.0 && so.cfl <= 0.9)) throw ConfigError("/numerics/cfl", "cfl must lie in (0, 0.9]");
  so.frame_interval = number_or(task, tp, "frame_interval", 0.0);
  so.tracers_per_family = integer_or(task, tp, "tracers", so.tracers_per_family);
  so.eps_supp = number_or(num, "/numerics", "eps_supp", so.eps_supp);
  so.require_valid = false;
  const double tol_match = number_or(num, "/numerics", "tol_match", 1e-6);

  const SimResult res = simulate(sys, data, so);
  const auto el = elasticity_report(res, tol_match);

  json rep;
  json val;
  for (int s = 0; s < 2; ++s)
    val["support" + std::to_string(s + 1)] = {res.validation.support[s].a, res.validation.support[s].b};
  val["disjoint"] = res.validation.disjoint;
  val["ordered"] = res.validation.ordered;
  val["gap"] = res.validation.gap;
  val["violations"] = res.validation.violations;
  rep["validation"] = val;
  rep["scheme"] = scheme_name(res.scheme);
  rep["t_final"] = res.t_final;
  rep["steps"] = res.steps;
  rep["t1"] = res.t1 ? json(*res.t1) : json(nullptr);
  rep["t2"] = res.t2 ? json(*res.t2) : json(nullptr);
  rep["halted"] = res.halted;
  if (res.halted) rep["halt_reason"] = res.halt_reason;
  rep["invariant_drift"] = {res.max_drift[0], res.max_drift[1]};
  rep["range_expansion"] = {res.range_expansion[0], res.range_expansion[1]};
  json ej;
  ej["status"] = el.status;
  ej["verdict_available"] = el.verdict_available;
  ej["elastic"] = el.elastic;
  json fams = json::array();
  for (int s = 0; s < 2; ++s) {
    const auto& fe = el.family[s];
    fams.push_back({{"family", s + 1},
                    {"support_before", fe.support_before},
                    {"support_after", fe.support_after},
                    {"shift", fe.shift},
                    {"free_flight", fe.free_flight},
                    {"phase_shift", fe.phase_shift},
                    {"match_error", fe.match_error},
                    {"shape_compared", fe.shape_compared}});
  }
  ej["families"] = fams;
  rep["elasticity"] = ej;
  rep["tolerances"] = {{"cfl", so.cfl}, {"eps_supp", so.eps_supp}, {"tol_match", tol_match}};

  json artifacts = json::array();
  atomic_write(ctx.out_dir / "traces.csv", [&](std::ostream& os) { write_traces_csv(os, res); });
  artifacts.push_back("traces.csv");
  atomic_write(ctx.out_dir / "supports.csv", [&](std::ostream& os) {
    os << "t,a1,b1,a2,b2\n";
    for (std::size_t m = 0; m < res.times.size(); ++m) {
      os << csv_number(res.times[m]);
      for (double v : res.supports[m]) os << ',' << csv_number(v);
      os << '\n';
    }
  });
  artifacts.push_back("supports.csv");
  if (ctx.emit_frames) {
    for (std::size_t f = 0; f < res.frames.size(); ++f) {
      std::ostringstream name;
      name << "frame_" << std::setw(4) << std::setfill('0') << f << ".csv";
      atomic_write(ctx.out_dir / name.str(), [&](std::ostream& os) { write_frame_csv(os, res, res.frames[f]); });
      artifacts.push_back(name.str());
    }
  }
  rep["artifacts"] = artifacts;
  pass = res.validation.valid() && !res.halted && (!el.verdict_available || el.elastic) &&
         el.status != "interaction ongoing";
  rep["verdict"] = pass;
  return rep;
}

inline json cmd_showcase_mhd(const RunContext& ctx, const std::string& psi_src, bool& pass) {
  const json& task = ctx.cfg.contains("task") ? ctx.cfg["task"] : json::object();
  const std::string tp = "/task";
  Expr psi;
  try {
    psi = Expr::parse(psi_src);
  } catch (const Error& e) {
    throw ConfigError("--psi", e.what());
  }
  const double H0 = number_or(task, tp, "H0", 1.0);
  const double rho0 = number_or(task, tp, "rho0", 1.0);
  const double p0 = number_or(task, tp, "p0", 1.0);
  const int eps = integer_or(task, tp, "eps", 1);
  const json& num = ctx.cfg.contains("numerics") ? ctx.cfg["numerics"] : json::object();
  const double h = number_or(num, "/numerics", "h", 1e-4);
  const int n = integer_or(num, "/numerics", "samples", 200);
  const double tol_res = number_or(num, "/numerics", "tol_residual", 1e-6);
  const double tol_gauss = number_or(num, "/numerics", "tol_gauss", 5e-8);
  const double tol_h2 = number_or(num, "/numerics", "tol_h2", 1e-10);
  const double tol_wave = number_or(num, "/numerics", "tol_wave", 1e-10);
  AlfvenSolution sol;
  try {
    sol = alfven_build(psi, H0, rho0, p0, eps);
  } catch (const UnboundVariableError& e) {
    throw ConfigError("--psi", std::string(e.what()) + " (use x1, x2)");
  }
  const double pi = std::numbers::pi;
  Vector lo(4), hi(4);
  lo << 0.0, -pi, -pi, -1.0;
  hi << 1.0, pi, pi, 1.0;
  const auto points = sample_box(lo, hi, static_cast<std::size_t>(n), ctx.seed);
  const auto rep_a = alfven_verify(sol, points, h);

  const int grid_n = integer_or(task, tp, "grid", 65);
  atomic_write(ctx.out_dir / "alfven_field.csv", [&](std::ostream& os) {
    os << "x1,x2,rho,p,v1,v2,v3,H1,H2,H3\n";
    for (int i = 0; i < grid_n; ++i)
      for (int j = 0; j < grid_n; ++j) {
        Vector x(4);
        x << 0.0, -pi + 2 * pi * i / (grid_n - 1), -pi + 2 * pi * j / (grid_n - 1), 0.0;
        const Vector u = sol.state(x);
        os << csv_number(x[1]) << ',' << csv_number(x[2]);
        for (int a = 0; a < 8; ++a) os << ',' << csv_number(u[a]);
        os << '\n';
      }
  });
  json rep;
  rep["psi"] = psi.to_string();
  rep["parameters"] = {{"H0", H0}, {"rho0", rho0}, {"p0", p0}, {"eps", eps}};
  rep["max_grad_psi"] = sol.max_gradient;
  rep["residual"] = {{"max", rep_a.residual.max},
                     {"rms", rep_a.residual.rms},
                     {"per_equation", vec_json(rep_a.residual.per_equation)}};
  rep["gauss_max"] = rep_a.gauss_max;
  rep["h2_variation"] = rep_a.h2_variation;
  rep["alignment_max"] = rep_a.alignment_max;
  rep["time_derivative_max"] = rep_a.time_derivative_max;
  rep["wave_relation_max"] = rep_a.wave_relation_max;
  rep["points"] = n;
  rep["tolerances"] = {{"h", h}, {"tol_residual", tol_res}, {"tol_gauss", tol_gauss},
                       {"tol_h2", tol_h2}, {"tol_wave", tol_wave}};
  rep["artifacts"] = {"alfven_field.csv"};
  pass = rep_a.residual.max <= tol_res && rep_a.gauss_max <= tol_gauss && rep_a.h2_variation <= tol_h2 * H0 * H0 &&
         rep_a.wave_relation_max <= tol_wave * rep_a.wave_relation_scale &&
         rep_a.alignment_max <= 8 * std::numeric_limits<double>::epsilon() * rep_a.alignment_scale &&
         rep_a.time_derivative_max == 0.0;
  rep["verdict"] = pass;
  return rep;
}

inline json cmd_showcase_barotropic(const RunContext& ctx, bool& pass) {
  const json& task = ctx.cfg.contains("task") ? ctx.cfg["task"] : json::object();
  const std::string tp = "/task";
  const std::string variant = string_or(task, tp, "variant", "general");
  BarotropicSolution::Variant v;
  if (variant == "general") v = BarotropicSolution::Variant::General;
  else if (variant == "a-invariant") v = BarotropicSolution::Variant::AInvariant;
  else throw ConfigError(child(tp, "variant"), "expected 'general' or 'a-invariant'");
  std::vector<Expr> f;
  Expr g;
  if (const json* fj = find(task, "f")) {
    array(*fj, child(tp, "f"));
    for (std::size_t i = 0; i < fj->size(); ++i) f.push_back(expression((*fj)[i], child(child(tp, "f"), i)));
  } else if (v == BarotropicSolution::Variant::General) {
    f = {Expr::parse("0.1*tanh(x1)"), Expr::parse("0.1*tanh(x2)")};
  } else {
    f = {Expr::parse("0.5*x2^2"), Expr::parse("0")};
  }
  if (const json* gj = find(task, "g")) g = expression(*gj, child(tp, "g"));
  else g = Expr::parse("1 + 0.1*exp(-(x1^2 + x2^2))");
  const int n = static_cast<int>(f.size());
  BarotropicSolution sol;
  try {
    sol = barotropic_from_expressions(f, g, v);
  } catch (const UnboundVariableError& e) {
    throw ConfigError(child(tp, "f"), std::string(e.what()) + " (use x1..xn)");
  }
  const json& num = ctx.cfg.contains("numerics") ? ctx.cfg["numerics"] : json::object();
  const double h = number_or(num, "/numerics", "h", 1e-4);
  const int samples = integer_or(num, "/numerics", "samples", 200);
  const double t_max = number_or(task, tp, "t_max", 0.5);
  const double tol_res = number_or(num, "/numerics", "tol_residual", v == BarotropicSolution::Variant::General ? 1e-5 : 1e-6);
  const double tol_div = number_or(num, "/numerics", "tol_divergence", 5e-8);
  Vector lo(n + 1), hi(n + 1);
  lo[0] = 0.0;
  hi[0] = t_max;
  for (int i = 1; i <= n; ++i) {
    lo[i] = -1.0;
    hi[i] = 1.0;
  }
  const auto points = sample_box(lo, hi, static_cast<std::size_t>(samples), ctx.seed);
  const auto br = barotropic_verify(sol, points, h);

  const int grid_n = integer_or(task, tp, "grid", 41);
  if (n == 2) {
    atomic_write(ctx.out_dir / "barotropic_field.csv", [&](std::ostream& os) {
      os << "t,x1,x2,u1,u2,rho,det\n";
      for (double t : {0.0, 0.5 * t_max, t_max})
        for (int i = 0; i < grid_n; ++i)
          for (int j = 0; j < grid_n; ++j) {
            Vector x(2);
            x << -1.0 + 2.0 * i / (grid_n - 1), -1.0 + 2.0 * j / (grid_n - 1);
            const auto st = barotropic_eval(sol, t, x);
            os << csv_number(t) << ',' << csv_number(x[0]) << ',' << csv_number(x[1]) << ',' << csv_number(st.u[0])
               << ',' << csv_number(st.u[1]) << ',' << csv_number(st.rho) << ',' << csv_number(st.det) << '\n';
          }
    });
  }
  json rep;
  rep["variant"] = variant;
  rep["n"] = n;
  rep["f"] = json::array();
  for (const auto& e : f) rep["f"].push_back(e.to_string());
  rep["g"] = g.to_string();
  rep["momentum_max"] = br.momentum_max;
  rep["mass_max"] = br.mass_max;
  rep["residual_rms"] = br.residual_rms;
  pass = br.momentum_max <= tol_res && br.mass_max <= tol_res;
  rep["tolerances"] = {{"h", h}, {"tol_residual", tol_res}};
  if (v == BarotropicSolution::Variant::AInvariant) {
    rep["divergence_max"] = br.divergence_max;
    rep["transport_max"] = br.transport_max;
    rep["nilpotency_max"] = br.nilpotency_max;
    rep["tolerances"]["tol_divergence"] = tol_div;
    pass = pass && br.divergence_max <= tol_div && br.transport_max <= tol_res && br.nilpotency_max <= 1e-10;
  }
  rep["points"] = samples;
  rep["artifacts"] = n == 2 ? json{"barotropic_field.csv"} : json::array();
  rep["verdict"] = pass;
  return rep;
}

inline json cmd_residual(const RunContext& ctx, bool& pass) {
  const SystemModel model = build_model(ctx.cfg);
  const std::string tp = "/task";
  const json& task = require(ctx.cfg, "", "task");
  const VectorField fld = field(require(task, tp, "field"), child(tp, "field"), model.coordinates(), model.q());
  const json& num = ctx.cfg.contains("numerics") ? ctx.cfg["numerics"] : json::object();
  const double h = number_or(num, "/numerics", "h", 1e-4);
  const double tol = number_or(num, "/numerics", "tol_residual", 1e-6);
  const int order = integer_or(num, "/numerics", "order", 4);
  if (order != 2 && order != 4) throw ConfigError("/numerics/order", "order must be 2 or 4");
  const auto points = points_from(task, tp, model.p(), ctx.seed, 100);
  const auto rr = pde_residual(model, fld, points, h, order);
  atomic_write(ctx.out_dir / "residual.csv", [&](std::ostream& os) {
    for (const auto& c : model.coordinates()) os << c << ',';
    os << "residual\n";
    for (std::size_t a = 0; a < points.size(); ++a) {
      for (int i = 0; i < model.p(); ++i) os << csv_number(points[a][i]) << ',';
      os << csv_number(rr.per_point[a]) << '\n';
    }
  });
  json rep;
  rep["max"] = rr.max;
  rep["rms"] = rr.rms;
  rep["per_equation"] = vec_json(rr.per_equation);
  if (model.has_constraints())
    rep["constraints"] = {{"names", rr.constraint_names}, {"max", rr.constraint_max}, {"rms", rr.constraint_rms}};
  rep["points"] = points.size();
  rep["tolerances"] = {{"h", h}, {"tol_residual", tol}, {"order", order}};
  rep["artifacts"] = {"residual.csv"};
  pass = rr.max <= tol;
  rep["verdict"] = pass;
  return rep;
}

inline json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("/", "cannot open config file '" + path + "'");
  try {
    json j = json::parse(is);
    if (!j.is_object()) throw ConfigError("/", "config must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace detail

/// Entry point shared by the kwave binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"kwave: construct and verify Riemann k-wave solutions"};
  app.set_version_flag("--version", std::string("kwave ") + kVersion);
  app.require_subcommand(1);
  std::string config_path, out_dir, psi = "0.2*sin(x1)*sin(x2)", showcase_name;
  bool emit_frames = false;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"check-involutivity", "wave relation, independence, span and Abelian checks"},
      {"abelianize", "rescale a span-closed pair of fields to commuting fields"},
      {"surface", "integrate the solution surface over a Riemann-invariant grid"},
      {"implicit-eval", "evaluate an implicit solution at points"},
      {"pfaffian-eval", "solve the Pfaffian invariant relations at points"},
      {"simulate2w", "simulate two interacting Riemann invariants on the line"},
      {"showcase", "barotropic or mhd worked solution with verification"},
      {"residual", "PDE residual of a closed-form field"}};
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    auto* cfg = sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    if (name != "showcase") cfg->required();
    if (name == "simulate2w") sub->add_flag("--emit-frames", emit_frames, "write one CSV per recorded frame");
    if (name == "showcase") {
      sub->add_option("name", showcase_name, "barotropic or mhd")->required()->check(CLI::IsMember({"barotropic", "mhd"}));
      sub->add_option("--psi", psi, "stream function in x1, x2 (mhd)");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  const auto started = std::chrono::system_clock::now();
  RunContext ctx;
  ctx.command = command;
  ctx.log = &err;
  try {
    if (!config_path.empty()) ctx.cfg = load_config(config_path);
    if (const json* o = find(ctx.cfg, "output")) {
      ctx.out_dir = string_or(*o, "/output", "dir", ctx.out_dir.string());
      ctx.emit_frames = boolean_or(*o, "/output", "emit_frames", false);
    }
    if (const json* nm = find(ctx.cfg, "numerics")) {
      const json* s = find(*nm, "seed");
      if (s) {
        if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0))
          throw ConfigError("/numerics/seed", "seed must be a non-negative integer");
        ctx.seed = s->get<std::uint64_t>();
      }
    }
    if (!out_dir.empty()) ctx.out_dir = out_dir;
    ctx.emit_frames = ctx.emit_frames || emit_frames;

    bool pass = false;
    json rep;
    if (command == "check-involutivity") rep = cmd_check_involutivity(ctx, pass);
    else if (command == "abelianize") rep = cmd_abelianize(ctx, pass);
    else if (command == "surface") rep = cmd_surface(ctx, pass);
    else if (command == "implicit-eval") rep = cmd_implicit_eval(ctx, pass);
    else if (command == "pfaffian-eval") rep = cmd_pfaffian_eval(ctx, pass);
    else if (command == "simulate2w") rep = cmd_simulate2w(ctx, pass);
    else if (command == "residual") rep = cmd_residual(ctx, pass);
    else if (showcase_name == "mhd") rep = cmd_showcase_mhd(ctx, psi, pass);
    else rep = cmd_showcase_barotropic(ctx, pass);

    json report;
    report["command"] = command == "showcase" ? command + " " + showcase_name : command;
    report["version"] = kVersion;
    report["seed"] = ctx.seed;
    report["result"] = rep;
    report["verdict"] = pass ? "pass" : "fail";
    if (rep.contains("tolerances")) report["tolerances"] = rep["tolerances"];
    atomic_write(ctx.out_dir / "report.json", report.dump(2) + "\n");

    const auto finished = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(started);
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&tt), "%Y-%m-%dT%H:%M:%SZ");
    json meta;
    meta["started"] = ts.str();
    meta["elapsed_seconds"] = std::chrono::duration<double>(finished - started).count();
    meta["threads"] = worker_count();
    atomic_write(ctx.out_dir / "meta.json", meta.dump(2) + "\n");

    out << report["command"].get<std::string>() << ": " << (pass ? "pass" : "fail") << " (report "
        << (ctx.out_dir / "report.json").string() << ")\n";
    return pass ? 0 : 2;
  } catch (const ConfigError& e) {
    err << "config error at " << e.pointer() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace kwave::cli

#endif  // KWAVE_CLI_HPP
