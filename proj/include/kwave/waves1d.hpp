#ifndef KWAVE_WAVES1D_HPP
#define KWAVE_WAVES1D_HPP

// Two Riemann invariants on the line: r^s_t + nu_s(r^1, r^2) r^s_x = 0, s = 1, 2.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kwave/error.hpp"
#include "kwave/expr.hpp"

namespace kwave {

using Speed = std::function<double(double r1, double r2)>;

struct DiagonalSystem {
  Speed nu1, nu2;
  double r01 = 0.0, r02 = 0.0;  // background state
  /// Whether nu_s depends on r^s; probed numerically over the data range when unset.
  std::optional<bool> self1, self2;

  double nu(int s, double r1, double r2) const { return s == 0 ? nu1(r1, r2) : nu2(r1, r2); }
  double background(int s) const { return s == 0 ? r01 : r02; }

  /// Speeds as expressions in r1, r2.
  static DiagonalSystem from_expressions(const Expr& e1, const Expr& e2, double r01, double r02) {
    const std::vector<std::string> slots{"r1", "r2"};
    auto c1 = e1.compile(slots);
    auto c2 = e2.compile(slots);
    DiagonalSystem sys;
    sys.nu1 = [c1](double a, double b) {
      const double v[2] = {a, b};
      return c1(v);
    };
    sys.nu2 = [c2](double a, double b) {
      const double v[2] = {a, b};
      return c2(v);
    };
    sys.r01 = r01;
    sys.r02 = r02;
    sys.self1 = e1.free_variables().count("r1") > 0;
    sys.self2 = e2.free_variables().count("r2") > 0;
    return sys;
  }
};

/// Profiles r^s(t0, x) on a uniform grid.
struct InitialData {
  double x_lo = -1.0, x_hi = 1.0;
  int n = 0;
  double t0 = 0.0;
  std::vector<double> r1, r2;

  double dx() const { return (x_hi - x_lo) / (n - 1); }
  double x(int i) const { return i == n - 1 ? x_hi : x_lo + i * dx(); }
  const std::vector<double>& profile(int s) const { return s == 0 ? r1 : r2; }

  static InitialData from_functions(double x_lo, double x_hi, int n, const std::function<double(double)>& p1,
                                    const std::function<double(double)>& p2, double t0 = 0.0) {
    if (n < 8 || !(x_lo < x_hi)) throw PreconditionError("initial data needs n >= 8 and x_lo < x_hi");
    InitialData d;
    d.x_lo = x_lo;
    d.x_hi = x_hi;
    d.n = n;
    d.t0 = t0;
    d.r1.resize(n);
    d.r2.resize(n);
    for (int i = 0; i < n; ++i) {
      d.r1[i] = p1(d.x(i));
      d.r2[i] = p2(d.x(i));
    }
    return d;
  }
};

struct SupportInterval {
  int first = -1, last = -1;  // node indices
  double a = 0.0, b = 0.0;
  int components = 0;
  bool empty() const { return components == 0; }
};

namespace waves_detail {

/// Nodes where max(|forward|, |backward|) difference quotient exceeds eps * max.
inline SupportInterval detect_support(const std::vector<double>& r, double x_lo, double dx, double eps) {
  const int n = static_cast<int>(r.size());
  std::vector<double> d(n, 0.0);
  double dmax = 0.0;
  for (int i = 0; i < n; ++i) {
    const double fw = i + 1 < n ? std::abs(r[i + 1] - r[i]) / dx : 0.0;
    const double bw = i > 0 ? std::abs(r[i] - r[i - 1]) / dx : 0.0;
    d[i] = std::max(fw, bw);
    dmax = std::max(dmax, d[i]);
  }
  SupportInterval s;
  if (dmax == 0.0) return s;
  const double thr = eps * dmax;
  bool inside = false;
  for (int i = 0; i < n; ++i) {
    const bool on = d[i] > thr;
    if (on) {
      if (s.first < 0) s.first = i;
      s.last = i;
      if (!inside) ++s.components;
    }
    inside = on;
  }
  s.a = x_lo + s.first * dx;
  s.b = x_lo + s.last * dx;
  return s;
}

/// Cubic Lagrange interpolation over sorted nodes; `outside` beyond the node range.
/// A stencil of equal values returns that value exactly.
inline double interp_cubic(const std::vector<double>& xs, const std::vector<double>& vs, double x, double outside) {
  const int n = static_cast<int>(xs.size());
  if (n == 0 || x < xs.front() || x > xs.back()) return outside;
  if (n < 4) {
    // linear fallback
    const int j = std::clamp(static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1, 0,
                             std::max(0, n - 2));
    if (n == 1) return vs[0];
    const double w = (x - xs[j]) / (xs[j + 1] - xs[j]);
    return vs[j] + w * (vs[j + 1] - vs[j]);
  }
  int j = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
  j = std::clamp(j - 1, 0, n - 4);
  const double* X = &xs[j];
  const double* V = &vs[j];
  if (V[0] == V[1] && V[1] == V[2] && V[2] == V[3]) return V[0];
  for (int m = 0; m < 4; ++m)
    if (x == X[m]) return V[m];
  double out = 0.0;
  for (int m = 0; m < 4; ++m) {
    double w = 1.0;
    for (int l = 0; l < 4; ++l)
      if (l != m) w *= (x - X[l]) / (X[m] - X[l]);
    out += w * V[m];
  }
  return out;
}

/// Cubic interpolation of uniform grid data; `outside` beyond the grid.
inline double interp_uniform(const std::vector<double>& v, double x_lo, double dx, double x, double outside) {
  const int n = static_cast<int>(v.size());
  const double pos = (x - x_lo) / dx;
  if (!(pos >= 0.0 && pos <= n - 1)) return outside;
  int j = std::clamp(static_cast<int>(std::floor(pos)) - 1, 0, n - 4);
  const double* V = &v[j];
  if (V[0] == V[1] && V[1] == V[2] && V[2] == V[3]) return V[0];
  const double t = pos - j;  // in [0, 3]
  double out = 0.0;
  for (int m = 0; m < 4; ++m) {
    double w = 1.0;
    for (int l = 0; l < 4; ++l)
      if (l != m) w *= (t - l) / static_cast<double>(m - l);
    out += w * V[m];
  }
  return out;
}

inline double interp_linear_uniform(const std::vector<double>& v, double x_lo, double dx, double x, double outside) {
  const int n = static_cast<int>(v.size());
  const double pos = (x - x_lo) / dx;
  if (!(pos >= 0.0 && pos <= n - 1)) return outside;
  const int j = std::clamp(static_cast<int>(std::floor(pos)), 0, n - 2);
  const double w = pos - j;
  return v[j] + w * (v[j + 1] - v[j]);
}

/// Minimizes a unimodal function on [a, b].
template <class F>
double golden_section(F&& f, double a, double b, int iterations = 200) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline bool probe_self_coupling(const Speed& nu, int s, double lo, double hi, double other) {
  if (hi <= lo) hi = lo + 1.0;
  for (int i = 0; i <= 16; ++i) {
    const double a = lo + (hi - lo) * i / 16.0;
    const double b = a + 0.5 * (hi - lo) / 16.0 + 1e-3;
    const double va = s == 0 ? nu(a, other) : nu(other, a);
    const double vb = s == 0 ? nu(b, other) : nu(other, b);
    if (std::abs(va - vb) > 1e-14 * std::max(1.0, std::abs(va))) return true;
  }
  return false;
}

}  // namespace waves_detail

struct ValidationReport {
  SupportInterval support[2];
  bool disjoint = false;
  bool ordered = false;  // a1 < b1 < a2 < b2
  double gap = 0.0;      // c = min (nu1 - nu2) over sampled value pairs
  bool gap_ok = false;
  std::vector<std::string> violations;
  bool valid() const { return violations.empty(); }
};

/// Supports of dr^s/dx (threshold eps_supp relative to the maximum slope), their ordering and
/// disjointness, and the gap constant over the rectangle of data values.
inline ValidationReport validate_initial_data(const DiagonalSystem& sys, const InitialData& data,
                                              double eps_supp = 1e-9, int gap_samples = 101) {
  ValidationReport rep;
  const double dx = data.dx();
  for (int s = 0; s < 2; ++s) rep.support[s] = waves_detail::detect_support(data.profile(s), data.x_lo, dx, eps_supp);
  const auto& s1 = rep.support[0];
  const auto& s2 = rep.support[1];
  if (s1.empty() || s2.empty()) rep.violations.push_back("empty support: a profile is constant");
  if (s1.components > 1 || s2.components > 1) rep.violations.push_back("support is not a single interval");
  if (!s1.empty() && !s2.empty()) {
    rep.disjoint = s1.b < s2.a || s2.b < s1.a;
    rep.ordered = s1.a < s1.b && s1.b < s2.a && s2.a < s2.b;
    if (!rep.disjoint) rep.violations.push_back("supports overlap");
    else if (!rep.ordered) rep.violations.push_back("supports not ordered a1 < b1 < a2 < b2");
  }
  auto range = [](const std::vector<double>& v) {
    return std::make_pair(*std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end()));
  };
  const auto [lo1, hi1] = range(data.r1);
  const auto [lo2, hi2] = range(data.r2);
  rep.gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < gap_samples; ++i) {
    const double a = gap_samples == 1 ? lo1 : lo1 + (hi1 - lo1) * i / (gap_samples - 1);
    for (int j = 0; j < gap_samples; ++j) {
      const double b = gap_samples == 1 ? lo2 : lo2 + (hi2 - lo2) * j / (gap_samples - 1);
      const double v1 = sys.nu1(a, b), v2 = sys.nu2(a, b);
      if (!std::isfinite(v1) || !std::isfinite(v2)) throw DomainError("speed is not finite on the data range");
      rep.gap = std::min(rep.gap, v1 - v2);
    }
  }
  rep.gap_ok = rep.gap > 0.0;
  if (!rep.gap_ok) rep.violations.push_back("gap condition fails: min(nu1 - nu2) <= 0");
  return rep;
}

enum class Scheme { Characteristics, Upwind };

inline const char* scheme_name(Scheme s) { return s == Scheme::Characteristics ? "characteristics" : "upwind"; }

struct SimOptions {
  double t_end = 1.0;
  Scheme scheme = Scheme::Characteristics;
  double cfl = 0.9;
  /// Frames resampled onto the grid every frame_interval (0: initial and final only).
  double frame_interval = 0.0;
  int tracers_per_family = 5;
  double eps_supp = 1e-9;
  /// Skip data validation (for deliberately invalid inputs such as the self-coupled runs).
  bool require_valid = true;
};

struct Frame {
  double t = 0.0;
  std::vector<double> r1, r2;
};

/// A traced characteristic of family s with the invariant sampled along it.
struct Trace {
  int family = 0;
  std::vector<double> t, x, r;
  double drift() const {
    double d = 0.0;
    for (double v : r) d = std::max(d, std::abs(v - r.front()));
    return d;
  }
};

struct MarkerSet {
  std::vector<double> x0, x, value;
};

struct SimResult {
  Scheme scheme = Scheme::Characteristics;
  DiagonalSystem sys;
  InitialData data;
  ValidationReport validation;
  double t_final = 0.0;
  int steps = 0;
  std::vector<Frame> frames;
  std::vector<double> times;                   // every step
  std::vector<std::array<double, 4>> supports;  // (a1, b1, a2, b2) per step
  std::optional<double> t1, t2;
  bool halted = false;
  std::string halt_reason;
  MarkerSet markers[2];  // characteristics scheme only
  std::vector<Trace> traces;
  double max_drift[2] = {0.0, 0.0};
  double range_expansion[2] = {0.0, 0.0};  // growth of [min, max] of r^s beyond the initial range
};

namespace waves_detail {

inline void update_contacts(SimResult& res) {
  const std::size_t m = res.times.size();
  if (m < 2) return;
  const auto& p = res.supports[m - 2];
  const auto& c = res.supports[m - 1];
  const double tp = res.times[m - 2], tc = res.times[m - 1];
  const double gp = p[1] - p[2], gc = c[1] - c[2];  // b1 - a2
  if (!res.t1 && gp < 0.0 && gc >= 0.0) res.t1 = tp + (tc - tp) * (-gp) / (gc - gp);
  const double hp = p[3] - p[0], hc = c[3] - c[0];  // b2 - a1
  if (res.t1 && !res.t2 && hp > 0.0 && hc <= 0.0) res.t2 = tp + (tc - tp) * hp / (hp - hc);
}

}  // namespace waves_detail

/// Characteristics scheme: markers at every grid node of both families carry their invariant
/// exactly and move with dx/dt = nu_s; the other invariant at a marker is interpolated from the
/// other family's markers. Upwind scheme: first-order nonconservative upwinding with inflow r0.
inline SimResult simulate(const DiagonalSystem& sys_in, const InitialData& data, const SimOptions& opt) {
  using namespace waves_detail;
  if (!(opt.cfl > 0.0 && opt.cfl <= 0.9)) throw PreconditionError("cfl must lie in (0, 0.9]");
  if (!(opt.t_end > data.t0)) throw PreconditionError("t_end must exceed t0");
  if (data.n < 8 || static_cast<int>(data.r1.size()) != data.n || static_cast<int>(data.r2.size()) != data.n)
    throw PreconditionError("initial profiles must have n >= 8 samples");

  SimResult res;
  res.scheme = opt.scheme;
  res.sys = sys_in;
  res.data = data;
  res.validation = validate_initial_data(sys_in, data, opt.eps_supp);
  if (opt.require_valid && !res.validation.valid())
    throw PreconditionError("invalid initial data: " + res.validation.violations.front());
  {
    auto [lo1, hi1] = std::minmax_element(data.r1.begin(), data.r1.end());
    auto [lo2, hi2] = std::minmax_element(data.r2.begin(), data.r2.end());
    if (!res.sys.self1) res.sys.self1 = probe_self_coupling(sys_in.nu1, 0, *lo1, *hi1, sys_in.r02);
    if (!res.sys.self2) res.sys.self2 = probe_self_coupling(sys_in.nu2, 1, *lo2, *hi2, sys_in.r01);
  }
  const DiagonalSystem& sys = res.sys;
  const double dx = data.dx();
  const int n = data.n;
  double range_lo[2], range_hi[2];
  for (int s = 0; s < 2; ++s) {
    const auto& v = data.profile(s);
    range_lo[s] = *std::min_element(v.begin(), v.end());
    range_hi[s] = *std::max_element(v.begin(), v.end());
  }
  auto note_range = [&](int s, double lo, double hi) {
    res.range_expansion[s] = std::max({res.range_expansion[s], range_lo[s] - lo, hi - range_hi[s]});
  };

  // tracers offset by half a cell inside each support
  std::vector<int> tracer_family;
  std::vector<double> tracer_x;
  for (int s = 0; s < 2; ++s) {
    const auto& sup = res.validation.support[s];
    if (sup.empty() || opt.tracers_per_family <= 0) continue;
    const int span = std::max(1, sup.last - sup.first);
    for (int j = 0; j < opt.tracers_per_family; ++j) {
      const int node = sup.first + (span * (j + 1)) / (opt.tracers_per_family + 1);
      tracer_family.push_back(s);
      tracer_x.push_back(data.x(std::min(node, n - 2)) + 0.5 * dx);
    }
  }
  const int nt = static_cast<int>(tracer_x.size());
  res.traces.resize(nt);
  for (int j = 0; j < nt; ++j) res.traces[j].family = tracer_family[j];

  double t = data.t0;
  double next_frame = opt.frame_interval > 0.0 ? data.t0 + opt.frame_interval : opt.t_end;

  if (opt.scheme == Scheme::Characteristics) {
    MarkerSet (&mk)[2] = res.markers;
    for (int s = 0; s < 2; ++s) {
      mk[s].x0.resize(n);
      for (int i = 0; i < n; ++i) mk[s].x0[i] = data.x(i);
      mk[s].x = mk[s].x0;
      mk[s].value = data.profile(s);
    }
    const int ia[2] = {res.validation.support[0].first, res.validation.support[1].first};
    const int ib[2] = {res.validation.support[0].last, res.validation.support[1].last};

    auto field = [&](int s, const std::vector<double>& xs, double x) {
      return interp_cubic(xs, mk[s].value, x, sys.background(s));
    };
    // velocities of [markers 1 | markers 2 | tracers] at positions y
    auto velocity = [&](const std::vector<double>& y, std::vector<double>& v) {
      const std::vector<double> x1(y.begin(), y.begin() + n), x2(y.begin() + n, y.begin() + 2 * n);
      v.resize(y.size());
      for (int i = 0; i < n; ++i) {
        v[i] = sys.nu1(mk[0].value[i], field(1, x2, y[i]));
        v[n + i] = sys.nu2(field(0, x1, y[n + i]), mk[1].value[i]);
      }
      for (int j = 0; j < nt; ++j) {
        const double x = y[2 * n + j];
        v[2 * n + j] = sys.nu(tracer_family[j], field(0, x1, x), field(1, x2, x));
      }
    };
    std::vector<double> y(2 * n + nt);
    for (int i = 0; i < n; ++i) {
      y[i] = mk[0].x[i];
      y[n + i] = mk[1].x[i];
    }
    for (int j = 0; j < nt; ++j) y[2 * n + j] = tracer_x[j];

    auto sample = [&]() {
      const std::vector<double> x1(y.begin(), y.begin() + n), x2(y.begin() + n, y.begin() + 2 * n);
      res.times.push_back(t);
      res.supports.push_back({ia[0] >= 0 ? y[ia[0]] : 0.0, ib[0] >= 0 ? y[ib[0]] : 0.0,
                              ia[1] >= 0 ? y[n + ia[1]] : 0.0, ib[1] >= 0 ? y[n + ib[1]] : 0.0});
      for (int j = 0; j < nt; ++j) {
        const int s = tracer_family[j];
        const double x = y[2 * n + j];
        auto& tr = res.traces[j];
        tr.t.push_back(t);
        tr.x.push_back(x);
        tr.r.push_back(field(s, s == 0 ? x1 : x2, x));
      }
      update_contacts(res);
    };
    auto frame = [&]() {
      const std::vector<double> x1(y.begin(), y.begin() + n), x2(y.begin() + n, y.begin() + 2 * n);
      Frame f;
      f.t = t;
      f.r1.resize(n);
      f.r2.resize(n);
      for (int i = 0; i < n; ++i) {
        f.r1[i] = field(0, x1, data.x(i));
        f.r2[i] = field(1, x2, data.x(i));
      }
      res.frames.push_back(std::move(f));
    };
    sample();
    frame();
    for (int s = 0; s < 2; ++s)
      note_range(s, *std::min_element(mk[s].value.begin(), mk[s].value.end()),
                 *std::max_element(mk[s].value.begin(), mk[s].value.end()));

    std::vector<double> k1, k2, k3, k4, tmp(y.size());
    while (t < opt.t_end - 1e-14 * std::max(1.0, std::abs(opt.t_end))) {
      velocity(y, k1);
      double vmax = 0.0;
      for (double v : k1) {
        if (!std::isfinite(v)) throw DomainError("non-finite characteristic speed");
        vmax = std::max(vmax, std::abs(v));
      }
      double dt = vmax > 0.0 ? opt.cfl * dx / vmax : opt.t_end - t;
      dt = std::min(dt, opt.t_end - t);
      if (opt.frame_interval > 0.0 && t + dt > next_frame) dt = std::max(next_frame - t, 1e-15);
      for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
      velocity(tmp, k2);
      for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
      velocity(tmp, k3);
      for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + dt * k3[i];
      velocity(tmp, k4);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
      t += dt;
      ++res.steps;
      // marker crossing within a family: incipient gradient catastrophe
      for (int s = 0; s < 2 && !res.halted; ++s)
        for (int i = 0; i + 1 < n; ++i)
          if (!(y[s * n + i + 1] > y[s * n + i])) {
            res.halted = true;
            res.halt_reason = "marker crossing in family " + std::to_string(s + 1) + " near x = " +
                              std::to_string(y[s * n + i]) + " at t = " + std::to_string(t);
            break;
          }
      sample();
      if (res.halted) break;
      if (opt.frame_interval > 0.0 && t >= next_frame - 1e-12) {
        frame();
        next_frame += opt.frame_interval;
      }
    }
    for (int i = 0; i < n; ++i) {
      mk[0].x[i] = y[i];
      mk[1].x[i] = y[n + i];
    }
    if (res.frames.back().t != t) frame();
  } else {
    std::vector<double> r[2] = {data.r1, data.r2};
    std::vector<double> tracer_pos = tracer_x;
    auto sample = [&]() {
      res.times.push_back(t);
      SupportInterval sp[2];
      for (int s = 0; s < 2; ++s) sp[s] = detect_support(r[s], data.x_lo, dx, opt.eps_supp);
      res.supports.push_back({sp[0].a, sp[0].b, sp[1].a, sp[1].b});
      for (int j = 0; j < nt; ++j) {
        const int s = tracer_family[j];
        const double x = tracer_pos[j];
        auto& tr = res.traces[j];
        tr.t.push_back(t);
        tr.x.push_back(x);
        tr.r.push_back(interp_linear_uniform(r[s], data.x_lo, dx, x, sys.background(s)));
      }
      update_contacts(res);
    };
    auto frame = [&]() { res.frames.push_back({t, r[0], r[1]}); };
    sample();
    frame();
    std::vector<double> nu[2] = {std::vector<double>(n), std::vector<double>(n)};
    std::vector<double> next(n);
    while (t < opt.t_end - 1e-14 * std::max(1.0, std::abs(opt.t_end))) {
      double vmax = 0.0;
      for (int i = 0; i < n; ++i) {
        nu[0][i] = sys.nu1(r[0][i], r[1][i]);
        nu[1][i] = sys.nu2(r[0][i], r[1][i]);
        if (!std::isfinite(nu[0][i]) || !std::isfinite(nu[1][i])) throw DomainError("non-finite speed");
        vmax = std::max({vmax, std::abs(nu[0][i]), std::abs(nu[1][i])});
      }
      double dt = vmax > 0.0 ? opt.cfl * dx / vmax : opt.t_end - t;
      dt = std::min(dt, opt.t_end - t);
      if (opt.frame_interval > 0.0 && t + dt > next_frame) dt = std::max(next_frame - t, 1e-15);
      // tracers move with the local speed (forward Euler, consistent with the scheme's order)
      std::vector<double> tracer_v(nt);
      for (int j = 0; j < nt; ++j) {
        const double x = tracer_pos[j];
        const double a = interp_linear_uniform(r[0], data.x_lo, dx, x, sys.r01);
        const double b = interp_linear_uniform(r[1], data.x_lo, dx, x, sys.r02);
        tracer_v[j] = sys.nu(tracer_family[j], a, b);
      }
      for (int s = 0; s < 2; ++s) {
        const double bg = sys.background(s);
        for (int i = 0; i < n; ++i) {
          const double v = nu[s][i];
          const double left = i > 0 ? r[s][i - 1] : bg;
          const double right = i + 1 < n ? r[s][i + 1] : bg;
          const double grad = v > 0.0 ? (r[s][i] - left) / dx : (right - r[s][i]) / dx;
          next[i] = r[s][i] - dt * v * grad;
        }
        r[s].swap(next);
        note_range(s, *std::min_element(r[s].begin(), r[s].end()), *std::max_element(r[s].begin(), r[s].end()));
      }
      t += dt;
      ++res.steps;
      for (int j = 0; j < nt; ++j) tracer_pos[j] += dt * tracer_v[j];
      sample();
      if (opt.frame_interval > 0.0 && t >= next_frame - 1e-12) {
        frame();
        next_frame += opt.frame_interval;
      }
    }
    if (res.frames.back().t != t) frame();
  }
  res.t_final = t;
  for (const auto& tr : res.traces)
    res.max_drift[tr.family] = std::max(res.max_drift[tr.family], tr.drift());
  return res;
}

struct FamilyElasticity {
  int support_before = 0;
  int support_after = 0;
  double shift = 0.0;        // optimal translation
  double free_flight = 0.0;  // nu_s(r0) * elapsed
  double phase_shift = 0.0;  // shift - free_flight
  double match_error = 0.0;
  bool shape_compared = true;  // false: compared as value multisets (self-coupled family)
  std::size_t points = 0;
};

struct ElasticityReport {
  std::string status;  // "complete", "interaction ongoing", "no interaction", "halted"
  bool verdict_available = false;
  bool elastic = false;
  double tol_match = 1e-6;
  double elapsed = 0.0;
  FamilyElasticity family[2];
};

/// Support counts before t1 (initial frame) and after t2 (final frame), and the L2-optimal
/// translation of each family's final profile onto its initial profile.
inline ElasticityReport elasticity_report(const SimResult& res, double tol_match = 1e-6) {
  using namespace waves_detail;
  ElasticityReport rep;
  rep.tol_match = tol_match;
  rep.elapsed = res.t_final - res.data.t0;
  if (res.halted) {
    rep.status = "halted";
    return rep;
  }
  if (res.t1 && !res.t2) {
    rep.status = "interaction ongoing";
    return rep;
  }
  rep.status = res.t1 ? "complete" : "no interaction";
  const auto& data = res.data;
  const double dx = data.dx();
  const Frame& first = res.frames.front();
  const Frame& last = res.frames.back();
  bool ok = true;
  for (int s = 0; s < 2; ++s) {
    auto& fe = rep.family[s];
    const double bg = res.sys.background(s);
    fe.support_before = detect_support(s == 0 ? first.r1 : first.r2, data.x_lo, dx, 1e-9).components;
    fe.support_after = detect_support(s == 0 ? last.r1 : last.r2, data.x_lo, dx, 1e-9).components;
    fe.free_flight = res.sys.nu(s, res.sys.r01, res.sys.r02) * rep.elapsed;

    // (position, value) pairs of the final wave and their initial positions
    std::vector<double> xs, vs, x0s;
    const auto& prof = data.profile(s);
    if (res.scheme == Scheme::Characteristics) {
      const auto& sup = res.validation.support[s];
      for (int i = sup.first; i <= sup.last; ++i) {
        xs.push_back(res.markers[s].x[i]);
        vs.push_back(res.markers[s].value[i]);
        x0s.push_back(res.markers[s].x0[i]);
      }
    } else {
      const auto& fr = s == 0 ? last.r1 : last.r2;
      const auto sup = detect_support(fr, data.x_lo, dx, 1e-9);
      for (int i = std::max(0, sup.first); i <= sup.last && sup.first >= 0; ++i) {
        xs.push_back(data.x(i));
        vs.push_back(fr[i]);
      }
    }
    fe.points = xs.size();
    if (xs.empty()) {
      ok = false;
      continue;
    }
    const bool self = s == 0 ? res.sys.self1.value_or(true) : res.sys.self2.value_or(true);
    fe.shape_compared = !self;
    if (self) {
      // value multisets at matching quantiles
      std::vector<double> a = vs, b;
      const auto& sup0 = res.validation.support[s];
      for (int i = sup0.first; i <= sup0.last; ++i) b.push_back(prof[i]);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      const int m = 201;
      double err = 0.0;
      auto quant = [](const std::vector<double>& v, double q) {
        const double pos = q * (v.size() - 1);
        const std::size_t j = std::min(static_cast<std::size_t>(pos), v.size() - 1);
        const std::size_t k = std::min(j + 1, v.size() - 1);
        return v[j] + (pos - j) * (v[k] - v[j]);
      };
      for (int i = 0; i < m; ++i) err = std::max(err, std::abs(quant(a, i / (m - 1.0)) - quant(b, i / (m - 1.0))));
      fe.match_error = err;
      // centroid displacement stands in for the shift
      double w = 0.0, wx = 0.0, w0 = 0.0, wx0 = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        w += std::abs(vs[i] - bg);
        wx += std::abs(vs[i] - bg) * xs[i];
      }
      for (int i = 0; i < data.n; ++i) {
        w0 += std::abs(prof[i] - bg);
        wx0 += std::abs(prof[i] - bg) * data.x(i);
      }
      fe.shift = (w > 0 && w0 > 0) ? wx / w - wx0 / w0 : 0.0;
    } else {
      double guess = 0.0;
      if (!x0s.empty()) {
        for (std::size_t i = 0; i < xs.size(); ++i) guess += xs[i] - x0s[i];
        guess /= static_cast<double>(xs.size());
      } else {
        double w = 0.0, wx = 0.0, w0 = 0.0, wx0 = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          w += std::abs(vs[i] - bg);
          wx += std::abs(vs[i] - bg) * xs[i];
        }
        for (int i = 0; i < data.n; ++i) {
          w0 += std::abs(prof[i] - bg);
          wx0 += std::abs(prof[i] - bg) * data.x(i);
        }
        guess = (w > 0 && w0 > 0) ? wx / w - wx0 / w0 : 0.0;
      }
      auto l2 = [&](double d) {
        double e = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          const double diff = vs[i] - interp_uniform(prof, data.x_lo, dx, xs[i] - d, bg);
          e += diff * diff;
        }
        return e;
      };
      fe.shift = golden_section(l2, guess - 4 * dx, guess + 4 * dx);
      double err = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i)
        err = std::max(err, std::abs(vs[i] - interp_uniform(prof, data.x_lo, dx, xs[i] - fe.shift, bg)));
      fe.match_error = err;
    }
    fe.phase_shift = fe.shift - fe.free_flight;
    ok = ok && fe.support_before == 1 && fe.support_after == 1 && fe.match_error <= tol_match;
  }
  rep.verdict_available = true;
  rep.elastic = ok;
  return rep;
}

/// Columns t, x, r1, r2.
inline void write_frame_csv(std::ostream& os, const SimResult& res, const Frame& f) {
  os << "t,x,r1,r2\n";
  os.precision(17);
  for (int i = 0; i < res.data.n; ++i) os << f.t << ',' << res.data.x(i) << ',' << f.r1[i] << ',' << f.r2[i] << '\n';
}

/// Columns family, tracer, t, x, r.
inline void write_traces_csv(std::ostream& os, const SimResult& res) {
  os << "family,tracer,t,x,r\n";
  os.precision(17);
  for (std::size_t j = 0; j < res.traces.size(); ++j) {
    const auto& tr = res.traces[j];
    for (std::size_t m = 0; m < tr.t.size(); ++m)
      os << tr.family + 1 << ',' << j << ',' << tr.t[m] << ',' << tr.x[m] << ',' << tr.r[m] << '\n';
  }
}

}  // namespace kwave

#endif  // KWAVE_WAVES1D_HPP
