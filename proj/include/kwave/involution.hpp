#ifndef KWAVE_INVOLUTION_HPP
#define KWAVE_INVOLUTION_HPP

// Involutivity checks for families of simple elements and the k = 2 rescaling to commuting fields.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "kwave/error.hpp"
#include "kwave/model.hpp"
#include "kwave/ode.hpp"
#include "kwave/parallel.hpp"
#include "kwave/surface.hpp"
#include "kwave/wave_algebra.hpp"

namespace kwave {

/// gamma_i and gamma_j are (numerically) parallel at a sample state.
class DegeneratePairError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Least-squares fit v ~ c_i a + c_j b.
struct SpanFit {
  double ci = 0.0;
  double cj = 0.0;
  double residual = 0.0;  // norm of the out-of-span remainder
};

/// Throws DegeneratePairError when a and b are parallel (sigma_2 <= tol_wedge * sigma_1).
inline SpanFit fit_span(const Vector& v, const Vector& a, const Vector& b, double tol_wedge = 1e-10) {
  Matrix m(a.size(), 2);
  m.col(0) = a;
  m.col(1) = b;
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (s.size() < 2 || s[0] == 0.0 || s[1] <= tol_wedge * s[0])
    throw DegeneratePairError("field pair is parallel (wedge product vanishes)");
  const Vector c = svd.solve(v);
  SpanFit out;
  out.ci = c[0];
  out.cj = c[1];
  out.residual = (v - m * c).norm();
  return out;
}

struct SpanOptions {
  double tol_span = 1e-8;  // relative to 1 + max(|gamma_i|, |gamma_j|)
  double h = 0.0;          // finite-difference step, 0 = default
  /// Test hook: replaces the computed bracket (i, j, u, bracket) -> bracket.
  std::function<Vector(int, int, const Vector&, const Vector&)> bracket_hook;
};

/// Bracket of one pair across the sample states.
struct CommutatorStructure {
  int i = 0, j = 0;
  std::vector<Vector> bracket;
  std::vector<double> h_i, h_j;
  std::vector<double> residual;
  std::vector<double> threshold;
  double max_residual = 0.0;
  bool in_span = true;
};

inline std::vector<CommutatorStructure> check_span_condition(const std::vector<VectorField>& gammas,
                                                             const std::vector<Vector>& samples,
                                                             const SpanOptions& opt = {}) {
  const int k = static_cast<int>(gammas.size());
  std::vector<CommutatorStructure> out;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      CommutatorStructure cs;
      cs.i = i;
      cs.j = j;
      const std::size_t n = samples.size();
      cs.bracket.resize(n);
      cs.h_i.resize(n);
      cs.h_j.resize(n);
      cs.residual.resize(n);
      cs.threshold.resize(n);
      parallel_for(n, [&](std::size_t a) {
        const Vector& u = samples[a];
        Vector br = commutator(gammas[i], gammas[j], u, opt.h);
        if (opt.bracket_hook) br = opt.bracket_hook(i, j, u, br);
        const Vector gi = gammas[i](u), gj = gammas[j](u);
        const SpanFit fit = fit_span(br, gi, gj);
        cs.bracket[a] = br;
        cs.h_i[a] = fit.ci;
        cs.h_j[a] = fit.cj;
        cs.residual[a] = fit.residual;
        cs.threshold[a] = opt.tol_span * (1.0 + std::max(gi.norm(), gj.norm()));
      });
      for (std::size_t a = 0; a < n; ++a) {
        cs.max_residual = std::max(cs.max_residual, cs.residual[a]);
        if (cs.residual[a] > cs.threshold[a]) cs.in_span = false;
      }
      out.push_back(std::move(cs));
    }
  return out;
}

inline std::vector<CommutatorStructure> check_span_condition(const std::vector<SimpleElement>& elements,
                                                             const std::vector<Vector>& samples,
                                                             const SpanOptions& opt = {}) {
  std::vector<VectorField> g;
  for (const auto& e : elements) g.push_back(e.gamma);
  return check_span_condition(g, samples, opt);
}

struct AbelianCheck {
  bool abelian = true;
  double max_residual = 0.0;
  int worst_i = -1, worst_j = -1;
  std::size_t worst_sample = 0;
};

/// All pairwise brackets below tol (max norm) at every sample.
inline AbelianCheck check_abelian(const std::vector<VectorField>& gammas, const std::vector<Vector>& samples,
                                  double tol = 1e-8, double h = 0.0) {
  AbelianCheck out;
  const int k = static_cast<int>(gammas.size());
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      for (std::size_t a = 0; a < samples.size(); ++a) {
        const double r = commutator(gammas[i], gammas[j], samples[a], h).lpNorm<Eigen::Infinity>();
        if (r > out.max_residual) {
          out.max_residual = r;
          out.worst_i = i;
          out.worst_j = j;
          out.worst_sample = a;
        }
      }
  out.abelian = out.max_residual <= tol;
  return out;
}

inline AbelianCheck check_abelian(const std::vector<SimpleElement>& elements, const std::vector<Vector>& samples,
                                  double tol = 1e-8, double h = 0.0) {
  std::vector<VectorField> g;
  for (const auto& e : elements) g.push_back(e.gamma);
  return check_abelian(g, samples, tol, h);
}

// ---------------------------------------------------------------------------
// Covector involutivity on a surface: d lambda^s / d r^p in span{lambda^s, lambda^p}

struct LambdaPairReport {
  int s = 0, p = 0;
  std::vector<double> alpha, beta, residual;  // per node, NaN where not evaluated
  double max_residual = 0.0;
  std::size_t worst_node = 0;
  bool holds = true;
};

struct InvolutivityReport {
  std::vector<LambdaPairReport> pairs;
  bool normalized = false;
  double tol = 0.0;
  bool holds = true;
};

namespace involution_detail {

/// d table / d r^d at node f from grid differences: 4th-order central where the stencil is valid,
/// otherwise 2nd-order central or one-sided. Returns false when no stencil is available.
inline bool grid_derivative(const SurfaceGrid& g, const std::vector<unsigned char>& valid,
                            const std::vector<Vector>& table, std::size_t f, int d, Vector& out) {
  const auto idx = g.unflatten(f);
  const int n = g.axis(d).n;
  const double h = g.axis(d).spacing();
  const auto st = static_cast<std::ptrdiff_t>(g.stride(d));
  auto ok = [&](int off) {
    const int i = idx[d] + off;
    return i >= 0 && i < n && valid[f + off * st];
  };
  auto at = [&](int off) -> const Vector& { return table[f + off * st]; };
  if (ok(-2) && ok(-1) && ok(1) && ok(2)) {
    out = (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
  } else if (ok(-1) && ok(1)) {
    out = (at(1) - at(-1)) / (2.0 * h);
  } else if (ok(1) && ok(2)) {
    out = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
  } else if (ok(-1) && ok(-2)) {
    out = (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h);
  } else {
    return false;
  }
  return true;
}

}  // namespace involution_detail

/// Checks the covector condition on tabulated lambda^s(r) over a grid (table[s][node]).
inline InvolutivityReport check_lambda_involutivity(const SurfaceGrid& grid,
                                                    const std::vector<unsigned char>& valid,
                                                    const std::vector<std::vector<Vector>>& table,
                                                    double tol = 1e-6) {
  const int k = static_cast<int>(table.size());
  if (k != grid.dims()) throw PreconditionError("need one covector table per grid axis");
  InvolutivityReport rep;
  rep.tol = tol;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int s = 0; s < k; ++s)
    for (int p = 0; p < k; ++p) {
      if (s == p) continue;
      LambdaPairReport pr;
      pr.s = s;
      pr.p = p;
      pr.alpha.assign(grid.size(), nan);
      pr.beta.assign(grid.size(), nan);
      pr.residual.assign(grid.size(), nan);
      for (std::size_t f = 0; f < grid.size(); ++f) {
        if (!valid[f]) continue;
        Vector d;
        if (!involution_detail::grid_derivative(grid, valid, table[s], f, p, d)) continue;
        const SpanFit fit = fit_span(d, table[s][f], table[p][f]);
        pr.alpha[f] = fit.ci;
        pr.beta[f] = fit.cj;
        // residual relative to the covector scale
        const double scale = 1.0 + std::max(table[s][f].norm(), table[p][f].norm());
        pr.residual[f] = fit.residual / scale;
        if (pr.residual[f] > pr.max_residual) {
          pr.max_residual = pr.residual[f];
          pr.worst_node = f;
        }
      }
      pr.holds = pr.max_residual <= tol;
      rep.holds = rep.holds && pr.holds;
      rep.pairs.push_back(std::move(pr));
    }
  return rep;
}

/// Pulls the element covectors back onto the surface and checks them; with `normalized` the
/// covectors are scaled to first component one, where the condition reduces to
/// d lambda^s / d r^l = alpha (lambda^s - lambda^l).
inline InvolutivityReport check_lambda_involutivity(const std::vector<SimpleElement>& elements,
                                                    const SurfaceMap& surface, double tol = 1e-6,
                                                    bool normalized = false) {
  std::vector<WaveCovector> lambdas;
  for (const auto& e : elements) lambdas.push_back(normalized ? e.lambda.normalized() : e.lambda);
  auto rep = check_lambda_involutivity(surface.grid, surface.valid, pullback_covectors(surface, lambdas), tol);
  rep.normalized = normalized;
  return rep;
}

// ---------------------------------------------------------------------------
// k = 2 rescaling [f1 g1, f2 g2] = 0

struct AbelianizeOptions {
  GridAxis s1{0.0, 1.0, 41};  // flow times of gamma_1 from the base
  GridAxis s2{0.0, 1.0, 41};  // flow times of gamma_2
  double max_step = 0.01;
  double tol_span = 1e-8;
  /// Rescaled-bracket tolerance per unit of leaf diameter.
  double tol_abel = 1e-8;
  double check_delta = 1e-3;
  const ModelDomain* domain = nullptr;
};

/// f1, f2 tabulated over the leaf chart (s1, s2) -> flow_{g2}(s2) o flow_{g1}(s1) (base).
struct AbelianizeResult {
  SurfaceGrid chart;
  std::vector<Vector> points;
  std::vector<double> f1, f2;
  std::vector<unsigned char> valid;
  bool already_abelian = false;
  bool degenerate = false;  // pair became parallel somewhere; only the reachable subgrid is filled
  std::string warning;
  double max_span_residual = 0.0;
  double max_rescaled_bracket = 0.0;
  double bracket_tolerance = 0.0;
  std::size_t worst_node = 0;

  bool verified() const { return max_rescaled_bracket <= bracket_tolerance; }
};

namespace involution_detail {

inline Vector rk4_fixed(const VectorField& field, Vector u, double time, int steps) {
  const double h = time / steps;
  for (int i = 0; i < steps; ++i) u = rk4_step(field, u, h);
  return u;
}

inline int steps_for(double time, double max_step) {
  return std::max(1, static_cast<int>(std::ceil(std::abs(time) / max_step - 1e-9)));
}

}  // namespace involution_detail

/// Solves gamma_2(ln f1) = h^1 along the gamma_2 lines of the chart and gamma_1(ln f2) = -h^2 along
/// gamma_1 curves back to the gamma_2 curve through the base, with f1 = 1 on s2 = 0 and f2 = 1 on
/// s1 = 0. h^1, h^2 come from the span fit of the bracket. The result is post-checked with
/// fourth-order flow-time differences of freshly evaluated f1, f2.
inline AbelianizeResult abelianize_pair(const VectorField& g1, const VectorField& g2, const Vector& base,
                                        const AbelianizeOptions& opt = {}) {
  using involution_detail::rk4_fixed;
  using involution_detail::steps_for;
  const int q = static_cast<int>(base.size());
  if (opt.domain) opt.domain->require(base);

  AbelianizeResult res;
  res.chart = SurfaceGrid({opt.s1, opt.s2});
  const std::size_t n = res.chart.size();
  res.points.assign(n, Vector());
  res.f1.assign(n, std::numeric_limits<double>::quiet_NaN());
  res.f2 = res.f1;
  res.valid.assign(n, 0);
  const double diameter = std::hypot(opt.s1.hi - opt.s1.lo, opt.s2.hi - opt.s2.lo);
  res.bracket_tolerance = opt.tol_abel * std::max(1.0, diameter);

  auto in_domain = [&](const Vector& u) { return !opt.domain || opt.domain->contains(u); };

  // span coefficients (h^1, h^2) of the bracket at u
  auto span_coeffs = [&](const Vector& u) {
    const Vector br = commutator(g1, g2, u);
    const Vector a = g1(u), b = g2(u);
    const SpanFit fit = fit_span(br, a, b);
    if (fit.residual > opt.tol_span * (1.0 + std::max(a.norm(), b.norm())))
      throw PreconditionError("bracket leaves span{gamma_1, gamma_2} (residual " +
                              std::to_string(fit.residual) + ")");
    return fit;
  };

  // leaf points
  for (int i = 0; i < opt.s1.n; ++i) {
    const double s1 = opt.s1.node(i);
    Vector row;
    try {
      row = rk4_fixed(g1, base, s1, steps_for(s1, opt.max_step));
    } catch (const DomainError&) {
      continue;
    }
    if (!in_domain(row)) continue;
    for (int j = 0; j < opt.s2.n; ++j) {
      const double s2 = opt.s2.node(j);
      try {
        Vector u = rk4_fixed(g2, row, s2, steps_for(s2, opt.max_step));
        if (!in_domain(u)) continue;
        const std::size_t f = res.chart.flatten({i, j});
        res.points[f] = std::move(u);
        res.valid[f] = 1;
      } catch (const DomainError&) {
      }
    }
  }

  // already commuting: exact f = 1
  {
    bool commuting = true;
    for (std::size_t f = 0; f < n && commuting; ++f) {
      if (!res.valid[f]) continue;
      const Vector& u = res.points[f];
      const double scale = 1.0 + g1(u).norm() * g2(u).norm();
      if (commutator(g1, g2, u).lpNorm<Eigen::Infinity>() > opt.tol_span * scale) commuting = false;
    }
    if (commuting) {
      res.already_abelian = true;
      for (std::size_t f = 0; f < n; ++f)
        if (res.valid[f]) res.f1[f] = res.f2[f] = 1.0;
      return res;
    }
  }

  // ln f1 along gamma_2 with the augmented state (u, L), L' = h^1
  auto column_field = [&](const Vector& y) {
    const Vector u = y.head(q);
    const SpanFit fit = span_coeffs(u);
    Vector out(q + 1);
    out.head(q) = g2(u);
    out[q] = fit.ci;
    return out;
  };
  // backward gamma_1 flow with L' = h^2
  auto back_field = [&](const Vector& y) {
    const Vector u = y.head(q);
    const SpanFit fit = span_coeffs(u);
    Vector out(q + 1);
    out.head(q) = -g1(u);
    out[q] = fit.cj;
    return out;
  };

  auto f1_at = [&](double s1, double s2, int ns) {
    Vector y(q + 1);
    y.head(q) = rk4_fixed(g1, base, s1, steps_for(s1, opt.max_step));
    y[q] = 0.0;
    y = rk4_fixed(column_field, y, s2, ns);
    return std::exp(y[q]);
  };

  // f2 at leaf point u: find (tau, sigma) with flow_{g1}(-tau)(u) = flow_{g2}(sigma)(base)
  // by Gauss-Newton with exact flow-time derivatives, step counts fixed by the guess
  auto f2_at = [&](const Vector& u, double tau, double sigma, int nt, int ns) {
    for (int it = 0; it < 40; ++it) {
      const Vector a = rk4_fixed([&](const Vector& v) { return Vector(-g1(v)); }, u, tau, nt);
      const Vector c = rk4_fixed(g2, base, sigma, ns);
      const Vector r = a - c;
      Matrix J(q, 2);
      J.col(0) = -g1(a);
      J.col(1) = -g2(c);
      const Vector step = J.colPivHouseholderQr().solve(r);
      tau -= step[0];
      sigma -= step[1];
      if (!std::isfinite(tau) || !std::isfinite(sigma)) throw ConvergenceError("leaf inversion diverged");
      if (std::abs(step[0]) + std::abs(step[1]) <= 1e-15 * (1.0 + std::abs(tau) + std::abs(sigma))) break;
      if (it == 39 && r.norm() > 1e-10) throw ConvergenceError("leaf inversion did not converge");
    }
    Vector y(q + 1);
    y.head(q) = u;
    y[q] = 0.0;
    y = rk4_fixed(back_field, y, tau, nt);
    return std::exp(-y[q]);
  };

  // fill tables per node; a node where the pair degenerates stays invalid
  std::vector<unsigned char> degenerate(n, 0);
  parallel_for(n, [&](std::size_t f) {
    if (!res.valid[f]) return;
    const auto idx = res.chart.unflatten(f);
    const double s1 = opt.s1.node(idx[0]), s2 = opt.s2.node(idx[1]);
    try {
      res.f1[f] = f1_at(s1, s2, steps_for(s2, opt.max_step));
      res.f2[f] = f2_at(res.points[f], s1, s2, steps_for(s1, opt.max_step), steps_for(s2, opt.max_step));
    } catch (const DegeneratePairError&) {
      degenerate[f] = 1;
    } catch (const DomainError&) {
      degenerate[f] = 1;
    }
  });
  for (std::size_t f = 0; f < n; ++f)
    if (degenerate[f]) {
      res.valid[f] = 0;
      res.degenerate = true;
    }
  if (res.degenerate) res.warning = "gamma pair degenerates on part of the leaf; reachable subgrid returned";

  // post-check of the rescaled bracket
  const double d = opt.check_delta;
  std::vector<double> bracket(n, 0.0), span_res(n, 0.0);
  parallel_for(n, [&](std::size_t f) {
    if (!res.valid[f]) return;
    const auto idx = res.chart.unflatten(f);
    const double s1 = opt.s1.node(idx[0]), s2 = opt.s2.node(idx[1]);
    const Vector& u = res.points[f];
    const int nt = steps_for(std::abs(s1) + 2 * d, opt.max_step);
    const int ns = steps_for(s2, opt.max_step);
    const int ns_check = steps_for(std::abs(s2) + 2 * d, opt.max_step);
    try {
      double f2s[4], f1s[4];
      const double offs[4] = {-2 * d, -d, d, 2 * d};
      for (int m = 0; m < 4; ++m) {
        const Vector um = rk4_fixed(g1, u, offs[m], 2);
        f2s[m] = f2_at(um, s1 + offs[m], s2, nt, ns);
        f1s[m] = f1_at(s1, s2 + offs[m], ns_check);
      }
      const double g1f2 = (f2s[0] - 8 * f2s[1] + 8 * f2s[2] - f2s[3]) / (12 * d);
      const double g2f1 = (f1s[0] - 8 * f1s[1] + 8 * f1s[2] - f1s[3]) / (12 * d);
      const Vector br = commutator(g1, g2, u);
      const Vector rescaled =
          res.f1[f] * res.f2[f] * br + res.f1[f] * g1f2 * g2(u) - res.f2[f] * g2f1 * g1(u);
      bracket[f] = rescaled.lpNorm<Eigen::Infinity>();
      span_res[f] = fit_span(br, g1(u), g2(u)).residual;
    } catch (const Error&) {
      bracket[f] = std::numeric_limits<double>::infinity();
    }
  });
  for (std::size_t f = 0; f < n; ++f) {
    if (!res.valid[f]) continue;
    res.max_span_residual = std::max(res.max_span_residual, span_res[f]);
    if (bracket[f] > res.max_rescaled_bracket) {
      res.max_rescaled_bracket = bracket[f];
      res.worst_node = f;
    }
  }
  return res;
}

}  // namespace kwave

#endif  // KWAVE_INVOLUTION_HPP
