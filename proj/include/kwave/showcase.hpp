#ifndef KWAVE_SHOWCASE_HPP
#define KWAVE_SHOWCASE_HPP

// Worked solution families: barotropic flow u = f(x - u t) and stationary double Alfven waves.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "kwave/error.hpp"
#include "kwave/expr.hpp"
#include "kwave/implicit_solution.hpp"
#include "kwave/model.hpp"
#include "kwave/parallel.hpp"
#include "kwave/surface.hpp"
#include "kwave/wave_algebra.hpp"

namespace kwave {

// ---------------------------------------------------------------------------
// Barotropic flow

struct BarotropicSolution {
  enum class Variant { General, AInvariant };
  int n = 1;
  MapR f;          // R^n -> R^n
  JacobianR df;    // optional; finite differences when empty
  std::function<double(const Vector&)> g;  // positive
  Variant variant = Variant::General;

  Matrix eval_df(const Vector& xb) const { return df ? df(xb) : jacobian_u(f, xb); }
};

/// f components and g as expressions in x1..xn.
inline BarotropicSolution barotropic_from_expressions(const std::vector<Expr>& f, const Expr& g,
                                                      BarotropicSolution::Variant variant) {
  const int n = static_cast<int>(f.size());
  if (n < 1) throw PreconditionError("barotropic solution needs n >= 1 velocity components");
  const auto slots = numbered_names("x", n);
  std::vector<CompiledExpr> fc;
  for (const auto& e : f) fc.push_back(e.compile(slots));
  const CompiledExpr gc = g.compile(slots);
  BarotropicSolution s;
  s.n = n;
  s.variant = variant;
  s.f = [fc, n](const Vector& xb) {
    Vector out(n);
    for (int i = 0; i < n; ++i) out[i] = fc[i](std::span<const double>(xb.data(), n));
    return out;
  };
  s.g = [gc, n](const Vector& xb) { return gc(std::span<const double>(xb.data(), n)); };
  return s;
}

struct BarotropicState {
  Vector u;
  double rho = 0.0;
  Vector xbar;       // x - u t
  double det = 1.0;  // det(I + t Df(xbar))
  int iterations = 0;
};

/// Newton solve of u = f(x - u t), Jacobian I + t Df; rho = g / det (general) or g (A-invariant).
inline BarotropicState barotropic_eval(const BarotropicSolution& sol, double t, const Vector& x,
                                       double tol_cat = 1e-8, int max_iter = 50) {
  if (x.size() != sol.n) throw PreconditionError("point has wrong dimension");
  const Matrix I = Matrix::Identity(sol.n, sol.n);
  BarotropicState st;
  Vector u = sol.f(x);
  double res = std::numeric_limits<double>::infinity();
  int polish = 0;
  for (int it = 0; it < max_iter; ++it) {
    st.iterations = it;
    const Vector xb = x - t * u;
    const Vector gval = u - sol.f(xb);
    const double r = gval.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(r)) throw DomainError("non-finite velocity");
    if (r <= 1e-13 * (1.0 + u.lpNorm<Eigen::Infinity>())) {
      if (r >= res || ++polish > 2 || r == 0.0) {
        res = std::min(r, res);
        break;
      }
    }
    res = r;
    const Matrix J = I + t * sol.eval_df(xb);
    const double det = J.determinant();
    if (std::abs(det) <= tol_cat)
      throw CatastropheError("gradient catastrophe: det(I + t Df) = " + std::to_string(det), det);
    u -= J.fullPivLu().solve(gval);
  }
  if (!(res <= 1e-10 * (1.0 + u.lpNorm<Eigen::Infinity>())))
    throw ConvergenceError("barotropic Newton did not converge");
  st.u = u;
  st.xbar = x - t * u;
  st.det = (I + t * sol.eval_df(st.xbar)).determinant();
  if (std::abs(st.det) <= tol_cat)
    throw CatastropheError("gradient catastrophe: det(I + t Df) = " + std::to_string(st.det), st.det);
  const double gv = sol.g(st.xbar);
  st.rho = sol.variant == BarotropicSolution::Variant::General ? gv / st.det : gv;
  return st;
}

/// (t, x1..xn) -> (u1..un, rho), the unknown ordering of the barotropic model.
inline std::function<Vector(const Vector&)> barotropic_field(const BarotropicSolution& sol) {
  return [sol](const Vector& tx) {
    const auto st = barotropic_eval(sol, tx[0], tx.tail(sol.n));
    Vector out(sol.n + 1);
    out.head(sol.n) = st.u;
    out[sol.n] = st.rho;
    return out;
  };
}

struct BarotropicReport {
  double momentum_max = 0.0;
  double mass_max = 0.0;
  double residual_rms = 0.0;
  // A-invariant variant
  double divergence_max = 0.0;
  double transport_max = 0.0;   // rho_t + u . grad rho
  double nilpotency_max = 0.0;  // |(Df)^n|_max
  std::size_t points = 0;
};

/// Momentum and mass residuals at the given (t, x) points with step h; the A-invariant variant
/// adds div u, the transport residual and nilpotency of Df.
inline BarotropicReport barotropic_verify(const BarotropicSolution& sol, const std::vector<Vector>& points,
                                          double h = 1e-4) {
  const SystemModel model = make_barotropic(sol.n);
  const auto field = barotropic_field(sol);
  const ResidualReport rr = pde_residual(model, field, points, h);
  BarotropicReport rep;
  rep.points = points.size();
  for (int m = 0; m < sol.n; ++m) rep.momentum_max = std::max(rep.momentum_max, rr.per_equation[m]);
  rep.mass_max = rr.per_equation[sol.n];
  rep.residual_rms = rr.rms;
  if (sol.variant == BarotropicSolution::Variant::AInvariant) {
    std::vector<double> div(points.size()), tr(points.size()), nil(points.size());
    parallel_for(points.size(), [&](std::size_t a) {
      const Matrix du = sampler_derivative(field, points[a], h);
      const Vector u = field(points[a]);
      double d = 0.0;
      for (int j = 0; j < sol.n; ++j) d += du(j, 1 + j);
      div[a] = std::abs(d);
      double t = du(sol.n, 0);
      for (int j = 0; j < sol.n; ++j) t += u[j] * du(sol.n, 1 + j);
      tr[a] = std::abs(t);
      const auto st = barotropic_eval(sol, points[a][0], points[a].tail(sol.n));
      Matrix P = Matrix::Identity(sol.n, sol.n);
      const Matrix D = sol.eval_df(st.xbar);
      for (int j = 0; j < sol.n; ++j) P = P * D;
      nil[a] = P.lpNorm<Eigen::Infinity>();
    });
    for (std::size_t a = 0; a < points.size(); ++a) {
      rep.divergence_max = std::max(rep.divergence_max, div[a]);
      rep.transport_max = std::max(rep.transport_max, tr[a]);
      rep.nilpotency_max = std::max(rep.nilpotency_max, nil[a]);
    }
  }
  return rep;
}

/// Along the particle paths x = xbar + t f(xbar): max deviation of rho det(I + t Df) from g(xbar)
/// and, for the A-invariant variant, of (u, rho) from their t = 0 values.
struct BarotropicInvariance {
  double mass_identity = 0.0;
  double time_invariance = 0.0;
};

inline BarotropicInvariance barotropic_invariance(const BarotropicSolution& sol, const std::vector<Vector>& xbars,
                                                  const std::vector<double>& times) {
  BarotropicInvariance out;
  for (const auto& xb : xbars) {
    const Vector f0 = sol.f(xb);
    const double g0 = sol.g(xb);
    for (double t : times) {
      const auto st = barotropic_eval(sol, t, xb + t * f0);
      out.mass_identity = std::max(out.mass_identity, std::abs(st.rho * st.det - g0));
      if (sol.variant == BarotropicSolution::Variant::AInvariant) {
        out.time_invariance = std::max(out.time_invariance, (st.u - f0).lpNorm<Eigen::Infinity>());
        out.time_invariance = std::max(out.time_invariance, std::abs(st.rho - g0));
      }
    }
  }
  return out;
}

/// Wave covectors (-u^j, e_j) of the barotropic model, j = 1..n.
inline std::vector<WaveCovector> barotropic_covectors(int n) {
  std::vector<WaveCovector> out;
  for (int j = 0; j < n; ++j)
    out.push_back({[n, j](const Vector& u) {
      Vector l = Vector::Zero(n + 1);
      l[0] = -u[j];
      l[1 + j] = 1.0;
      return l;
    }});
  return out;
}

// ---------------------------------------------------------------------------
// MHD Alfven waves; state ordering (rho, p, v1, v2, v3, H1, H2, H3)

inline double alfven_factor(double rho) { return 1.0 / std::sqrt(4.0 * std::numbers::pi * rho); }

/// Alfven element with constant alpha_bar and h = b x H: gamma = (0, 0, eps h / sqrt(4 pi rho), h),
/// lambda = (eps H.lb / sqrt(4 pi rho) - v.lb, lb), lb = alpha_bar x h.
inline SimpleElement alfven_element(const Eigen::Vector3d& alpha_bar, const Eigen::Vector3d& b, int eps) {
  const double e = eps >= 0 ? 1.0 : -1.0;
  SimpleElement el;
  el.gamma = [b, e](const Vector& u) {
    const Eigen::Vector3d H = u.segment<3>(5);
    const Eigen::Vector3d h = b.cross(H);
    Vector g = Vector::Zero(8);
    g.segment<3>(2) = e * alfven_factor(u[0]) * h;
    g.segment<3>(5) = h;
    return g;
  };
  el.lambda.field = [alpha_bar, b, e](const Vector& u) {
    const Eigen::Vector3d v = u.segment<3>(2), H = u.segment<3>(5);
    const Eigen::Vector3d lb = alpha_bar.cross(b.cross(H));
    Vector l(4);
    l[0] = e * alfven_factor(u[0]) * H.dot(lb) - v.dot(lb);
    l.tail<3>() = lb;
    return l;
  };
  return el;
}

/// Alfven element for a given perturbation direction h (must be orthogonal to H).
inline SimpleElement alfven_element_h(const Eigen::Vector3d& alpha_bar,
                                      std::function<Eigen::Vector3d(const Eigen::Vector3d&)> hfun, int eps) {
  const double e = eps >= 0 ? 1.0 : -1.0;
  SimpleElement el;
  el.gamma = [hfun, e](const Vector& u) {
    const Eigen::Vector3d h = hfun(u.segment<3>(5));
    Vector g = Vector::Zero(8);
    g.segment<3>(2) = e * alfven_factor(u[0]) * h;
    g.segment<3>(5) = h;
    return g;
  };
  el.lambda.field = [alpha_bar, hfun, e](const Vector& u) {
    const Eigen::Vector3d v = u.segment<3>(2), H = u.segment<3>(5);
    const Eigen::Vector3d lb = alpha_bar.cross(hfun(H));
    Vector l(4);
    l[0] = e * alfven_factor(u[0]) * H.dot(lb) - v.dot(lb);
    l.tail<3>() = lb;
    return l;
  };
  return el;
}

/// Polar and azimuthal rotations of H: commuting, both orthogonal to H (|H| is preserved).
/// Undefined on the H3 axis.
inline Eigen::Vector3d h_polar(const Eigen::Vector3d& H) {
  const double rp = std::hypot(H[0], H[1]);
  if (rp == 0.0) throw DomainError("polar field undefined on the H3 axis");
  return {H[0] * H[2] / rp, H[1] * H[2] / rp, -rp};
}

inline Eigen::Vector3d h_azimuthal(const Eigen::Vector3d& H) { return {-H[1], H[0], 0.0}; }

/// The commuting Alfven pair (polar, azimuthal) with the given constant alpha_bar vectors.
inline std::vector<SimpleElement> alfven_commuting_pair(int eps, const Eigen::Vector3d& a1 = {0.0, 0.0, 1.0},
                                                        const Eigen::Vector3d& a2 = {1.0, 0.0, 0.0}) {
  return {alfven_element_h(a1, h_polar, eps), alfven_element_h(a2, h_azimuthal, eps)};
}

/// Alfven state with v = eps H / sqrt(4 pi rho0).
inline Vector alfven_state(double rho0, double p0, const Eigen::Vector3d& H, int eps) {
  Vector u(8);
  u[0] = rho0;
  u[1] = p0;
  const double c = (eps >= 0 ? 1.0 : -1.0) * alfven_factor(rho0);
  for (int i = 0; i < 3; ++i) {
    u[2 + i] = c * H[i];
    u[5 + i] = H[i];
  }
  return u;
}

/// Stationary double Alfven wave built from a stream function Psi(x1, x2):
/// m = (dPsi/dx2, -dPsi/dx1, sqrt(1 - m1^2 - m2^2)), H = H0 m, v = eps H / sqrt(4 pi rho0).
struct AlfvenSolution {
  std::function<double(double, double)> psi;
  double H0 = 1.0, rho0 = 1.0, p0 = 1.0;
  int eps = 1;
  double gamma_poly = 5.0 / 3.0;  // stored; constant (rho, p) makes it irrelevant
  double psi_step = 1e-3;
  double max_gradient = 0.0;      // sup |grad Psi| over the feasibility box

  /// grad Psi by fourth-order central differences.
  Eigen::Vector2d grad_psi(double x1, double x2) const {
    const double h = psi_step;
    auto d = [&](double a1, double a2, double b1, double b2) {
      return (-psi(x1 + 2 * a1, x2 + 2 * a2) + 8 * psi(x1 + a1, x2 + a2) - 8 * psi(x1 + b1, x2 + b2) +
              psi(x1 + 2 * b1, x2 + 2 * b2)) /
             (12.0 * h);
    };
    return {d(h, 0, -h, 0), d(0, h, 0, -h)};
  }

  Eigen::Vector3d direction(double x1, double x2) const {
    const Eigen::Vector2d g = grad_psi(x1, x2);
    const double m1 = g[1], m2 = -g[0];
    const double s = 1.0 - m1 * m1 - m2 * m2;
    if (!(s >= 0.0)) throw DomainError("stream function gradient exceeds the unit bound");
    return {m1, m2, std::sqrt(s)};
  }

  Eigen::Vector3d H(const Vector& x) const { return H0 * direction(x[1], x[2]); }

  /// Full state at x = (t, x1, x2, x3); independent of t and x3.
  Vector state(const Vector& x) const { return alfven_state(rho0, p0, H(x), eps); }
};

/// Checks sup |grad Psi| < 1 on a sample grid of the box [lo, hi]^2.
inline AlfvenSolution alfven_build(std::function<double(double, double)> psi, double H0, double rho0, double p0,
                                   int eps, double box_lo = -std::numbers::pi, double box_hi = std::numbers::pi,
                                   int feasibility_samples = 201) {
  if (!(H0 > 0.0) || !(rho0 > 0.0) || !(p0 > 0.0))
    throw PreconditionError("Alfven solution needs H0, rho0, p0 > 0");
  if (eps != 1 && eps != -1) throw PreconditionError("eps must be +1 or -1");
  AlfvenSolution s;
  s.psi = std::move(psi);
  s.H0 = H0;
  s.rho0 = rho0;
  s.p0 = p0;
  s.eps = eps;
  for (int i = 0; i < feasibility_samples; ++i)
    for (int j = 0; j < feasibility_samples; ++j) {
      const double x1 = box_lo + (box_hi - box_lo) * i / (feasibility_samples - 1);
      const double x2 = box_lo + (box_hi - box_lo) * j / (feasibility_samples - 1);
      s.max_gradient = std::max(s.max_gradient, s.grad_psi(x1, x2).norm());
    }
  if (!(s.max_gradient < 1.0))
    throw PreconditionError("amplitude bound violated: sup |grad Psi| = " + std::to_string(s.max_gradient));
  return s;
}

inline AlfvenSolution alfven_build(const Expr& psi, double H0, double rho0, double p0, int eps,
                                   double box_lo = -std::numbers::pi, double box_hi = std::numbers::pi) {
  const CompiledExpr c = psi.compile({"x1", "x2"});
  return alfven_build(
      [c](double a, double b) {
        const double v[2] = {a, b};
        return c(v);
      },
      H0, rho0, p0, eps, box_lo, box_hi);
}

struct AlfvenReport {
  ResidualReport residual;     // all eight equations
  double gauss_max = 0.0;
  double h2_variation = 0.0;   // max |H|^2 - min |H|^2
  double alignment_max = 0.0;  // |v x H|
  double alignment_scale = 0.0;  // max |v| |H|, for rounding-level comparison
  double time_derivative_max = 0.0;
  double wave_relation_max = 0.0;  // over sampled states and element family
  double wave_relation_scale = 0.0;
  std::size_t points = 0;
};

/// Residuals on points (t, x1, x2, x3), the Gauss law, |H|^2 spread, alignment, stationarity and
/// the wave relation of Alfven elements (fixed directions and h = dH/dx^i) at the sampled states.
inline AlfvenReport alfven_verify(const AlfvenSolution& sol, const std::vector<Vector>& points, double h = 1e-4) {
  const SystemModel model = make_mhd(sol.gamma_poly);
  const auto field = [&sol](const Vector& x) { return sol.state(x); };
  AlfvenReport rep;
  rep.points = points.size();
  rep.residual = pde_residual(model, field, points, h);
  rep.gauss_max = rep.residual.constraint_max;

  double h2_lo = std::numeric_limits<double>::infinity(), h2_hi = -h2_lo;
  const std::vector<SimpleElement> fixed = {
      alfven_element({0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}, sol.eps),
      alfven_element({1.0, 2.0, -0.5}, {0.3, -1.0, 0.7}, sol.eps),
      alfven_element({-0.4, 0.9, 1.3}, {0.0, 1.0, 0.2}, sol.eps)};
  for (const auto& x : points) {
    const Vector u = sol.state(x);
    const Eigen::Vector3d v = u.segment<3>(2), H = u.segment<3>(5);
    const double h2 = H.squaredNorm();
    h2_lo = std::min(h2_lo, h2);
    h2_hi = std::max(h2_hi, h2);
    rep.alignment_max = std::max(rep.alignment_max, v.cross(H).lpNorm<Eigen::Infinity>());
    rep.alignment_scale = std::max(rep.alignment_scale, v.norm() * H.norm());
    const Matrix du = sampler_derivative(field, x, h);
    rep.time_derivative_max = std::max(rep.time_derivative_max, du.col(0).lpNorm<Eigen::Infinity>());

    std::vector<SimpleElement> els = fixed;
    for (int i = 1; i <= 2; ++i) {
      const Eigen::Vector3d dH = du.col(i).segment<3>(5);
      if (dH.norm() > 1e-12 * sol.H0)
        els.push_back(alfven_element_h({0.2, -0.3, 1.0}, [dH](const Eigen::Vector3d&) { return dH; }, sol.eps));
    }
    for (const auto& e : els) {
      const Matrix M = directional_matrix(model, e.lambda, u);
      rep.wave_relation_max = std::max(rep.wave_relation_max, (M * e.gamma(u)).norm());
      double anorm = 0.0;
      for (const auto& A : model.matrices(u)) anorm = std::max(anorm, A.norm());
      rep.wave_relation_scale = std::max(rep.wave_relation_scale, 1.0 + anorm);
    }
  }
  if (!points.empty()) rep.h2_variation = h2_hi - h2_lo;
  return rep;
}

// ---------------------------------------------------------------------------
// Shipped implicit solutions (used by the rank and gradient checks)

struct ShippedSolution {
  std::string name;
  ImplicitSolution solution;
  Vector box_lo, box_hi;  // evaluation box in x
};

inline std::vector<ShippedSolution> shipped_implicit_solutions() {
  std::vector<ShippedSolution> out;
  auto box = [](std::initializer_list<double> lo, std::initializer_list<double> hi) {
    Vector a(static_cast<int>(lo.size())), b(static_cast<int>(hi.size()));
    int i = 0;
    for (double v : lo) a[i++] = v;
    i = 0;
    for (double v : hi) b[i++] = v;
    return std::make_pair(a, b);
  };

  {  // burgers u = 0.5 tanh(x - u t)
    WaveCovector l{[](const Vector& u) {
      Vector v(2);
      v << -u[0], 1.0;
      return v;
    }};
    auto sol = closed_form_solution(
        2, 1, [](const Vector& r) { return Vector::Constant(1, 0.5 * std::tanh(r[0])); },
        [](const Vector& r) {
          const double c = std::cosh(r[0]);
          return Matrix::Constant(1, 1, 0.5 / (c * c));
        },
        {l}, {[](const Vector&) { return Vector::Ones(1); }});
    auto [lo, hi] = box({0.0, -1.0}, {0.5, 1.0});
    out.push_back({"burgers-tanh", sol, lo, hi});
  }
  {  // barotropic(1) density wave: u = 0.4, rho = 1 + 0.3 tanh(x - 0.4 t)
    auto l = barotropic_covectors(1);
    auto sol = closed_form_solution(
        2, 2,
        [](const Vector& r) {
          Vector u(2);
          u << 0.4, 1.0 + 0.3 * std::tanh(r[0]);
          return u;
        },
        {}, l, {[](const Vector&) { Vector g(2); g << 0.0, 1.0; return g; }});
    sol.domain = make_barotropic(1).domain();
    auto [lo, hi] = box({0.0, -1.0}, {1.0, 1.0});
    out.push_back({"barotropic1-density", sol, lo, hi});
  }
  {  // barotropic(2) A-invariant double wave: u = (0.5 r2^2, 0), rho = 1 + 0.1 exp(-|r|^2)
    auto sol = closed_form_solution(
        3, 3,
        [](const Vector& r) {
          Vector u(3);
          u << 0.5 * r[1] * r[1], 0.0, 1.0 + 0.1 * std::exp(-r.squaredNorm());
          return u;
        },
        {}, barotropic_covectors(2));
    sol.domain = make_barotropic(2).domain();
    auto [lo, hi] = box({0.0, -1.0, -1.0}, {0.5, 1.0, 1.0});
    out.push_back({"barotropic2-ainvariant", sol, lo, hi});
  }
  {  // surface of gamma_1 = (1, 0, 0), gamma_2 = (0, 1, u3) through (0, 0, 1)
    std::vector<SimpleElement> els(2);
    els[0].gamma = [](const Vector&) { Vector g(3); g << 1.0, 0.0, 0.0; return g; };
    els[1].gamma = [](const Vector& u) { Vector g(3); g << 0.0, 1.0, u[2]; return g; };
    auto ls = barotropic_covectors(2);  // (-u1, 1, 0), (-u2, 0, 1)
    els[0].lambda = ls[0];
    els[1].lambda = ls[1];
    Vector base(3);
    base << 0.0, 0.0, 1.0;
    const SurfaceGrid grid({GridAxis{-1.0, 1.0, 81}, GridAxis{-1.0, 1.0, 81}});
    const SurfaceMap s = integrate_surface(els, base, grid);
    auto sol = surface_solution(s, ls, 3);
    auto [lo, hi] = box({0.0, -0.4, -0.4}, {0.3, 0.4, 0.4});
    out.push_back({"exp-surface", sol, lo, hi});
  }
  {  // double Alfven surface from the commuting pair; phases from the pair's covectors
    const auto els = alfven_commuting_pair(1);
    const Vector base = alfven_state(1.0, 1.0, Eigen::Vector3d(0.6, 0.3, 0.74161984870956629), 1);
    const SurfaceGrid grid({GridAxis{-0.5, 0.5, 41}, GridAxis{-0.5, 0.5, 41}});
    const SurfaceMap s = integrate_surface(els, base, grid);
    auto sol = surface_solution(s, {els[0].lambda, els[1].lambda}, 4);
    sol.domain = make_mhd().domain();
    auto [lo, hi] = box({0.0, -0.3, -0.3, -0.3}, {0.2, 0.3, 0.3, 0.3});
    out.push_back({"alfven-surface", sol, lo, hi});
  }
  return out;
}

/// n points drawn uniformly from [lo, hi].
inline std::vector<Vector> sample_box(const Vector& lo, const Vector& hi, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vector> out;
  for (std::size_t k = 0; k < n; ++k) {
    Vector x(lo.size());
    for (int i = 0; i < lo.size(); ++i) x[i] = std::uniform_real_distribution<double>(lo[i], hi[i])(rng);
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace kwave

#endif  // KWAVE_SHOWCASE_HPP
