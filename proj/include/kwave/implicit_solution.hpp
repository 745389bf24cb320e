#ifndef KWAVE_IMPLICIT_SOLUTION_HPP
#define KWAVE_IMPLICIT_SOLUTION_HPP

// Solutions given implicitly by u = f(r(x, u)), r^s = lambda^s(u) . x, and the Pfaffian form
// lambda^s(r) . x = psi^s(r).

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kwave/error.hpp"
#include "kwave/model.hpp"
#include "kwave/surface.hpp"
#include "kwave/wave_algebra.hpp"

namespace kwave {

using MapR = std::function<Vector(const Vector&)>;
using JacobianR = std::function<Matrix(const Vector&)>;

struct ImplicitSolution {
  int k = 0, p = 0, q = 0;
  MapR f;                              // r -> u
  JacobianR df;                        // r -> q x k; finite differences when empty
  std::vector<WaveCovector> lambdas;   // lambda^s(u)
  std::vector<VectorField> gammas;     // optional, for amplitude recovery
  /// Pfaffian data: lambda^s as functions of r (default lambda^s(f(r))) and psi (default 0).
  std::function<Vector(int, const Vector&)> pfaffian_lambda;
  MapR psi;
  std::optional<ModelDomain> domain;

  Vector eval_f(const Vector& r) const {
    Vector u = f(r);
    if (!u.allFinite()) throw DomainError("f(r) is not finite");
    return u;
  }

  Matrix eval_df(const Vector& r) const {
    if (df) return df(r);
    return jacobian_u(f, r);
  }

  /// r^s(x, u) = lambda^s(u) . x
  Vector invariants(const Vector& x, const Vector& u) const {
    Vector r(k);
    for (int s = 0; s < k; ++s) r[s] = riemann_invariant(lambdas[s], x, u);
    return r;
  }

  /// dr / du (k x q) = (d lambda / du) x.
  Matrix invariant_gradient(const Vector& x, const Vector& u) const {
    const ModelDomain* dom = domain ? &*domain : nullptr;
    return jacobian_u([&](const Vector& v) { return invariants(x, v); }, u, 0.0, dom);
  }

  void validate() const {
    if (k < 1 || p < 1 || q < 1) throw PreconditionError("implicit solution needs k, p, q >= 1");
    if (!f) throw PreconditionError("implicit solution has no map f");
    if (static_cast<int>(lambdas.size()) != k) throw PreconditionError("need k wave covectors");
    if (!gammas.empty() && static_cast<int>(gammas.size()) != k)
      throw PreconditionError("need k characteristic fields or none");
  }
};

inline ImplicitSolution closed_form_solution(int p, int q, MapR f, JacobianR df, std::vector<WaveCovector> lambdas,
                                             std::vector<VectorField> gammas = {}) {
  ImplicitSolution s;
  s.k = static_cast<int>(lambdas.size());
  s.p = p;
  s.q = q;
  s.f = std::move(f);
  s.df = std::move(df);
  s.lambdas = std::move(lambdas);
  s.gammas = std::move(gammas);
  s.validate();
  return s;
}

/// f from the Hermite interpolant of a surface; gammas are the surface's elements.
inline ImplicitSolution surface_solution(const SurfaceMap& surface, std::vector<WaveCovector> lambdas, int p) {
  auto interp = std::make_shared<const SurfaceInterpolant>(surface);
  ImplicitSolution s;
  s.k = surface.grid.dims();
  s.p = p;
  s.q = static_cast<int>(surface.base.size());
  s.f = [interp](const Vector& r) { return interp->value(r); };
  s.df = [interp](const Vector& r) { return interp->jacobian(r); };
  s.lambdas = std::move(lambdas);
  for (const auto& e : surface.elements) s.gammas.push_back(e.gamma);
  s.validate();
  return s;
}

/// Pfaffian form of a direct solution: lambda^s(r) = lambda^s(f(r)), psi(r) = r.
inline ImplicitSolution as_pfaffian(ImplicitSolution s) {
  auto f = s.f;
  auto lambdas = s.lambdas;
  s.pfaffian_lambda = [f, lambdas](int i, const Vector& r) { return lambdas.at(i)(f(r)); };
  s.psi = [](const Vector& r) { return r; };
  return s;
}

struct PhiMatrix {
  Matrix phi;
  double det = 1.0;
  double condition = 1.0;
};

/// phi = I_k - (dr/du)(df/dr).
inline PhiMatrix phi_matrix(const ImplicitSolution& sol, const Vector& x, const Vector& u) {
  const Vector r = sol.invariants(x, u);
  PhiMatrix out;
  out.phi = Matrix::Identity(sol.k, sol.k) - sol.invariant_gradient(x, u) * sol.eval_df(r);
  out.det = out.phi.determinant();
  Eigen::JacobiSVD<Matrix> svd(out.phi);
  const Vector& sv = svd.singularValues();
  out.condition = sv[sv.size() - 1] == 0.0 ? std::numeric_limits<double>::infinity() : sv[0] / sv[sv.size() - 1];
  return out;
}

struct SolveOptions {
  double tol_fix = 1e-12;
  int max_iter = 50;
  double tol_cat = 1e-8;
  bool check_catastrophe = true;
  int pre_iterations = 3;
};

struct PointSolution {
  Vector u;
  Vector r;
  PhiMatrix phi;
  int iterations = 0;
  double residual = 0.0;  // |u - f(r(x, u))|_inf
};

/// Newton iteration on g(u) = u - f(r(x, u)) after a few fixed-point sweeps. The default start is
/// f(r(x, f(0))). Converged iterates are polished until the residual stops decreasing.
inline PointSolution solve_point(const ImplicitSolution& sol, const Vector& x,
                                 const std::optional<Vector>& u0 = std::nullopt, const SolveOptions& opt = {}) {
  if (x.size() != sol.p) throw PreconditionError("point has wrong dimension");
  auto g = [&](const Vector& u) -> Vector { return u - sol.eval_f(sol.invariants(x, u)); };
  Vector u;
  if (u0) {
    u = *u0;
  } else {
    u = sol.eval_f(sol.invariants(x, sol.eval_f(Vector::Zero(sol.k))));
  }
  for (int i = 0; i < opt.pre_iterations; ++i) {
    try {
      Vector next = sol.eval_f(sol.invariants(x, u));
      if (!next.allFinite() || (sol.domain && !sol.domain->contains(next))) break;
      if ((next - u).lpNorm<Eigen::Infinity>() > 10.0 * std::max(1.0, u.lpNorm<Eigen::Infinity>())) break;
      u = std::move(next);
    } catch (const DomainError&) {
      break;
    }
  }

  PointSolution out;
  Vector gu = g(u);
  double res = gu.lpNorm<Eigen::Infinity>();
  bool converged = false;
  int polish = 0;
  for (int it = 0; it < opt.max_iter; ++it) {
    out.iterations = it;
    const Vector r = sol.invariants(x, u);
    const Matrix Df = sol.eval_df(r);
    const Matrix R = sol.invariant_gradient(x, u);
    const Matrix phi = Matrix::Identity(sol.k, sol.k) - R * Df;
    const double det = phi.determinant();
    if (opt.check_catastrophe && std::abs(det) <= opt.tol_cat)
      throw CatastropheError("gradient catastrophe: |det phi| = " + std::to_string(std::abs(det)), det);
    if (res <= opt.tol_fix) {
      converged = true;
      if (res == 0.0 || polish >= 3) break;
    }
    const Matrix jac = Matrix::Identity(sol.q, sol.q) - Df * R;
    const Vector step = jac.fullPivLu().solve(gu);
    if (!step.allFinite()) throw SingularError("singular Newton matrix");
    const Vector trial = u - step;
    Vector gt;
    try {
      gt = g(trial);
    } catch (const DomainError&) {
      if (converged) break;
      throw;
    }
    const double rt = gt.lpNorm<Eigen::Infinity>();
    if (converged) {
      ++polish;
      if (!(rt < res)) break;
    }
    u = trial;
    gu = std::move(gt);
    res = rt;
  }
  if (!(res <= opt.tol_fix))
    throw ConvergenceError("implicit solve did not converge (|g| = " + std::to_string(res) + ")");
  out.u = u;
  out.r = sol.invariants(x, u);
  out.phi = phi_matrix(sol, x, u);
  out.residual = res;
  if (opt.check_catastrophe && std::abs(out.phi.det) <= opt.tol_cat)
    throw CatastropheError("gradient catastrophe: |det phi| = " + std::to_string(std::abs(out.phi.det)),
                           out.phi.det);
  return out;
}

struct PfaffianSolution {
  Vector r;
  Vector u;
  int iterations = 0;
  double residual = 0.0;
};

/// Residuals lambda^s(r) . x - psi^s(r).
inline Vector pfaffian_residual(const ImplicitSolution& sol, const Vector& x, const Vector& r) {
  Vector out(sol.k);
  const Vector psi = sol.psi ? sol.psi(r) : Vector::Zero(sol.k);
  for (int s = 0; s < sol.k; ++s) {
    const Vector l = sol.pfaffian_lambda ? sol.pfaffian_lambda(s, r) : Vector(sol.lambdas[s](sol.eval_f(r)));
    out[s] = l.dot(x) - psi[s];
  }
  return out;
}

/// Newton solve of the Pfaffian residuals for r; u = f(r).
inline PfaffianSolution solve_pfaffian_point(const ImplicitSolution& sol, const Vector& x, Vector r0,
                                             double tol = 1e-13, int max_iter = 50) {
  if (x.size() != sol.p) throw PreconditionError("point has wrong dimension");
  if (r0.size() != sol.k) throw PreconditionError("initial invariants have wrong dimension");
  auto F = [&](const Vector& r) { return pfaffian_residual(sol, x, r); };
  PfaffianSolution out;
  Vector r = std::move(r0);
  Vector Fr = F(r);
  double res = Fr.lpNorm<Eigen::Infinity>();
  const double scale = 1.0 + x.lpNorm<Eigen::Infinity>();
  int polish = 0;
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it;
    if (res <= tol * scale) {
      if (res == 0.0 || polish >= 2) break;
    }
    const Matrix J = jacobian_u(F, r);
    Eigen::FullPivLU<Matrix> lu(J);
    if (!lu.isInvertible() || std::abs(J.determinant()) <= 1e-14 * std::max(1.0, J.lpNorm<Eigen::Infinity>()))
      throw SingularError("singular Pfaffian Jacobian (gradient catastrophe)");
    const Vector trial = r - lu.solve(Fr);
    const Vector Ft = F(trial);
    const double rt = Ft.lpNorm<Eigen::Infinity>();
    if (res <= tol * scale) {
      ++polish;
      if (!(rt < res)) break;
    }
    r = trial;
    Fr = Ft;
    res = rt;
  }
  if (!(res <= tol * scale))
    throw ConvergenceError("Pfaffian solve did not converge (residual " + std::to_string(res) + ")");
  out.r = r;
  out.u = sol.eval_f(r);
  out.residual = res;
  return out;
}

struct DecompositionResult {
  Matrix du_dx;           // q x p
  Vector xi;              // amplitudes, empty without attached fields
  double xi_residual = 0.0;
  Vector singular_values;
  int rank = 0;
  std::vector<int> vanishing_xi;  // indices with |xi^s| below 1e-12
};

/// du/dx = Df phi^{-1} Lambda, with Lambda the k x p matrix of covectors at u.
inline DecompositionResult derivative_matrix(const ImplicitSolution& sol, const Vector& x, const Vector& u,
                                             const PhiMatrix& phi, double rank_tol = 1e-10) {
  Eigen::FullPivLU<Matrix> lu(phi.phi);
  if (!lu.isInvertible()) throw SingularError("phi is singular");
  Matrix Lambda(sol.k, sol.p);
  for (int s = 0; s < sol.k; ++s) Lambda.row(s) = sol.lambdas[s](u).transpose();
  const Vector r = sol.invariants(x, u);
  DecompositionResult out;
  out.du_dx = sol.eval_df(r) * lu.solve(Lambda);
  Eigen::JacobiSVD<Matrix> svd(out.du_dx);
  out.singular_values = svd.singularValues();
  const double smax = out.singular_values.size() ? out.singular_values[0] : 0.0;
  for (int i = 0; i < out.singular_values.size(); ++i)
    if (smax > 0.0 && out.singular_values[i] > rank_tol * smax) ++out.rank;

  if (!sol.gammas.empty()) {
    // least squares on vec(du/dx) against the dyads gamma_s lambda^s
    Matrix A(sol.q * sol.p, sol.k);
    for (int s = 0; s < sol.k; ++s) {
      const Matrix dyad = sol.gammas[s](u) * Lambda.row(s);
      A.col(s) = Eigen::Map<const Vector>(dyad.data(), dyad.size());
    }
    const Vector b = Eigen::Map<const Vector>(out.du_dx.data(), out.du_dx.size());
    out.xi = A.colPivHouseholderQr().solve(b);
    out.xi_residual = (A * out.xi - b).norm();
    for (int s = 0; s < sol.k; ++s)
      if (std::abs(out.xi[s]) <= 1e-12) out.vanishing_xi.push_back(s);
  }
  return out;
}

struct ResidualReport {
  double max = 0.0;
  double rms = 0.0;
  Vector per_equation;        // max |residual| per row
  std::vector<double> per_point;
  double constraint_max = 0.0;
  double constraint_rms = 0.0;
  std::vector<std::string> constraint_names;
};

/// Central-difference derivative matrix du/dx (q x p) of a sampler; order 2 or 4.
inline Matrix sampler_derivative(const std::function<Vector(const Vector&)>& field, const Vector& x, double h,
                                 int order = 4) {
  const int p = static_cast<int>(x.size());
  Matrix d;
  Vector probe = x;
  for (int i = 0; i < p; ++i) {
    auto at = [&](double off) {
      probe[i] = x[i] + off;
      Vector v = field(probe);
      probe[i] = x[i];
      return v;
    };
    Vector col;
    if (order == 4) col = ((at(-2 * h) - at(2 * h)) + 8.0 * (at(h) - at(-h))) / (12.0 * h);  // exact 0 on constants
    else col = (at(h) - at(-h)) / (2.0 * h);
    if (i == 0) d.resize(col.size(), p);
    d.col(i) = col;
  }
  return d;
}

/// Residual sum_i A^i(u) u_i of a field x -> u at the given points.
inline ResidualReport pde_residual(const SystemModel& m, const std::function<Vector(const Vector&)>& field,
                                   const std::vector<Vector>& points, double h = 1e-4, int order = 4) {
  ResidualReport rep;
  rep.per_equation = Vector::Zero(m.q());
  rep.per_point.assign(points.size(), 0.0);
  rep.constraint_names = m.constraint_names();
  std::vector<Vector> rows(points.size());
  std::vector<Vector> cons(points.size());
  parallel_for(points.size(), [&](std::size_t a) {
    const Vector u = field(points[a]);
    const Matrix du = sampler_derivative(field, points[a], h, order);
    const auto A = m.matrices(u);
    Vector res = Vector::Zero(m.q());
    for (int i = 0; i < m.p(); ++i) res += A[i] * du.col(i);
    rows[a] = res;
    cons[a] = m.constraints(u, du);
  });
  double sq = 0.0, csq = 0.0;
  std::size_t ccount = 0;
  for (std::size_t a = 0; a < points.size(); ++a) {
    const double v = rows[a].lpNorm<Eigen::Infinity>();
    rep.per_point[a] = v;
    rep.max = std::max(rep.max, v);
    sq += rows[a].squaredNorm() / m.q();
    rep.per_equation = rep.per_equation.cwiseMax(rows[a].cwiseAbs());
    for (int c = 0; c < cons[a].size(); ++c) {
      rep.constraint_max = std::max(rep.constraint_max, std::abs(cons[a][c]));
      csq += cons[a][c] * cons[a][c];
      ++ccount;
    }
  }
  if (!points.empty()) rep.rms = std::sqrt(sq / points.size());
  if (ccount) rep.constraint_rms = std::sqrt(csq / ccount);
  return rep;
}

/// Solution field x -> u of an implicit solution, warm-started from the previous solve.
inline std::function<Vector(const Vector&)> solution_sampler(const ImplicitSolution& sol, SolveOptions opt = {}) {
  return [sol, opt](const Vector& x) { return solve_point(sol, x, std::nullopt, opt).u; };
}

struct CatastropheLocation {
  double t = 0.0;
  double det = 0.0;
  int iterations = 0;
};

/// Bisection in the coordinate `axis` of x on the sign of det phi between lo and hi, stopping when
/// |det phi| <= tol_cat. Points where the solve itself breaks down count as past the catastrophe.
inline CatastropheLocation locate_catastrophe(const ImplicitSolution& sol, Vector x, double lo, double hi,
                                              int axis = 0, double tol_cat = 1e-8, int max_iter = 200) {
  SolveOptions opt;
  opt.check_catastrophe = false;
  auto det_at = [&](double t) {
    x[axis] = t;
    try {
      return phi_matrix(sol, x, solve_point(sol, x, std::nullopt, opt).u).det;
    } catch (const ConvergenceError&) {
    } catch (const SingularError&) {
    } catch (const DomainError&) {
    }
    return std::numeric_limits<double>::quiet_NaN();
  };
  double dlo = det_at(lo);
  if (std::isnan(dlo)) throw PreconditionError("no solution at the lower end of the bracket");
  double dhi = det_at(hi);
  if (std::abs(dlo) <= tol_cat) return {lo, dlo, 0};
  if (std::abs(dhi) <= tol_cat) return {hi, dhi, 0};
  if (!std::isnan(dhi) && (dlo > 0) == (dhi > 0))
    throw PreconditionError("det phi does not change sign on the bracket");
  CatastropheLocation out;
  for (int it = 1; it <= max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double dm = det_at(mid);
    out = {mid, dm, it};
    if (std::abs(dm) <= tol_cat) return out;
    if (!std::isnan(dm) && (dm > 0) == (dlo > 0)) {
      lo = mid;
      dlo = dm;
    } else {
      hi = mid;
    }
  }
  throw ConvergenceError("catastrophe bisection did not reach tolerance");
}

}  // namespace kwave

#endif  // KWAVE_IMPLICIT_SOLUTION_HPP
