#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "kwave/implicit_solution.hpp"
#include "kwave/showcase.hpp"

using namespace kwave;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

WaveCovector burgers_lambda() {
  return {[](const Vector& u) { return vec({-u[0], 1.0}); }};
}

// u = sign * (x - u t), with x = (t, x)
ImplicitSolution burgers_linear(double sign) {
  return closed_form_solution(
      2, 1, [sign](const Vector& r) { return Vector::Constant(1, sign * r[0]); },
      [sign](const Vector&) { return Matrix::Constant(1, 1, sign); }, {burgers_lambda()},
      {[](const Vector&) { return Vector::Ones(1); }});
}

}  // namespace

TEST(ImplicitSolution, ConstantMap) {
  const auto sol = closed_form_solution(
      2, 2, [](const Vector&) { return vec({0.3, 1.2}); }, {}, {burgers_lambda()},
      {[](const Vector&) { return vec({1.0, 0.0}); }});
  for (const auto& x : {vec({0.0, 0.0}), vec({2.0, -3.0}), vec({0.7, 11.0})}) {
    const auto ps = solve_point(sol, x);
    EXPECT_EQ(ps.u, vec({0.3, 1.2}));
    EXPECT_LE((ps.phi.phi - Matrix::Identity(1, 1)).norm(), 1e-14);
    const auto d = derivative_matrix(sol, x, ps.u, ps.phi);
    EXPECT_EQ(d.du_dx, Matrix::Zero(2, 2));
    EXPECT_EQ(d.rank, 0);
    ASSERT_EQ(d.xi.size(), 1);
    EXPECT_EQ(d.xi[0], 0.0);
    EXPECT_EQ(d.vanishing_xi, std::vector<int>{0});
  }
}

TEST(ImplicitSolution, BurgersRarefaction) {
  const auto sol = burgers_linear(1.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> dt(0, 2), dx(-3, 3);
  for (int i = 0; i < 100; ++i) {
    const double t = dt(rng), x = dx(rng);
    const auto ps = solve_point(sol, vec({t, x}));
    EXPECT_NEAR(ps.u[0], x / (1 + t), 1e-12);
    EXPECT_NEAR(ps.phi.det, 1 + t, 1e-9);
    const auto d = derivative_matrix(sol, vec({t, x}), ps.u, ps.phi);
    EXPECT_NEAR(d.du_dx(0, 0), -ps.u[0] / (1 + t), 1e-10);
    EXPECT_NEAR(d.du_dx(0, 1), 1.0 / (1 + t), 1e-10);
    EXPECT_NEAR(d.xi[0], 1.0 / (1 + t), 1e-10);
    EXPECT_LE(d.xi_residual, 1e-12);
  }
}

TEST(ImplicitSolution, BurgersCompressionCatastrophe) {
  const auto sol = burgers_linear(-1.0);
  const auto early = solve_point(sol, vec({0.5, 0.4}));
  EXPECT_NEAR(early.u[0], -0.4 / 0.5, 1e-12);
  EXPECT_NEAR(early.phi.det, 0.5, 1e-9);
  try {
    solve_point(sol, vec({1.0 - 1e-10, 0.3}));
    FAIL() << "expected a gradient catastrophe";
  } catch (const CatastropheError& e) {
    EXPECT_LE(std::abs(e.determinant()), 1e-8);
  }
  const auto loc = locate_catastrophe(sol, vec({0.5, 0.2}), 0.5, 1.5);
  EXPECT_NEAR(loc.t, 1.0, 1e-8);
  EXPECT_LE(std::abs(loc.det), 1e-8);
  EXPECT_THROW(locate_catastrophe(sol, vec({0.0, 0.2}), 0.0, 0.5), PreconditionError);
}

TEST(ImplicitSolution, PhiIsIdentityAtOrigin) {
  for (const auto& s : shipped_implicit_solutions()) {
    const Vector x0 = Vector::Zero(s.solution.p);
    const auto ps = solve_point(s.solution, x0);
    EXPECT_LE((ps.phi.phi - Matrix::Identity(s.solution.k, s.solution.k)).norm(), 1e-12) << s.name;
  }
}

TEST(ImplicitSolution, ShippedRankAndGradient) {
  for (const auto& s : shipped_implicit_solutions()) {
    const auto field = solution_sampler(s.solution);
    for (const auto& x : sample_box(s.box_lo, s.box_hi, 10, 3)) {
      const auto ps = solve_point(s.solution, x);
      EXPECT_LE(ps.residual, 1e-12);
      const auto d = derivative_matrix(s.solution, x, ps.u, ps.phi);
      EXPECT_LE(d.rank, s.solution.k) << s.name;
      const double h = 1e-4;
      const Matrix fd = sampler_derivative(field, x, h, 2);
      EXPECT_LE((fd - d.du_dx).lpNorm<Eigen::Infinity>(), 5e-8 + 10 * h * h) << s.name;
    }
  }
}

TEST(ImplicitSolution, KOneIsADyad) {
  for (const auto& s : shipped_implicit_solutions()) {
    if (s.solution.k != 1) continue;
    for (const auto& x : sample_box(s.box_lo, s.box_hi, 20, 4)) {
      const auto ps = solve_point(s.solution, x);
      const auto d = derivative_matrix(s.solution, x, ps.u, ps.phi);
      if (d.singular_values.size() > 1 && d.singular_values[0] > 0) {
        EXPECT_LE(d.singular_values[1] / d.singular_values[0], 1e-10) << s.name;
      }
    }
  }
}

TEST(Pfaffian, BurgersForm) {
  const auto sol = as_pfaffian(burgers_linear(1.0));
  for (const auto& x : {vec({0.5, 1.0}), vec({2.0, -3.0}), vec({0.0, 0.25})}) {
    const auto pf = solve_pfaffian_point(sol, x, vec({0.0}));
    EXPECT_NEAR(pf.r[0], x[1] / (1 + x[0]), 1e-13);
    EXPECT_NEAR(pf.u[0], solve_point(sol, x).u[0], 1e-10);
  }
}

TEST(Pfaffian, TwoInvariantsLinearCase) {
  // lambda^1 = (1, r2, 0), lambda^2 = (1, 0, r1), psi = 0: r2 = -x1/x2, r1 = -x1/x3
  ImplicitSolution sol;
  sol.k = 2;
  sol.p = 3;
  sol.q = 2;
  sol.f = [](const Vector& r) { return r; };
  sol.lambdas = {{[](const Vector&) { return vec({1, 0, 0}); }}, {[](const Vector&) { return vec({1, 0, 0}); }}};
  sol.pfaffian_lambda = [](int s, const Vector& r) { return s == 0 ? vec({1.0, r[1], 0.0}) : vec({1.0, 0.0, r[0]}); };
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.5, 2.0);
  for (int i = 0; i < 50; ++i) {
    const Vector x = vec({d(rng) - 1.25, d(rng), -d(rng)});
    const auto pf = solve_pfaffian_point(sol, x, vec({0.0, 0.0}));
    EXPECT_NEAR(pf.r[0], -x[0] / x[2], 1e-12);
    EXPECT_NEAR(pf.r[1], -x[0] / x[1], 1e-12);
    EXPECT_LE(pfaffian_residual(sol, x, pf.r).lpNorm<Eigen::Infinity>(), 1e-13 * (1 + x.lpNorm<Eigen::Infinity>()));
  }
  // x2 = x3 = 0 leaves r undetermined
  EXPECT_THROW(solve_pfaffian_point(sol, vec({1.0, 0.0, 0.0}), vec({0.1, 0.2})), SingularError);
}

TEST(Pfaffian, AgreesWithDirectSolveOnShipped) {
  for (const auto& s : shipped_implicit_solutions()) {
    if (s.solution.k != 1) continue;
    const auto pf = as_pfaffian(s.solution);
    for (const auto& x : sample_box(s.box_lo, s.box_hi, 20, 6)) {
      const auto direct = solve_point(s.solution, x);
      const auto r = solve_pfaffian_point(pf, x, direct.r * 0.9);
      EXPECT_LE((direct.u - r.u).lpNorm<Eigen::Infinity>(), 1e-10) << s.name;
    }
  }
}

TEST(Residual, BurgersExactSolution) {
  const auto m = make_burgers();
  const auto field = [](const Vector& x) { return Vector::Constant(1, x[1] / (1 + x[0])); };
  std::vector<Vector> pts;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dt(0, 0.5), dx(-1, 1);
  for (int i = 0; i < 100; ++i) pts.push_back(vec({dt(rng), dx(rng)}));
  EXPECT_LE(pde_residual(m, field, pts, 1e-4).max, 1e-8);
  // and through the implicit solver
  EXPECT_LE(pde_residual(m, solution_sampler(burgers_linear(1.0)), pts, 1e-4).max, 1e-8);
  // a non-solution is caught
  const auto wrong = [](const Vector& x) { return Vector::Constant(1, x[1] / (1 + 2 * x[0])); };
  EXPECT_GT(pde_residual(m, wrong, pts, 1e-4).max, 1e-2);
}

TEST(Residual, ConstantFieldIsExactlyZero) {
  const auto m = make_mhd();
  const Vector c = m.domain().samples(1, 9)[0];
  const auto field = [&](const Vector&) { return c; };
  const auto rep = pde_residual(m, field, sample_box(Vector::Zero(4), Vector::Ones(4), 20, 1));
  EXPECT_EQ(rep.max, 0.0);
  EXPECT_EQ(rep.constraint_max, 0.0);
}

TEST(Residual, SamplerDerivativeOrder) {
  const auto field = [](const Vector& x) { return Vector::Constant(1, std::sin(x[0]) * std::exp(x[1])); };
  const Vector x = vec({0.3, -0.2});
  const double exact = std::cos(0.3) * std::exp(-0.2);
  const double e2 = std::abs(sampler_derivative(field, x, 1e-2, 2)(0, 0) - exact);
  const double e4 = std::abs(sampler_derivative(field, x, 1e-2, 4)(0, 0) - exact);
  EXPECT_LT(e4, e2 * 1e-3);
  EXPECT_NEAR(e2, exact * 1e-4 / 6, 1e-7);
}
