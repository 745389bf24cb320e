#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "kwave/implicit_solution.hpp"
#include "kwave/model.hpp"

using namespace kwave;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(Model, Burgers) {
  const auto m = registry_get("burgers");
  EXPECT_EQ(m.p(), 2);
  EXPECT_EQ(m.q(), 1);
  const auto a = m.matrices(vec({3.0}));
  EXPECT_EQ(a[0](0, 0), 1.0);
  EXPECT_EQ(a[1](0, 0), 3.0);
}

TEST(Model, BarotropicOneByHand) {
  const auto m = registry_get("barotropic", {{"n", 1}});
  EXPECT_EQ(m.p(), 2);
  EXPECT_EQ(m.q(), 2);
  Matrix expect(2, 2);
  expect << 2, 0, 5, 2;
  EXPECT_EQ(m.matrix(1, vec({2.0, 5.0})), expect);
  EXPECT_EQ(m.matrix(0, vec({2.0, 5.0})), Matrix::Identity(2, 2));

  // hand-expanded u_t + u u_x = 0, rho_t + u rho_x + rho u_x = 0
  for (const auto& u : m.domain().samples(100, 5)) {
    Matrix ax(2, 2);
    ax << u[0], 0, u[1], u[0];
    EXPECT_EQ(m.matrix(1, u), ax);
    EXPECT_EQ(m.matrix(0, u), Matrix::Identity(2, 2));
  }
}

TEST(Model, BarotropicTwoStructure) {
  const auto m = make_barotropic(2);
  EXPECT_EQ(m.p(), 3);
  EXPECT_EQ(m.q(), 3);
  EXPECT_EQ(m.unknowns(), (std::vector<std::string>{"u1", "u2", "rho"}));
  const auto a = m.matrices(vec({0.5, -0.25, 2.0}));
  Matrix a1(3, 3), a2(3, 3);
  a1 << 0.5, 0, 0, 0, 0.5, 0, 2.0, 0, 0.5;
  a2 << -0.25, 0, 0, 0, -0.25, 0, 0, 2.0, -0.25;
  EXPECT_EQ(a[1], a1);
  EXPECT_EQ(a[2], a2);
}

TEST(Model, MhdResidualOnCircularAlfvenWave) {
  // exact nonlinear Alfven wave along x1: H = (B0, a cos k(x1 - c t), a sin k(x1 - c t)),
  // v = -(H - B0 e1) / sqrt(4 pi rho), c = B0 / sqrt(4 pi rho)
  const auto m = registry_get("mhd");
  EXPECT_EQ(m.p(), 4);
  EXPECT_EQ(m.q(), 8);
  const double rho = 1.3, p = 0.8, B0 = 0.9, amp = 0.4, k = 1.7;
  const double s = 1.0 / std::sqrt(4.0 * std::numbers::pi * rho), c = B0 * s;
  auto field = [&](const Vector& x) {
    const double ph = k * (x[1] - c * x[0]);
    Vector u(8);
    u << rho, p, 0.0, -s * amp * std::cos(ph), -s * amp * std::sin(ph), B0, amp * std::cos(ph), amp * std::sin(ph);
    return u;
  };
  std::vector<Vector> pts;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int i = 0; i < 50; ++i) pts.push_back(vec({d(rng), d(rng), d(rng), d(rng)}));
  const auto rep = pde_residual(m, field, pts, 1e-4);
  EXPECT_LE(rep.max, 1e-9);
  EXPECT_LE(rep.constraint_max, 1e-12);
  ASSERT_EQ(rep.constraint_names, std::vector<std::string>{"gauss"});

  // the wrong sign of v is not a solution
  auto wrong = [&](const Vector& x) {
    Vector u = field(x);
    u.segment<2>(3) *= -1.0;
    return u;
  };
  EXPECT_GT(pde_residual(m, wrong, pts, 1e-4).max, 1e-2);
}

TEST(Model, MhdTimeBlock) {
  const auto m = make_mhd(1.4);
  const Vector u = vec({2.0, 3.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  const Matrix a0 = m.matrix(0, u);
  Matrix expect = Matrix::Zero(8, 8);
  expect(0, 0) = 1.0;
  expect(1, 1) = 1.0;
  expect(1, 0) = -1.4 * 3.0 / 2.0;
  for (int i = 0; i < 3; ++i) {
    expect(2 + i, 2 + i) = 2.0;
    expect(5 + i, 5 + i) = 1.0;
  }
  EXPECT_EQ(a0, expect);
}

TEST(Model, RegistryErrors) {
  EXPECT_THROW(registry_get("euler"), PreconditionError);
  EXPECT_THROW(registry_get("barotropic"), PreconditionError);
  EXPECT_THROW(registry_get("barotropic", {{"n", 0}}), PreconditionError);
  EXPECT_THROW(registry_get("barotropic", {{"n", 1.5}}), PreconditionError);
  EXPECT_THROW(registry_get("mhd", {{"gamma", -1}}), PreconditionError);
  EXPECT_THROW(make_barotropic(0), PreconditionError);
}

TEST(Model, CustomFromExpressions) {
  // p-system written as a custom model: (u1, u2) = (v, w), v_t - w_x = 0, w_t + u1^-2 v_x = 0
  std::vector<std::vector<std::vector<Expr>>> e(2);
  e[0] = {{Expr::parse("1"), Expr::parse("0")}, {Expr::parse("0"), Expr::parse("1")}};
  e[1] = {{Expr::parse("0"), Expr::parse("-1")}, {Expr::parse("u1^-2"), Expr::parse("0")}};
  ModelDomain dom(2);
  dom.constrain(0, 0.0, std::numeric_limits<double>::infinity());
  const auto m = make_custom("psystem", 2, 2, e, dom);
  const Matrix a1 = m.matrix(1, vec({2.0, 7.0}));
  EXPECT_EQ(a1(1, 0), 0.25);
  EXPECT_EQ(a1(0, 1), -1.0);
  EXPECT_THROW(make_custom("bad", 2, 2, {e[0]}, dom), PreconditionError);
  std::vector<std::vector<std::vector<Expr>>> unbound = e;
  unbound[1][0][0] = Expr::parse("rho");
  EXPECT_THROW(make_custom("bad", 2, 2, unbound, dom), UnboundVariableError);
}

TEST(Model, DomainSamplesRespectBounds) {
  const auto m = make_mhd();
  for (const auto& u : m.domain().samples(200, 42)) {
    EXPECT_TRUE(m.domain().contains(u));
    EXPECT_GT(u[0], 0.0);
    EXPECT_GT(u[1], 0.0);
  }
  ModelDomain d(2);
  d.constrain(1, 0.0, 1.0);
  for (const auto& u : d.samples(200, 1)) EXPECT_TRUE(u[1] > 0.0 && u[1] < 1.0);
  EXPECT_THROW(d.sample_box(1, -0.5, 0.5), PreconditionError);
  EXPECT_THROW(d.require(vec({0.0, 2.0})), DomainError);
  // same seed, same states
  EXPECT_EQ(d.samples(5, 9)[4], d.samples(5, 9)[4]);
}

TEST(Model, JacobianExamples) {
  const VectorField swap = [](const Vector& u) { return vec({u[1], u[0]}); };
  Matrix expect(2, 2);
  expect << 0, 1, 1, 0;
  EXPECT_LE((jacobian_u(swap, vec({0.3, -7.0})) - expect).lpNorm<Eigen::Infinity>(), 1e-12);

  const VectorField bil = [](const Vector& u) { return vec({u[0] * u[1], 0.0}); };
  expect << 3, 2, 0, 0;
  EXPECT_LE((jacobian_u(bil, vec({2.0, 3.0}), 1e-5) - expect).lpNorm<Eigen::Infinity>(), 1e-8);

  const VectorField cst = [](const Vector&) { return vec({1.0, 2.0, 3.0}); };
  EXPECT_EQ(jacobian_u(cst, vec({1.0, 1.0})), Matrix::Zero(3, 2));
}

TEST(Model, JacobianQuadraticWithinTenHSquared) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-2, 2);
  const VectorField quad = [](const Vector& u) {
    return vec({u[0] * u[0] - 3 * u[1] * u[2], u[1] * u[1] + u[0], 0.5 * u[2] * u[2] * u[0]});
  };
  for (int i = 0; i < 50; ++i) {
    const Vector u = vec({d(rng), d(rng), d(rng)});
    Matrix J(3, 3);
    J << 2 * u[0], -3 * u[2], -3 * u[1], 1, 2 * u[1], 0, 0.5 * u[2] * u[2], 0, u[2] * u[0];
    const double h = 1e-3;
    EXPECT_LE((jacobian_u(quad, u, h) - J).lpNorm<Eigen::Infinity>(), 10 * h * h);
  }
}

TEST(Model, JacobianDomainExit) {
  ModelDomain d(1);
  d.constrain(0, 0.0, std::numeric_limits<double>::infinity());
  const VectorField f = [](const Vector& u) { return vec({std::sqrt(u[0])}); };
  EXPECT_THROW(jacobian_u(f, vec({1e-7}), 1e-5, &d), DomainError);
  EXPECT_NEAR(jacobian_u(f, vec({4.0}), 1e-5, &d)(0, 0), 0.25, 1e-9);
}
