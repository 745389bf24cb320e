#ifndef KWAVE_MODEL_HPP
#define KWAVE_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kwave/error.hpp"
#include "kwave/expr.hpp"

namespace kwave {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Vector-valued function on state space (or any R^n).
using VectorField = std::function<Vector(const Vector&)>;

/// Default central-difference step for states of size |u|.
inline double default_fd_step(const Vector& u) {
  return 1e-5 * std::max(1.0, u.size() ? u.lpNorm<Eigen::Infinity>() : 0.0);
}

/// Box constraints on u and the finite box used to draw sample states.
class ModelDomain {
 public:
  ModelDomain() = default;

  /// Unconstrained domain of dimension q sampled from [-1, 1]^q.
  explicit ModelDomain(int q)
      : lower_(q, -std::numeric_limits<double>::infinity()),
        upper_(q, std::numeric_limits<double>::infinity()),
        sample_lower_(q, -1.0),
        sample_upper_(q, 1.0) {}

  int dimension() const noexcept { return static_cast<int>(lower_.size()); }

  /// Open bound lo < u[i] < hi.
  ModelDomain& constrain(int i, double lo, double hi) {
    lower_.at(i) = lo;
    upper_.at(i) = hi;
    sample_lower_[i] = std::max(sample_lower_[i], std::isfinite(lo) ? lo + 0.1 : lo);
    sample_upper_[i] = std::min(sample_upper_[i], std::isfinite(hi) ? hi - 0.1 : hi);
    if (!(sample_lower_[i] < sample_upper_[i])) {
      sample_lower_[i] = std::isfinite(lo) ? lo + 0.1 : hi - 1.1;
      sample_upper_[i] = std::isfinite(hi) ? hi - 0.1 : lo + 1.1;
    }
    return *this;
  }

  ModelDomain& sample_box(int i, double lo, double hi) {
    if (!(lo < hi) || lo <= lower_.at(i) || hi >= upper_.at(i))
      throw PreconditionError("sample box for component " + std::to_string(i) +
                              " must lie strictly inside the domain");
    sample_lower_[i] = lo;
    sample_upper_[i] = hi;
    return *this;
  }

  bool contains(const Vector& u) const {
    if (u.size() != dimension()) return false;
    for (int i = 0; i < dimension(); ++i) {
      if (!std::isfinite(u[i]) || !(u[i] > lower_[i]) || !(u[i] < upper_[i])) return false;
    }
    return true;
  }

  void require(const Vector& u) const {
    if (!contains(u)) throw DomainError("state outside the model domain");
  }

  template <class Rng>
  Vector sample(Rng& rng) const {
    Vector u(dimension());
    for (int i = 0; i < dimension(); ++i) {
      std::uniform_real_distribution<double> d(sample_lower_[i], sample_upper_[i]);
      u[i] = d(rng);
    }
    return u;
  }

  /// n states drawn from a generator seeded with `seed`.
  std::vector<Vector> samples(std::size_t n, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::vector<Vector> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample(rng));
    return out;
  }

  const std::vector<double>& lower() const noexcept { return lower_; }
  const std::vector<double>& upper() const noexcept { return upper_; }
  const std::vector<double>& sample_lower() const noexcept { return sample_lower_; }
  const std::vector<double>& sample_upper() const noexcept { return sample_upper_; }

 private:
  std::vector<double> lower_, upper_;
  std::vector<double> sample_lower_, sample_upper_;
};

/// Quasilinear system A^i(u) u_i = 0 with p independent and q dependent variables.
class SystemModel {
 public:
  /// Fills out[i] (q x q) for i = 0..p-1.
  using MatrixFn = std::function<void(const Vector& u, std::vector<Matrix>& out)>;
  /// Side-constraint residuals (e.g. div H) from u and the q x p derivative matrix.
  using ConstraintFn = std::function<Vector(const Vector& u, const Matrix& du_dx)>;

  SystemModel(std::string name, int p, int q, MatrixFn matrices, ModelDomain domain,
              std::vector<std::string> unknowns = {}, std::vector<std::string> coordinates = {},
              ConstraintFn constraints = {}, std::vector<std::string> constraint_names = {})
      : name_(std::move(name)),
        p_(p),
        q_(q),
        matrices_(std::move(matrices)),
        domain_(std::move(domain)),
        unknowns_(std::move(unknowns)),
        coordinates_(std::move(coordinates)),
        constraints_(std::move(constraints)),
        constraint_names_(std::move(constraint_names)) {
    if (p_ < 1 || q_ < 1) throw PreconditionError("model needs p >= 1 and q >= 1");
    if (domain_.dimension() != q_) throw PreconditionError("domain dimension differs from q");
    if (unknowns_.empty()) unknowns_ = numbered_names("u", q_);
    if (coordinates_.empty()) coordinates_ = numbered_names("x", p_);
  }

  const std::string& name() const noexcept { return name_; }
  int p() const noexcept { return p_; }
  int q() const noexcept { return q_; }
  const ModelDomain& domain() const noexcept { return domain_; }
  const std::vector<std::string>& unknowns() const noexcept { return unknowns_; }
  const std::vector<std::string>& coordinates() const noexcept { return coordinates_; }
  bool has_constraints() const noexcept { return static_cast<bool>(constraints_); }
  const std::vector<std::string>& constraint_names() const noexcept { return constraint_names_; }

  /// A^0(u) .. A^{p-1}(u); throws DomainError outside the domain or on non-finite entries.
  std::vector<Matrix> matrices(const Vector& u) const {
    if (u.size() != q_) throw PreconditionError("state has wrong dimension");
    domain_.require(u);
    std::vector<Matrix> out(p_, Matrix::Zero(q_, q_));
    matrices_(u, out);
    for (const auto& m : out) {
      if (!m.allFinite()) throw DomainError("non-finite coefficient matrix in model " + name_);
    }
    return out;
  }

  Matrix matrix(int i, const Vector& u) const { return matrices(u).at(i); }

  /// Constraint residuals, empty when the model has none.
  Vector constraints(const Vector& u, const Matrix& du_dx) const {
    if (!constraints_) return Vector();
    return constraints_(u, du_dx);
  }

 private:
  std::string name_;
  int p_, q_;
  MatrixFn matrices_;
  ModelDomain domain_;
  std::vector<std::string> unknowns_;
  std::vector<std::string> coordinates_;
  ConstraintFn constraints_;
  std::vector<std::string> constraint_names_;
};

/// Central-difference Jacobian d field^a / d u^b, O(h^2). h <= 0 selects the default step.
/// Probe points outside `domain` (when given) raise DomainError.
inline Matrix jacobian_u(const VectorField& field, const Vector& u, double h = 0.0,
                         const ModelDomain* domain = nullptr) {
  if (h <= 0.0) h = default_fd_step(u);
  const int n = static_cast<int>(u.size());
  Matrix jac;
  Vector probe = u;
  for (int b = 0; b < n; ++b) {
    probe[b] = u[b] + h;
    if (domain) domain->require(probe);
    const Vector fp = field(probe);
    probe[b] = u[b] - h;
    if (domain) domain->require(probe);
    const Vector fm = field(probe);
    probe[b] = u[b];
    if (b == 0) jac.resize(fp.size(), n);
    jac.col(b) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Built-in models

inline SystemModel make_burgers() {
  return SystemModel(
      "burgers", 2, 1,
      [](const Vector& u, std::vector<Matrix>& a) {
        a[0](0, 0) = 1.0;
        a[1](0, 0) = u[0];
      },
      ModelDomain(1), {"u"}, {"t", "x"});
}

/// u_t + (u.grad)u = 0, rho_t + div(rho u) = 0 in n space dimensions.
/// Unknowns (u^1..u^n, rho); coordinates (t, x^1..x^n).
inline SystemModel make_barotropic(int n) {
  if (n < 1) throw PreconditionError("barotropic model needs n >= 1");
  ModelDomain domain(n + 1);
  domain.constrain(n, 0.0, std::numeric_limits<double>::infinity());
  domain.sample_box(n, 0.5, 2.0);
  std::vector<std::string> unknowns = numbered_names("u", n);
  unknowns.push_back("rho");
  std::vector<std::string> coords = {"t"};
  for (const auto& c : numbered_names("x", n)) coords.push_back(c);
  return SystemModel(
      "barotropic", n + 1, n + 1,
      [n](const Vector& u, std::vector<Matrix>& a) {
        const double rho = u[n];
        a[0].setIdentity();
        for (int j = 1; j <= n; ++j) {
          const double uj = u[j - 1];
          for (int m = 0; m < n; ++m) a[j](m, m) = uj;  // momentum: u_j d_j u_m
          a[j](n, n) = uj;                              // mass: u_j d_j rho
          a[j](n, j - 1) = rho;                         // mass: rho d_j u_j
        }
      },
      std::move(domain), std::move(unknowns), std::move(coords));
}

/// Ideal isentropic MHD in 3+1 dimensions, Gaussian units (1/(4 pi)), mu = 1.
/// Unknowns (rho, p, v1, v2, v3, H1, H2, H3); coordinates (t, x1, x2, x3).
/// div H = 0 is reported as a constraint, not a row of the square system.
inline SystemModel make_mhd(double gamma_poly = 5.0 / 3.0) {
  ModelDomain domain(8);
  domain.constrain(0, 0.0, std::numeric_limits<double>::infinity());
  domain.constrain(1, 0.0, std::numeric_limits<double>::infinity());
  domain.sample_box(0, 0.5, 2.0);
  domain.sample_box(1, 0.5, 2.0);
  constexpr double inv4pi = 1.0 / (4.0 * std::numbers::pi);
  return SystemModel(
      "mhd", 4, 8,
      [gamma_poly](const Vector& u, std::vector<Matrix>& a) {
        const double rho = u[0], p = u[1];
        const Eigen::Vector3d v = u.segment<3>(2);
        const Eigen::Vector3d H = u.segment<3>(5);
        // d/dt rows
        a[0](0, 0) = 1.0;
        a[0](1, 1) = 1.0;
        a[0](1, 0) = -gamma_poly * p / rho;
        for (int m = 0; m < 3; ++m) {
          a[0](2 + m, 2 + m) = rho;
          a[0](5 + m, 5 + m) = 1.0;
        }
        for (int j = 0; j < 3; ++j) {
          Matrix& aj = a[1 + j];
          // mass: v.grad rho + rho div v
          aj(0, 0) = v[j];
          aj(0, 2 + j) = rho;
          // entropy: dp/dt - (gamma p / rho) drho/dt
          aj(1, 1) = v[j];
          aj(1, 0) = -gamma_poly * p / rho * v[j];
          for (int m = 0; m < 3; ++m) {
            // momentum: rho (v.grad) v_m + d_m p + (H_i d_m H_i - H_j d_j H_m) / (4 pi)
            aj(2 + m, 2 + m) += rho * v[j];
            if (j == m) {
              aj(2 + m, 1) += 1.0;
              for (int i = 0; i < 3; ++i) aj(2 + m, 5 + i) += H[i] * inv4pi;
            }
            aj(2 + m, 5 + m) -= H[j] * inv4pi;
            // induction: H_t - curl(v x H) = H_t - v div H + H div v - (H.grad) v + (v.grad) H
            aj(5 + m, 5 + j) -= v[m];
            aj(5 + m, 2 + j) += H[m];
            aj(5 + m, 2 + m) -= H[j];
            aj(5 + m, 5 + m) += v[j];
          }
        }
      },
      std::move(domain), {"rho", "p", "v1", "v2", "v3", "H1", "H2", "H3"},
      {"t", "x1", "x2", "x3"},
      [](const Vector&, const Matrix& du) {
        Vector c(1);
        c[0] = du(5, 1) + du(6, 2) + du(7, 3);
        return c;
      },
      {"gauss"});
}

/// Model whose entries A^i_{ab} are expressions in the unknowns (default names u1..uq).
inline SystemModel make_custom(std::string name, int p, int q,
                               const std::vector<std::vector<std::vector<Expr>>>& entries,
                               ModelDomain domain, std::vector<std::string> unknowns = {}) {
  if (p < 1 || q < 1) throw PreconditionError("model needs p >= 1 and q >= 1");
  if (unknowns.empty()) unknowns = numbered_names("u", q);
  if (static_cast<int>(unknowns.size()) != q)
    throw PreconditionError("custom model: unknown names must number q");
  if (static_cast<int>(entries.size()) != p)
    throw PreconditionError("custom model: expected p coefficient matrices");
  std::vector<std::vector<CompiledExpr>> compiled(p);
  for (int i = 0; i < p; ++i) {
    if (static_cast<int>(entries[i].size()) != q)
      throw PreconditionError("custom model: matrix " + std::to_string(i) + " needs q rows");
    for (int a = 0; a < q; ++a) {
      if (static_cast<int>(entries[i][a].size()) != q)
        throw PreconditionError("custom model: matrix " + std::to_string(i) + " row " +
                                std::to_string(a) + " needs q entries");
      for (int b = 0; b < q; ++b) compiled[i].push_back(entries[i][a][b].compile(unknowns));
    }
  }
  return SystemModel(
      std::move(name), p, q,
      [compiled = std::move(compiled), p, q](const Vector& u, std::vector<Matrix>& a) {
        std::span<const double> vals(u.data(), static_cast<std::size_t>(u.size()));
        for (int i = 0; i < p; ++i)
          for (int r = 0; r < q; ++r)
            for (int c = 0; c < q; ++c) a[i](r, c) = compiled[i][r * q + c](vals);
      },
      std::move(domain), std::move(unknowns));
}

/// Parameters of the built-in models: barotropic needs "n"; mhd takes "gamma" (default 5/3).
inline SystemModel registry_get(const std::string& name, const Bindings& params = {}) {
  if (name == "burgers") return make_burgers();
  if (name == "barotropic") {
    auto it = params.find("n");
    if (it == params.end()) throw PreconditionError("barotropic model needs parameter n");
    const double n = it->second;
    if (n < 1 || n != std::floor(n)) throw PreconditionError("barotropic: n must be an integer >= 1");
    return make_barotropic(static_cast<int>(n));
  }
  if (name == "mhd") {
    auto it = params.find("gamma");
    const double g = it == params.end() ? 5.0 / 3.0 : it->second;
    if (!(g > 0.0)) throw PreconditionError("mhd: gamma must be positive");
    return make_mhd(g);
  }
  if (name == "custom")
    throw PreconditionError("custom models are built from expression matrices (make_custom)");
  throw PreconditionError("unknown model '" + name + "'");
}

}  // namespace kwave

#endif  // KWAVE_MODEL_HPP
