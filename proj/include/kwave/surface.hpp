#ifndef KWAVE_SURFACE_HPP
#define KWAVE_SURFACE_HPP

// Solution manifold u = f(r^1, ..., r^k) obtained by integrating df/dr^s = gamma_s(f).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "kwave/error.hpp"
#include "kwave/model.hpp"
#include "kwave/ode.hpp"
#include "kwave/parallel.hpp"
#include "kwave/wave_algebra.hpp"

namespace kwave {

struct GridAxis {
  double lo = -1.0;
  double hi = 1.0;
  int n = 101;

  double spacing() const { return (hi - lo) / (n - 1); }
  double node(int i) const { return i == n - 1 ? hi : lo + i * spacing(); }
};

/// Tensor grid in Riemann-invariant space; r^1 varies slowest (row-major).
class SurfaceGrid {
 public:
  SurfaceGrid() = default;
  explicit SurfaceGrid(std::vector<GridAxis> axes) : axes_(std::move(axes)) {
    if (axes_.empty()) throw PreconditionError("surface grid needs at least one axis");
    strides_.assign(axes_.size(), 1);
    for (int d = static_cast<int>(axes_.size()) - 1; d >= 0; --d) {
      const auto& a = axes_[d];
      if (a.n < 2 || !(a.lo < a.hi)) throw PreconditionError("grid axis needs n >= 2 and lo < hi");
      if (d + 1 < static_cast<int>(axes_.size()))
        strides_[d] = strides_[d + 1] * static_cast<std::size_t>(axes_[d + 1].n);
    }
    size_ = strides_[0] * static_cast<std::size_t>(axes_[0].n);
  }

  int dims() const noexcept { return static_cast<int>(axes_.size()); }
  std::size_t size() const noexcept { return size_; }
  const GridAxis& axis(int d) const { return axes_.at(d); }
  const std::vector<GridAxis>& axes() const noexcept { return axes_; }
  std::size_t stride(int d) const { return strides_.at(d); }

  std::vector<int> unflatten(std::size_t flat) const {
    std::vector<int> idx(axes_.size());
    for (std::size_t d = 0; d < axes_.size(); ++d) {
      idx[d] = static_cast<int>(flat / strides_[d]);
      flat %= strides_[d];
    }
    return idx;
  }

  std::size_t flatten(const std::vector<int>& idx) const {
    std::size_t f = 0;
    for (std::size_t d = 0; d < axes_.size(); ++d) f += strides_[d] * static_cast<std::size_t>(idx[d]);
    return f;
  }

  Vector coordinates(std::size_t flat) const {
    const auto idx = unflatten(flat);
    Vector r(dims());
    for (int d = 0; d < dims(); ++d) r[d] = axes_[d].node(idx[d]);
    return r;
  }

  /// Index of the node at r^d = 0; every axis must contain 0 as a node.
  int origin(int d) const {
    const auto& a = axes_.at(d);
    const double h = a.spacing();
    const double pos = -a.lo / h;
    const int o = static_cast<int>(std::lround(pos));
    if (o < 0 || o >= a.n || std::abs(pos - o) > 1e-9)
      throw PreconditionError("grid axis " + std::to_string(d) + " has no node at r = 0");
    return o;
  }

 private:
  std::vector<GridAxis> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// Tabulated map r -> u on a SurfaceGrid.
struct SurfaceMap {
  SurfaceGrid grid;
  std::vector<Vector> values;
  std::vector<unsigned char> valid;
  Vector base;
  std::vector<SimpleElement> elements;
  // path-independence audit
  double path_residual = 0.0;
  std::size_t worst_node = 0;
  std::size_t audited = 0;

  const Vector& at(const std::vector<int>& idx) const { return values.at(grid.flatten(idx)); }
  std::size_t invalid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 0));
  }
};

class PathIndependenceError : public Error {
 public:
  PathIndependenceError(double residual, std::size_t node)
      : Error("path-independence residual " + std::to_string(residual) + " at node " +
              std::to_string(node)),
        residual_(residual),
        node_(node) {}
  double residual() const noexcept { return residual_; }
  std::size_t node() const noexcept { return node_; }

 private:
  double residual_;
  std::size_t node_;
};

struct SurfaceOptions {
  /// max_step <= 0 uses the grid spacing as the nominal step.
  FlowOptions flow{0.0, 1e-9, 12, nullptr};
  double tol_path = 1e-7;
  double audit_fraction = 0.1;
  std::uint64_t seed = 0;
  /// Commutators at the base point must stay below tol_abelian * (1 + |g_i||g_j|).
  double tol_abelian = 1e-8;
  bool require_abelian = true;
};

/// Lie bracket [gi, gj] = J(gj) gi - J(gi) gj with central-difference Jacobians.
inline Vector commutator(const VectorField& gi, const VectorField& gj, const Vector& u,
                         double h = 0.0, const ModelDomain* domain = nullptr) {
  const Matrix Ji = jacobian_u(gi, u, h, domain);
  const Matrix Jj = jacobian_u(gj, u, h, domain);
  return Jj * gi(u) - Ji * gj(u);
}

namespace surface_detail {

inline Vector flow_along(const SimpleElement& e, const Vector& u, double t, const FlowOptions& opt) {
  return flow(e.gamma, u, t, opt);
}

}  // namespace surface_detail

/// Fills every node with flow_{gamma_k}(r^k) o ... o flow_{gamma_1}(r^1)(base), sweeping r^1 first
/// and then the r^2 lines, and audits a random fraction of nodes against the reversed order.
/// Nodes whose integration leaves the domain are marked invalid.
inline SurfaceMap integrate_surface(const std::vector<SimpleElement>& elements, const Vector& base,
                                    const SurfaceGrid& grid, SurfaceOptions opt = {}) {
  const int k = grid.dims();
  if (static_cast<int>(elements.size()) != k)
    throw PreconditionError("need one simple element per grid axis");
  if (opt.flow.domain) opt.flow.domain->require(base);
  if (opt.require_abelian) {
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) {
        const Vector c = commutator(elements[i].gamma, elements[j].gamma, base);
        const double scale = 1.0 + elements[i].gamma(base).norm() * elements[j].gamma(base).norm();
        if (c.norm() > opt.tol_abelian * scale)
          throw PreconditionError("fields " + std::to_string(i) + " and " + std::to_string(j) +
                                  " do not commute at the base point; rescale them first");
      }
  }

  SurfaceMap s;
  s.grid = grid;
  s.base = base;
  s.elements = elements;
  s.values.assign(grid.size(), Vector());
  s.valid.assign(grid.size(), 0);

  std::vector<int> origin(k);
  for (int d = 0; d < k; ++d) origin[d] = grid.origin(d);
  const std::size_t base_flat = grid.flatten(origin);
  s.values[base_flat] = base;
  s.valid[base_flat] = 1;

  auto axis_flow = [&](int d) {
    FlowOptions f = opt.flow;
    if (f.max_step <= 0.0) f.max_step = grid.axis(d).spacing() * (1.0 + 1e-12);
    return f;
  };

  for (int d = 0; d < k; ++d) {
    // seeds: filled nodes with index at origin for all axes >= d
    std::vector<std::size_t> seeds;
    for (std::size_t f = 0; f < grid.size(); ++f) {
      if (!s.valid[f]) continue;
      const auto idx = grid.unflatten(f);
      bool seed = true;
      for (int e = d; e < k; ++e) seed = seed && idx[e] == origin[e];
      if (seed) seeds.push_back(f);
    }
    const FlowOptions fopt = axis_flow(d);
    const auto& ax = grid.axis(d);
    parallel_for(seeds.size(), [&](std::size_t si) {
      const std::size_t seed = seeds[si];
      for (int dir : {+1, -1}) {
        Vector u = s.values[seed];
        double r = 0.0;
        for (int i = origin[d] + dir; i >= 0 && i < ax.n; i += dir) {
          const double rn = ax.node(i);
          try {
            u = surface_detail::flow_along(elements[d], u, rn - r, fopt);
          } catch (const DomainError&) {
            break;  // this node and the rest of the line stay invalid
          }
          r = rn;
          const std::size_t f = seed + static_cast<std::ptrdiff_t>(i - origin[d]) * grid.stride(d);
          s.values[f] = u;
          s.valid[f] = 1;
        }
      }
    });
  }

  // audit: reversed flow order straight from the base point
  std::vector<std::size_t> candidates;
  for (std::size_t f = 0; f < grid.size(); ++f)
    if (s.valid[f] && f != base_flat) candidates.push_back(f);
  std::mt19937_64 rng(opt.seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const std::size_t n_audit =
      std::min(candidates.size(),
               std::max<std::size_t>(candidates.empty() ? 0 : 1,
                                     static_cast<std::size_t>(std::ceil(opt.audit_fraction * grid.size()))));
  candidates.resize(n_audit);
  std::sort(candidates.begin(), candidates.end());
  std::vector<double> residual(n_audit, 0.0);
  parallel_for(n_audit, [&](std::size_t a) {
    const std::size_t f = candidates[a];
    const Vector r = grid.coordinates(f);
    Vector u = base;
    try {
      for (int d = k - 1; d >= 0; --d) u = surface_detail::flow_along(elements[d], u, r[d], axis_flow(d));
      residual[a] = (u - s.values[f]).lpNorm<Eigen::Infinity>();
    } catch (const DomainError&) {
      residual[a] = -1.0;  // other path leaves the domain; not comparable
    }
  });
  s.audited = n_audit;
  for (std::size_t a = 0; a < n_audit; ++a) {
    if (residual[a] > s.path_residual) {
      s.path_residual = residual[a];
      s.worst_node = candidates[a];
    }
  }
  if (s.path_residual > opt.tol_path) throw PathIndependenceError(s.path_residual, s.worst_node);
  return s;
}

/// lambda^s evaluated at every node; invalid nodes hold NaN.
inline std::vector<std::vector<Vector>> pullback_covectors(const SurfaceMap& s,
                                                           const std::vector<WaveCovector>& lambdas) {
  std::vector<std::vector<Vector>> out(lambdas.size());
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    out[l].resize(s.values.size());
    Eigen::Index p = 0;
    for (std::size_t f = 0; f < s.values.size(); ++f) {
      if (!s.valid[f]) continue;
      out[l][f] = lambdas[l](s.values[f]);
      p = out[l][f].size();
    }
    for (std::size_t f = 0; f < s.values.size(); ++f)
      if (!s.valid[f]) out[l][f] = Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

/// Rows: r^1..r^k, u^1..u^q, valid.
inline void write_surface_csv(std::ostream& os, const SurfaceMap& s) {
  const int k = s.grid.dims();
  const int q = static_cast<int>(s.base.size());
  for (int d = 0; d < k; ++d) os << "r" << d + 1 << ',';
  for (int a = 0; a < q; ++a) os << "u" << a + 1 << ',';
  os << "valid\n";
  os.precision(17);
  for (std::size_t f = 0; f < s.values.size(); ++f) {
    const Vector r = s.grid.coordinates(f);
    for (int d = 0; d < k; ++d) os << r[d] << ',';
    for (int a = 0; a < q; ++a) {
      if (s.valid[f]) os << s.values[f][a];
      else os << "nan";
      os << ',';
    }
    os << (s.valid[f] ? 1 : 0) << '\n';
  }
}

/// Tensor-product cubic Hermite interpolant of a SurfaceMap (k = 1 or 2). Node slopes are
/// gamma_s(f) and, for k = 2, the cross slope is the symmetrized J(gamma_2) gamma_1. C^1 and
/// fourth-order accurate. Evaluation outside the grid or in cells touching invalid nodes throws.
class SurfaceInterpolant {
 public:
  explicit SurfaceInterpolant(const SurfaceMap& s) : s_(s) {
    k_ = s.grid.dims();
    if (k_ > 2) throw PreconditionError("surface interpolation supports k <= 2");
    q_ = static_cast<int>(s.base.size());
    slope_.assign(k_, std::vector<Vector>(s.values.size()));
    if (k_ == 2) cross_.resize(s.values.size());
    for (std::size_t f = 0; f < s.values.size(); ++f) {
      if (!s.valid[f]) continue;
      const Vector& u = s.values[f];
      for (int d = 0; d < k_; ++d) slope_[d][f] = s.elements[d].gamma(u);
      if (k_ == 2) {
        const Matrix J1 = jacobian_u(s.elements[0].gamma, u);
        const Matrix J2 = jacobian_u(s.elements[1].gamma, u);
        cross_[f] = 0.5 * (J2 * slope_[0][f] + J1 * slope_[1][f]);
      }
    }
  }

  int k() const noexcept { return k_; }
  int q() const noexcept { return q_; }

  Vector value(const Vector& r) const {
    Vector v;
    Matrix d;
    eval(r, v, d, false);
    return v;
  }

  /// q x k matrix df/dr.
  Matrix jacobian(const Vector& r) const {
    Vector v;
    Matrix d;
    eval(r, v, d, true);
    return d;
  }

  void eval(const Vector& r, Vector& value, Matrix& jac, bool want_jac) const {
    if (r.size() != k_) throw PreconditionError("interpolation point has wrong dimension");
    int cell[2] = {0, 0};
    double t[2] = {0, 0}, h[2] = {1, 1};
    for (int d = 0; d < k_; ++d) {
      const auto& ax = s_.grid.axis(d);
      h[d] = ax.spacing();
      double pos = (r[d] - ax.lo) / h[d];
      // node coordinates land back on the node exactly
      if (std::abs(pos - std::round(pos)) <= 1e-12 * std::max(1.0, std::abs(pos))) pos = std::round(pos);
      if (!(pos >= -1e-9 && pos <= ax.n - 1 + 1e-9))
        throw DomainError("point outside the surface grid");
      cell[d] = std::clamp(static_cast<int>(std::floor(pos)), 0, ax.n - 2);
      t[d] = pos - cell[d];
    }
    value = Vector::Zero(q_);
    if (want_jac) jac = Matrix::Zero(q_, k_);

    // cubic Hermite basis: value weights (node 0, node 1), slope weights (node 0, node 1)
    auto basis = [](double x, double out[4], double dout[4]) {
      const double x2 = x * x, x3 = x2 * x;
      out[0] = 2 * x3 - 3 * x2 + 1;
      out[1] = -2 * x3 + 3 * x2;
      out[2] = x3 - 2 * x2 + x;
      out[3] = x3 - x2;
      dout[0] = 6 * x2 - 6 * x;
      dout[1] = -6 * x2 + 6 * x;
      dout[2] = 3 * x2 - 4 * x + 1;
      dout[3] = 3 * x2 - 2 * x;
    };
    double b0[4], db0[4], b1[4] = {1, 0, 0, 0}, db1[4] = {0, 0, 0, 0};
    basis(t[0], b0, db0);
    if (k_ == 2) basis(t[1], b1, db1);

    const int corners = k_ == 2 ? 4 : 2;
    for (int c = 0; c < corners; ++c) {
      const int a = c & 1;         // corner along axis 0
      const int b = (c >> 1) & 1;  // corner along axis 1
      std::vector<int> idx(k_);
      idx[0] = cell[0] + a;
      if (k_ == 2) idx[1] = cell[1] + b;
      const std::size_t f = s_.grid.flatten(idx);
      if (!s_.valid[f]) throw DomainError("interpolation cell touches an invalid node");
      const Vector& val = s_.values[f];
      if (k_ == 1) {
        value += b0[a] * val + b0[2 + a] * h[0] * slope_[0][f];
        if (want_jac) jac.col(0) += (db0[a] * val + db0[2 + a] * h[0] * slope_[0][f]) / h[0];
        continue;
      }
      const Vector& s0 = slope_[0][f];
      const Vector& s1 = slope_[1][f];
      const Vector& x01 = cross_[f];
      value += b0[a] * b1[b] * val + b0[2 + a] * h[0] * b1[b] * s0 + b0[a] * b1[2 + b] * h[1] * s1 +
               b0[2 + a] * h[0] * b1[2 + b] * h[1] * x01;
      if (want_jac) {
        jac.col(0) += (db0[a] * b1[b] * val + db0[2 + a] * h[0] * b1[b] * s0 +
                       db0[a] * b1[2 + b] * h[1] * s1 + db0[2 + a] * h[0] * b1[2 + b] * h[1] * x01) /
                      h[0];
        jac.col(1) += (b0[a] * db1[b] * val + b0[2 + a] * h[0] * db1[b] * s0 +
                       b0[a] * db1[2 + b] * h[1] * s1 + b0[2 + a] * h[0] * db1[2 + b] * h[1] * x01) /
                      h[1];
      }
    }
  }

 private:
  SurfaceMap s_;
  int k_ = 0, q_ = 0;
  std::vector<std::vector<Vector>> slope_;
  std::vector<Vector> cross_;
};

}  // namespace kwave

#endif  // KWAVE_SURFACE_HPP
