#ifndef KWAVE_WAVE_ALGEBRA_HPP
#define KWAVE_WAVE_ALGEBRA_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kwave/error.hpp"
#include "kwave/model.hpp"

namespace kwave {

/// Wave covector lambda(u) in R^p.
struct WaveCovector {
  enum class Normalization { Raw, FirstComponentOne };

  VectorField field;
  Normalization normalization = Normalization::Raw;

  /// lambda(u), rescaled to first component one when requested.
  Vector operator()(const Vector& u) const {
    Vector l = field(u);
    if (normalization == Normalization::FirstComponentOne) {
      if (std::abs(l[0]) <= 1e-12 * std::max(1.0, l.lpNorm<Eigen::Infinity>()))
        throw SingularError("wave covector has vanishing first component; cannot normalize");
      l /= l[0];
    }
    return l;
  }

  WaveCovector normalized() const { return {field, Normalization::FirstComponentOne}; }
};

/// Characteristic vector gamma(u) paired with its wave covector.
struct SimpleElement {
  VectorField gamma;
  WaveCovector lambda;
};

inline Vector rescale_first_positive(Vector v, double tiny = 1e-14) {
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > tiny) {
      if (v[i] < 0.0) v = -v;
      break;
    }
  }
  return v;
}

/// sum_i lambda_i A^i(u).
inline Matrix directional_matrix(const SystemModel& m, const Vector& lambda, const Vector& u) {
  if (lambda.size() != m.p()) throw PreconditionError("wave covector must have p components");
  if (lambda.lpNorm<Eigen::Infinity>() == 0.0)
    throw PreconditionError("wave covector must be non-zero");
  const auto a = m.matrices(u);
  Matrix out = Matrix::Zero(m.q(), m.q());
  for (int i = 0; i < m.p(); ++i) out += lambda[i] * a[i];
  return out;
}

inline Matrix directional_matrix(const SystemModel& m, const WaveCovector& lambda, const Vector& u) {
  return directional_matrix(m, lambda(u), u);
}

/// |(lambda_i A^i) gamma| at u.
inline double wave_relation_residual(const SystemModel& m, const SimpleElement& e, const Vector& u) {
  return (directional_matrix(m, e.lambda, u) * e.gamma(u)).norm();
}

/// Orthonormal null-space basis (columns) from singular values <= tol_rank * sigma_max.
/// An all-zero matrix has the full space as kernel; an empty result means a trivial kernel.
inline Matrix kernel(const Matrix& M, double tol_rank = 1e-10) {
  if (!M.allFinite()) throw DomainError("kernel of a non-finite matrix");
  const int n = static_cast<int>(M.cols());
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double smax = s.size() ? s[0] : 0.0;
  std::vector<int> cols;
  for (int i = 0; i < n; ++i) {
    const double si = i < s.size() ? s[i] : 0.0;
    if (smax == 0.0 || si <= tol_rank * smax) cols.push_back(i);
  }
  Matrix basis(n, static_cast<int>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    basis.col(static_cast<int>(c)) = rescale_first_positive(svd.matrixV().col(cols[c]));
  return basis;
}

/// One real characteristic family of u_t + A(u) u_x = 0.
struct EigenWave {
  double alpha = 0.0;
  Vector lambda;        // (-alpha, 1)
  Vector gamma;         // unit eigenvector, first non-zero component positive
  int multiplicity = 1; // algebraic
  bool defective = false;
};

/// Eigen-decomposition of A = (A^0)^{-1} A^1 for a p = 2 model. Each distinct real eigenvalue
/// yields one entry per independent eigenvector; clusters with fewer eigenvectors than their
/// algebraic multiplicity are flagged defective.
inline std::vector<EigenWave> eigen_wave_vectors(const SystemModel& m, const Vector& u) {
  if (m.p() != 2) throw PreconditionError("eigen_wave_vectors needs a model with p = 2");
  const auto a = m.matrices(u);
  Eigen::FullPivLU<Matrix> lu(a[0]);
  if (!lu.isInvertible()) throw SingularError("time coefficient matrix is singular");
  const Matrix A = lu.solve(a[1]);
  const double scale = std::max(1.0, A.lpNorm<Eigen::Infinity>());

  Eigen::EigenSolver<Matrix> es(A, false);
  const auto ev = es.eigenvalues();
  std::vector<double> re;
  std::string complex_pairs;
  for (int i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i].imag()) > 1e-9 * scale) {
      complex_pairs += " (" + std::to_string(ev[i].real()) + (ev[i].imag() < 0 ? " - " : " + ") +
                       std::to_string(std::abs(ev[i].imag())) + "i)";
    } else {
      re.push_back(ev[i].real());
    }
  }
  if (!complex_pairs.empty())
    throw HyperbolicityError("complex characteristic speeds:" + complex_pairs);
  std::sort(re.begin(), re.end());

  // defective eigenvalues split by ~sqrt(eps) under rounding
  const double cluster_tol = 1e-6 * scale;
  std::vector<EigenWave> out;
  for (std::size_t i = 0; i < re.size();) {
    std::size_t j = i + 1;
    while (j < re.size() && re[j] - re[j - 1] <= cluster_tol) ++j;
    const int mult = static_cast<int>(j - i);
    const double alpha = std::accumulate(re.begin() + i, re.begin() + j, 0.0) / mult;
    const Matrix shifted = A - alpha * Matrix::Identity(A.rows(), A.cols());
    Matrix ker = kernel(shifted, std::max(1e-10, 10.0 * cluster_tol / scale));
    if (ker.cols() == 0) {
      // rounding left no singular value under tolerance; take the smallest direction
      Eigen::JacobiSVD<Matrix> svd(shifted, Eigen::ComputeFullV);
      ker = rescale_first_positive(svd.matrixV().col(A.cols() - 1));
    }
    const bool defective = ker.cols() < mult;
    for (int c = 0; c < ker.cols(); ++c) {
      EigenWave w;
      w.alpha = alpha;
      w.lambda = Vector(2);
      w.lambda << -alpha, 1.0;
      w.gamma = ker.col(c);
      w.multiplicity = mult;
      w.defective = defective;
      out.push_back(std::move(w));
    }
    i = j;
  }
  return out;
}

/// lambda_i(u) x^i.
inline double riemann_invariant(const Vector& lambda, const Vector& x) {
  if (lambda.size() != x.size()) throw PreconditionError("covector and point differ in dimension");
  return lambda.dot(x);
}

inline double riemann_invariant(const WaveCovector& lambda, const Vector& x, const Vector& u) {
  return riemann_invariant(lambda(u), x);
}

/// Conditional-symmetry directions xi_a orthogonal to all k covectors.
struct SymmetryFields {
  std::vector<Vector> xi;      // p - k vectors in R^p
  std::vector<int> columns;    // the k columns forming the invertible block Lambda
  double condition = 1.0;      // condition number of Lambda
};

namespace detail {

inline double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s[s.size() - 1];
  return smin == 0.0 ? std::numeric_limits<double>::infinity() : s[0] / smin;
}

inline Matrix select_columns(const Matrix& L, const std::vector<int>& cols) {
  Matrix out(L.rows(), static_cast<int>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<int>(c)) = L.col(cols[c]);
  return out;
}

}  // namespace detail

/// Fields X_a = d/dx^a - sum (Lambda^{-1})^l_j lambda^j_a d/dx^l for the columns a outside the
/// chosen invertible k x k block. The trailing k columns are preferred; otherwise the
/// best-conditioned k-subset is used.
inline SymmetryFields symmetry_fields(const std::vector<Vector>& lambdas, double max_condition = 1e8) {
  const int k = static_cast<int>(lambdas.size());
  if (k == 0) throw PreconditionError("symmetry_fields needs at least one covector");
  const int p = static_cast<int>(lambdas[0].size());
  if (k > p) throw PreconditionError("more covectors than independent variables");
  Matrix L(k, p);
  for (int j = 0; j < k; ++j) {
    if (lambdas[j].size() != p) throw PreconditionError("covectors differ in dimension");
    L.row(j) = lambdas[j].transpose();
  }

  SymmetryFields out;
  std::vector<int> trailing(k);
  std::iota(trailing.begin(), trailing.end(), p - k);
  double cond = detail::condition_number(detail::select_columns(L, trailing));
  std::vector<int> best = trailing;
  if (!(cond < max_condition)) {
    // exhaustive search over k-subsets, p is small
    std::vector<int> mask(p, 0);
    std::fill(mask.end() - k, mask.end(), 1);
    do {
      std::vector<int> cols;
      for (int i = 0; i < p; ++i)
        if (mask[i]) cols.push_back(i);
      const double c = detail::condition_number(detail::select_columns(L, cols));
      if (c < cond) {
        cond = c;
        best = cols;
      }
    } while (std::next_permutation(mask.begin(), mask.end()));
  }
  if (!(cond < max_condition))
    throw SingularError("no invertible k x k block of the covector matrix (condition " +
                        std::to_string(cond) + ")");
  out.columns = best;
  out.condition = cond;
  const Matrix Lambda = detail::select_columns(L, best);
  Eigen::FullPivLU<Matrix> lu(Lambda);
  for (int a = 0; a < p; ++a) {
    if (std::find(best.begin(), best.end(), a) != best.end()) continue;
    const Vector c = lu.solve(L.col(a));
    Vector xi = Vector::Zero(p);
    xi[a] = 1.0;
    for (int l = 0; l < k; ++l) xi[best[l]] -= c[l];
    out.xi.push_back(std::move(xi));
  }
  return out;
}

inline SymmetryFields symmetry_fields(const std::vector<WaveCovector>& lambdas, const Vector& u,
                                      double max_condition = 1e8) {
  std::vector<Vector> vals;
  for (const auto& l : lambdas) vals.push_back(l(u));
  return symmetry_fields(vals, max_condition);
}

/// Pairwise independence of wave covectors; for k >= 3, dependent triples are flagged only.
struct IndependenceReport {
  bool pairwise_independent = true;
  std::vector<std::pair<int, int>> dependent_pairs;
  std::vector<std::array<int, 3>> dependent_triples;
};

inline IndependenceReport check_independence(const std::vector<Vector>& lambdas, double tol = 1e-10) {
  IndependenceReport rep;
  const int k = static_cast<int>(lambdas.size());
  auto rank_deficient = [&](std::initializer_list<int> idx) {
    Matrix m(lambdas[0].size(), static_cast<int>(idx.size()));
    int c = 0;
    for (int i : idx) m.col(c++) = lambdas[i];
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& s = svd.singularValues();
    return s[0] == 0.0 || s[s.size() - 1] <= tol * s[0];
  };
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      if (rank_deficient({i, j})) {
        rep.pairwise_independent = false;
        rep.dependent_pairs.emplace_back(i, j);
      }
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      for (int l = j + 1; l < k; ++l)
        if (lambdas[0].size() < 3 || rank_deficient({i, j, l}))
          rep.dependent_triples.push_back({i, j, l});
  return rep;
}

}  // namespace kwave

#endif  // KWAVE_WAVE_ALGEBRA_HPP
