#ifndef KWAVE_ODE_HPP
#define KWAVE_ODE_HPP

#include <cmath>
#include <cstdlib>

#include "kwave/error.hpp"
#include "kwave/model.hpp"

namespace kwave {

/// One classical Runge-Kutta step of du/ds = field(u).
inline Vector rk4_step(const VectorField& field, const Vector& u, double h) {
  const Vector k1 = field(u);
  const Vector k2 = field(u + 0.5 * h * k1);
  const Vector k3 = field(u + 0.5 * h * k2);
  const Vector k4 = field(u + h * k3);
  Vector out = u + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4);
  if (!out.allFinite()) throw DomainError("non-finite state during integration");
  return out;
}

struct FlowOptions {
  double max_step = 0.01;
  /// Step-doubling error estimate above which a step is halved; <= 0 disables.
  double step_tol = 1e-9;
  int max_halvings = 12;
  const ModelDomain* domain = nullptr;
};

/// Follows du/ds = field(u) from u for flow time `time` (either sign).
inline Vector flow(const VectorField& field, Vector u, double time, const FlowOptions& opt = {}) {
  if (time == 0.0) return u;
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(time) / opt.max_step - 1e-9)));
  const double h = time / n;
  for (int i = 0; i < n; ++i) {
    if (opt.step_tol > 0.0) {
      // step-doubling estimate; refine the substep until it is under tolerance
      int pieces = 1;
      Vector coarse = rk4_step(field, u, h);
      for (int level = 0;; ++level) {
        const double sub = h / (2 * pieces);
        Vector fine = u;
        for (int s = 0; s < 2 * pieces; ++s) fine = rk4_step(field, fine, sub);
        const double err = (fine - coarse).lpNorm<Eigen::Infinity>() / 15.0;
        if (err <= opt.step_tol * std::max(1.0, fine.lpNorm<Eigen::Infinity>()) ||
            level >= opt.max_halvings) {
          u = std::move(fine);
          break;
        }
        coarse = std::move(fine);
        pieces *= 2;
      }
    } else {
      u = rk4_step(field, u, h);
    }
    if (opt.domain) opt.domain->require(u);
  }
  return u;
}

}  // namespace kwave

#endif  // KWAVE_ODE_HPP
