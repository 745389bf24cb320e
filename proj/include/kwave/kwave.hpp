#ifndef KWAVE_KWAVE_HPP
#define KWAVE_KWAVE_HPP

#include "kwave/error.hpp"
#include "kwave/expr.hpp"
#include "kwave/implicit_solution.hpp"
#include "kwave/involution.hpp"
#include "kwave/model.hpp"
#include "kwave/ode.hpp"
#include "kwave/showcase.hpp"
#include "kwave/surface.hpp"
#include "kwave/wave_algebra.hpp"
#include "kwave/waves1d.hpp"

#endif  // KWAVE_KWAVE_HPP
