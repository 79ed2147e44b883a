#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "losses.hpp"

// Brute-force scalar oracles: grid minimization with optional zoom
// refinement. They are deliberately independent of the closed forms in
// losses.hpp, which they are used to validate.

namespace safescreen {

template <typename Scalar = double>
struct Grid {
  Scalar lo;
  Scalar hi;
  Scalar step;
  /// Each refinement re-grids [z* - step, z* + step] with 200 cells.
  int refinements = 0;

  long points() const { return static_cast<long>(std::floor((hi - lo) / step + Scalar(1e-9))) + 1; }
};

template <typename Scalar>
struct GridMinimum {
  Scalar value;
  Scalar argmin;
};

/// Minimizes a convex extended-value function over a grid. Throws
/// std::range_error when the coarse minimizer sits on the grid boundary,
/// since the true minimizer may then lie outside the grid.
template <typename Scalar, typename Fn>
GridMinimum<Scalar> grid_minimize(Fn&& h, const Grid<Scalar>& grid) {
  if (!(grid.step > Scalar(0)) || !(grid.hi > grid.lo))
    throw std::invalid_argument("grid needs lo < hi and a positive step");

  auto scan = [&h](Scalar lo, Scalar step, long count, long& best_index) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    best_index = -1;
    for (long j = 0; j < count; ++j) {
      const Scalar v = h(lo + step * Scalar(j));
      if (v < best) {
        best = v;
        best_index = j;
      }
    }
    return best;
  };

  const long count = grid.points();
  long j = -1;
  Scalar best = scan(grid.lo, grid.step, count, j);
  if (j < 0) throw std::range_error("grid oracle: function is +inf on the whole grid");
  if (j == 0 || j == count - 1)
    throw std::range_error("grid oracle: minimizer on the grid boundary at " +
                           std::to_string(static_cast<double>(grid.lo + grid.step * Scalar(j))));

  Scalar center = grid.lo + grid.step * Scalar(j);
  Scalar step = grid.step;
  for (int r = 0; r < grid.refinements; ++r) {
    constexpr long cells = 200;
    const Scalar lo = center - step;
    step = Scalar(2) * step / Scalar(cells);
    long k = -1;
    const Scalar refined = scan(lo, step, cells + 1, k);
    if (k >= 0 && refined <= best) {
      best = refined;
      center = lo + step * Scalar(k);
    }
  }
  return {best, center};
}

/// min_z f(z) + mu * omega_conj((t - z) / mu) evaluated on a grid of z.
template <typename Scalar, typename F, typename OmegaConj>
Scalar inf_conv_oracle(F&& f, OmegaConj&& omega_conj, Scalar mu, Scalar t, const Grid<Scalar>& grid) {
  if (!(mu > Scalar(0))) throw std::invalid_argument("inf_conv_oracle needs mu > 0");
  return grid_minimize<Scalar>([&](Scalar z) { return f(z) + mu * omega_conj((t - z) / mu); }, grid).value;
}

/// sup_t s t - h(t) evaluated on a grid of t.
template <typename Scalar, typename Fn>
Scalar grid_conjugate(Fn&& h, Scalar s, const Grid<Scalar>& grid) {
  return -grid_minimize<Scalar>([&](Scalar t) { return h(t) - s * t; }, grid).value;
}

template <typename Scalar>
Grid<Scalar> default_conjugate_grid() {
  return {Scalar(-10), Scalar(10), Scalar(20) / Scalar(99999), 0};
}

/// Numerical conjugate of a loss. Approximate; a boundary hit usually means
/// s lies outside the conjugate domain.
template <typename Scalar>
Scalar loss_conjugate_numeric(const SafeLoss<Scalar>& loss, Scalar s,
                              const Grid<Scalar>& grid = default_conjugate_grid<Scalar>()) {
  return grid_conjugate<Scalar>([&loss](Scalar t) { return loss.value(t); }, s, grid);
}

}  // namespace safescreen
