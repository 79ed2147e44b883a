#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "erm.hpp"
#include "region.hpp"
#include "screening.hpp"

namespace safescreen {

// Composite hooks for ErmProblem: the data fit is the smooth part and
// lambda R the proximable part.

template <typename Scalar, typename Derived>
Scalar smooth_value(const ErmProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& x) {
  return data_fit(prob, x);
}

template <typename Scalar, typename Derived>
std::pair<Scalar, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> smooth_value_gradient(
    const ErmProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& x) {
  return data_fit_gradient(prob, x);
}

template <typename Scalar>
bool is_smooth(const ErmProblem<Scalar>& prob) {
  return prob.loss().is_smooth();
}

template <typename Scalar = double>
struct SolveOptions {
  Scalar tol = Scalar(1e-8);
  double max_epochs = 1e4;
  long check_every = 10;  // iterations between stopping tests
  Scalar initial_step = Scalar(1);
};

template <typename Scalar = double>
struct SolveResult {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector x;
  Scalar primal = Scalar(0);
  Scalar gap = std::numeric_limits<Scalar>::quiet_NaN();  // NaN when no dual is available
  long iterations = 0;
  double epochs = 0.0;  // full-data passes, including stopping tests
  bool converged = false;
  Scalar step = Scalar(1);  // final accepted step, reusable as a warm start
};

namespace detail {

// Subgradient method for nonsmooth data fits (the hinge); keeps the best iterate.
template <typename Problem, typename Scalar, typename Derived>
SolveResult<Scalar> subgradient_descent(const Problem& prob, const Eigen::MatrixBase<Derived>& x0,
                                        const SolveOptions<Scalar>& opt) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const double pass = static_cast<double>(data_fraction(prob));
  SolveResult<Scalar> res;
  Vector x = x0;
  res.x = x;
  res.primal = primal(prob, x);
  res.epochs += 0.5 * pass;
  for (long it = 1; res.epochs < opt.max_epochs; ++it) {
    const Vector g = subgradient(prob, x);
    res.epochs += pass;
    const Scalar gn = g.norm();
    if (gn == Scalar(0)) {
      res.x = x;
      res.primal = primal(prob, x);
      res.gap = duality_gap(prob, x);
      res.converged = true;
      res.iterations = it;
      return res;
    }
    x -= (opt.initial_step / std::sqrt(Scalar(it))) * g / gn;
    const Scalar f = primal(prob, x);
    res.epochs += 0.5 * pass;
    if (f < res.primal) {
      res.primal = f;
      res.x = x;
    }
    res.iterations = it;
    if (it % opt.check_every == 0) {
      res.gap = duality_gap(prob, res.x);
      res.epochs += pass;
      if (res.gap <= opt.tol) {
        res.converged = true;
        return res;
      }
    }
  }
  res.gap = duality_gap(prob, res.x);
  return res;
}

}  // namespace detail

/// Accelerated proximal gradient with backtracking and objective restarts.
///
/// Stops when the duality gap drops below tol; for problems without a
/// computable gap the norm of the gradient mapping is used instead. One epoch
/// is one pass of margins plus A'w over the active rows; a pass over a
/// restricted problem costs its share of the full data.
template <typename Problem, typename Scalar, typename Derived>
SolveResult<Scalar> solve(const Problem& prob, const Eigen::MatrixBase<Derived>& x0, const SolveOptions<Scalar>& opt) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (!(opt.tol > Scalar(0))) throw std::invalid_argument("solve: tol must be positive");
  if (!(opt.max_epochs > 0.0)) throw std::invalid_argument("solve: max_epochs must be positive");
  require_dimension(x0.size(), dimension(prob), "solve");
  if (!is_smooth(prob)) return detail::subgradient_descent(prob, x0, opt);

  const double pass = static_cast<double>(data_fraction(prob));
  SolveResult<Scalar> res;
  Vector x = x0, y = x0;
  Scalar step = opt.initial_step;
  Scalar t = Scalar(1);
  Scalar fx = smooth_value(prob, x) + regularizer_value(prob, x);
  Vector best = x;
  Scalar f_best = fx;
  res.epochs += 0.5 * pass;
  Scalar mapping = std::numeric_limits<Scalar>::infinity();

  while (res.epochs < opt.max_epochs) {
    auto [fy, gy] = smooth_value_gradient(prob, y);
    res.epochs += pass;
    Vector xn;
    Scalar fxn;
    for (;;) {
      xn = regularizer_prox(prob, Vector(y - step * gy), step);
      fxn = smooth_value(prob, xn);
      res.epochs += 0.5 * pass;
      const Vector d = xn - y;
      const Scalar model = fy + gy.dot(d) + d.squaredNorm() / (Scalar(2) * step);
      if (fxn <= model + Scalar(1e-12) * std::abs(fy) || step < Scalar(1e-20)) break;
      step /= Scalar(2);
    }
    mapping = (xn - y).norm() / step;
    ++res.iterations;
    const Scalar Fn = fxn + regularizer_value(prob, xn);
    // Restart when the step points against the momentum; objective values
    // stop being informative long before the gradient does.
    if ((y - xn).dot(xn - x) > Scalar(0)) {
      t = Scalar(1);
      y = xn;
    } else {
      const Scalar tn = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t)) / Scalar(2);
      y = xn + ((t - Scalar(1)) / tn) * (xn - x);
      t = tn;
    }
    x = std::move(xn);
    fx = Fn;
    if (Fn <= f_best) {
      best = x;
      f_best = Fn;
    }

    if (res.iterations % opt.check_every == 0) {
      const Scalar gap = duality_gap(prob, x);
      res.epochs += pass;
      if (std::isnan(gap)) {
        // Measured at x itself; at the momentum point it keeps jumping.
        const Vector gx = smooth_value_gradient(prob, x).second;
        mapping = (regularizer_prox(prob, Vector(x - step * gx), step) - x).norm() / step;
      }
      if (std::isnan(gap) ? mapping <= opt.tol : gap <= opt.tol) {
        res.converged = true;
        break;
      }
    }
  }
  res.x = res.converged || fx <= f_best ? std::move(x) : std::move(best);
  res.primal = primal(prob, res.x);
  res.gap = duality_gap(prob, res.x);
  if (!res.converged) res.converged = std::isnan(res.gap) ? mapping <= opt.tol : res.gap <= opt.tol;
  res.step = step;
  return res;
}

template <typename Problem, typename Scalar, typename Derived>
SolveResult<Scalar> solve(const Problem& prob, const Eigen::MatrixBase<Derived>& x0, Scalar tol, double max_epochs) {
  SolveOptions<Scalar> opt;
  opt.tol = tol;
  opt.max_epochs = max_epochs;
  return solve(prob, x0, opt);
}

/// Epoch-equivalents charged for screening n samples against a region built
/// with k steps: the O(npk) test costs k passes over the data, and never
/// less than the single pass that a ball or point test needs.
template <typename Scalar>
double screening_epoch_cost(const EllipsoidRegion<Scalar>& region) {
  return static_cast<double>(std::max(region.steps(), 1L));
}

template <typename Scalar>
double screening_epoch_cost(const BallRegion<Scalar>&) {
  return 1.0;
}

template <typename Scalar = double>
struct ScreenedSolve {
  SolveResult<Scalar> result;
  ScreeningReport<Scalar> report;
};

/// Screens, then solves on the unscreened rows. The returned primal and gap
/// are those of the full problem at the returned x.
template <typename Scalar, typename Region, typename Derived>
ScreenedSolve<Scalar> solve_screened(const ErmProblem<Scalar>& prob, const Region& region,
                                     const Eigen::MatrixBase<Derived>& x0, const SolveOptions<Scalar>& opt) {
  ScreenedSolve<Scalar> out;
  out.report = screen(prob, region);
  const auto kept = out.report.kept_indices();
  const ErmProblem<Scalar> sub = prob.restrict(kept);
  out.result = solve(sub, x0, opt);
  out.result.epochs += screening_epoch_cost(region);
  out.result.primal = primal(prob, out.result.x);
  out.result.gap = duality_gap(prob, out.result.x);
  return out;
}

/// Log-spaced, strictly decreasing grid from hi to lo with the given number
/// of points per decade (both ends included).
inline std::vector<double> log_grid(double hi, double lo, int per_decade = 10) {
  if (!(hi > lo) || !(lo > 0.0)) throw std::invalid_argument("log_grid needs hi > lo > 0");
  if (per_decade < 1) throw std::invalid_argument("log_grid needs at least one point per decade");
  const double decades = std::log10(hi / lo);
  const long count = static_cast<long>(std::ceil(decades * per_decade - 1e-9)) + 1;
  std::vector<double> out;
  for (long i = 0; i < count; ++i) out.push_back(hi * std::pow(10.0, -decades * i / static_cast<double>(count - 1)));
  return out;
}

/// n log-spaced points from hi down to lo.
inline std::vector<double> log_grid_points(double hi, double lo, long n) {
  if (!(hi > lo) || !(lo > 0.0) || n < 2) throw std::invalid_argument("log_grid_points needs hi > lo > 0 and n >= 2");
  std::vector<double> out;
  const double ratio = std::log10(lo / hi);
  for (long i = 0; i < n; ++i) out.push_back(hi * std::pow(10.0, ratio * i / static_cast<double>(n - 1)));
  return out;
}

enum class PathRegion { Ellipsoid, GapBall };

template <typename Scalar = double>
struct PathOptions {
  bool screening = false;
  PathRegion region = PathRegion::Ellipsoid;
  long steps = 1;
  double warm_epochs = 1e4;  // epoch cap of the warm phase at each new lambda, 0 to skip it
  // With kappa > 0, the warm phase runs until the gap ball would have this
  // radius (gap <= kappa r^2 / 2) or the cap is hit; 0 means epochs only.
  Scalar target_radius = Scalar(0.05);
  SolveOptions<Scalar> solve;
};

template <typename Scalar = double>
struct PathPoint {
  Scalar lambda = Scalar(0);
  SolveResult<Scalar> result;
  long screened = 0;
  double screened_fraction = 0.0;
  double epochs = 0.0;  // this point, including region and screening cost
  double cumulative_epochs = 0.0;
  std::string error;  // empty when the point solved
};

template <typename Scalar = double>
struct PathResult {
  std::vector<PathPoint<Scalar>> points;
  double total_epochs() const { return points.empty() ? 0.0 : points.back().cumulative_epochs; }
};

/// Warm-started path over a strictly decreasing lambda grid. With screening,
/// each point optionally runs a few epochs from the previous solution, then
/// builds its region around the resulting iterate: a gap ball
/// when the penalty is strongly convex, otherwise the sublevel ball, refined
/// by the ellipsoid method unless the gap ball is requested directly.
template <typename Scalar>
PathResult<Scalar> regularization_path(const ErmProblem<Scalar>& base, const std::vector<Scalar>& lambdas,
                                       const PathOptions<Scalar>& opt) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] < lambdas[i - 1])) throw std::invalid_argument("regularization_path: grid must be strictly decreasing");
  if (opt.screening && opt.region == PathRegion::Ellipsoid && opt.steps < 1)
    throw std::invalid_argument("regularization_path: steps must be >= 1");

  PathResult<Scalar> out;
  Vector x = Vector::Zero(base.features());
  SolveOptions<Scalar> sopt = opt.solve;
  double cumulative = 0.0;
  for (Scalar lambda : lambdas) {
    PathPoint<Scalar> pt;
    pt.lambda = lambda;
    try {
      const ErmProblem<Scalar> prob = base.with_lambda(lambda);
      if (!opt.screening) {
        pt.result = solve(prob, x, sopt);
        pt.epochs = pt.result.epochs;
      } else {
        double setup = 0.0;
        if (opt.warm_epochs > 0.0) {
          SolveOptions<Scalar> warm = sopt;
          warm.max_epochs = opt.warm_epochs;
          const Scalar kappa = prob.strong_convexity();
          if (opt.target_radius > Scalar(0) && kappa > Scalar(0))
            warm.tol = std::max(sopt.tol, kappa * opt.target_radius * opt.target_radius / Scalar(2));
          auto pre = solve(prob, x, warm);
          if (pre.gap <= sopt.tol) {
            // Nothing left to accelerate.
            pt.epochs = pre.epochs;
            pt.result = std::move(pre);
            x = pt.result.x;
            sopt.initial_step = pt.result.step;
            cumulative += pt.epochs;
            pt.cumulative_epochs = cumulative;
            out.points.push_back(std::move(pt));
            continue;
          }
          x = pre.x;
          sopt.initial_step = pre.step;
          setup += pre.epochs;
        }
        BallRegion<Scalar> ball;
        const Scalar kappa = prob.strong_convexity();
        if (kappa > Scalar(0)) {
          const Scalar gap = duality_gap(prob, x);
          setup += 1.0;
          if (!std::isfinite(gap)) throw NumericalError("infeasible dual candidate at the warm start");
          ball = init_ball(x, InitStrategy<Scalar>::gap(gap, kappa));
        } else {
          setup += 0.5;
          ball = init_ball(x, InitStrategy<Scalar>::sublevel(primal(prob, x), lambda, prob.penalty().kind()));
        }
        ScreenedSolve<Scalar> ss;
        if (ball.radius == Scalar(0)) {
          ss = solve_screened(prob, EllipsoidRegion<Scalar>::point(ball.center), x, sopt);
        } else if (opt.region == PathRegion::GapBall) {
          ss = solve_screened(prob, ball, x, sopt);
        } else {
          const auto region = build_region(prob, ball, opt.steps);
          setup += static_cast<double>(region.steps() + 1);
          ss = solve_screened(prob, region, x, sopt);
        }
        pt.result = std::move(ss.result);
        pt.epochs = pt.result.epochs + setup;
        pt.screened = ss.report.screened_count();
        pt.screened_fraction = ss.report.screened_fraction();
      }
      x = pt.result.x;
      sopt.initial_step = pt.result.step;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    cumulative += pt.epochs;
    pt.cumulative_epochs = cumulative;
    out.points.push_back(std::move(pt));
  }
  return out;
}

}  // namespace safescreen
