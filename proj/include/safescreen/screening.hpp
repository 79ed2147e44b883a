#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dataset.hpp"
#include "erm.hpp"
#include "losses.hpp"
#include "region.hpp"

namespace safescreen {

/// A-posteriori safety checks; see audit.hpp.
template <typename Scalar = double>
struct AuditReport {
  bool solution_in_region = true;
  Scalar mahalanobis = Scalar(0);  // (x - z)'E^{-1}(x - z) of the reference solution
  Scalar cut_value = Scalar(0);    // g'(x - z), <= 0 inside the cut
  bool screened_margins_inside = true;
  Scalar worst_margin_slack = Scalar(0);  // min over screened samples of the distance into I
  long margin_violations = 0;
  bool refit_matches = true;
  Scalar refit_distance = Scalar(0);
  Scalar refit_objective_gap = Scalar(0);  // relative, on the full objective

  bool passed() const { return solution_in_region && screened_margins_inside && refit_matches; }
};

template <typename Scalar = double>
struct RegionSummary {
  std::string kind;  // "ellipsoid", "ball" or "point"
  long steps = 0;
  Scalar initial_radius = Scalar(0);
  bool cut_used = false;
};

/// Per-sample screening outcome. Scores are oriented so that a positive
/// score means the sample provably sits in the flat region at x*.
template <typename Scalar = double>
struct ScreeningReport {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Task task = Task::Regression;
  Vector scores;
  std::vector<bool> screened;
  Scalar threshold = Scalar(0);  // mu for regression, lower end of I for classification
  Scalar tolerance = Scalar(1e-9);
  bool degenerate_interval = false;  // nothing can be screened (mu = 0)
  RegionSummary<Scalar> region;
  std::optional<AuditReport<Scalar>> audit;

  long samples() const { return static_cast<long>(screened.size()); }
  long screened_count() const {
    long c = 0;
    for (bool s : screened) c += s ? 1 : 0;
    return c;
  }
  double screened_fraction() const {
    return screened.empty() ? 0.0 : static_cast<double>(screened_count()) / static_cast<double>(screened.size());
  }
  std::vector<long> kept_indices() const { return indices_where(screened, false); }
  std::vector<long> screened_indices() const { return indices_where(screened, true); }
};

inline constexpr double default_screening_tolerance = 1e-9;

template <typename Scalar>
RegionSummary<Scalar> summarize(const EllipsoidRegion<Scalar>& region) {
  return {region.is_point() ? "point" : "ellipsoid", region.steps(), region.initial_radius(),
          region.cut().has_value() && !region.is_point()};
}

template <typename Scalar>
RegionSummary<Scalar> summarize(const BallRegion<Scalar>& ball) {
  return {"ball", 0, ball.radius, false};
}

template <typename Scalar>
long region_dimension(const EllipsoidRegion<Scalar>& r) {
  return r.dimension();
}
template <typename Scalar>
long region_dimension(const BallRegion<Scalar>& r) {
  return r.center.size();
}

/// Applies the safe rule to every row of `design` given the range of a_i'x
/// over the region. Shared by the linear and kernel paths.
template <typename Scalar, typename Region>
ScreeningReport<Scalar> screen_rows(const Design<Scalar>& design,
                                    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& labels,
                                    const SafeLoss<Scalar>& loss, const Region& region, Scalar tol) {
  const long n = design.rows();
  ScreeningReport<Scalar> report;
  report.task = loss.task();
  report.tolerance = tol;
  report.region = summarize(region);
  report.scores.resize(n);
  report.screened.assign(static_cast<std::size_t>(n), false);

  const auto flat = loss.flat_interval();
  if (loss.task() == Task::Regression) {
    if (loss.kind() != LossKind::SquareDistance)
      throw std::invalid_argument("screening needs a safe loss; '" + std::string(loss_id(loss.kind())) +
                                  "' has no flat region");
    report.threshold = flat.hi;
  } else {
    if (!loss.is_safe())
      throw std::invalid_argument("screening needs a safe loss; '" + std::string(loss_id(loss.kind())) +
                                  "' has no flat region");
    report.threshold = flat.lo;
  }
  report.degenerate_interval = flat.degenerate();

  const LinearRange<Scalar> range(region);
  for (long i = 0; i < n; ++i) {
    const auto [lo, hi] = range.row(design, i);
    const Scalar b = labels(i);
    Scalar score;
    if (loss.task() == Task::Regression) {
      score = report.threshold - std::max(hi - b, b - lo);
    } else {
      const Scalar worst = b > Scalar(0) ? lo : -hi;  // min over the region of b a'x
      score = worst - report.threshold;
    }
    report.scores(i) = score;
    report.screened[static_cast<std::size_t>(i)] = !report.degenerate_interval && score > tol;
  }
  return report;
}

/// Screens regression samples: sample i is removed when
/// max |a_i'x - b_i| < mu over the region.
template <typename Scalar, typename Region>
ScreeningReport<Scalar> screen_regression(const ErmProblem<Scalar>& prob, const Region& region,
                                          Scalar tol = Scalar(default_screening_tolerance)) {
  if (prob.task() != Task::Regression) throw std::invalid_argument("screen_regression on a classification problem");
  require_dimension(region_dimension(region), prob.features(), "screen_regression");
  return screen_rows(prob.data().design(), prob.data().labels(), prob.loss(), region, tol);
}

/// Screens classification samples: sample i is removed when
/// min b_i a_i'x over the region exceeds the lower end of the flat interval.
template <typename Scalar, typename Region>
ScreeningReport<Scalar> screen_classification(const ErmProblem<Scalar>& prob, const Region& region,
                                              Scalar tol = Scalar(default_screening_tolerance)) {
  if (prob.task() != Task::Classification)
    throw std::invalid_argument("screen_classification on a regression problem");
  require_dimension(region_dimension(region), prob.features(), "screen_classification");
  return screen_rows(prob.data().design(), prob.data().labels(), prob.loss(), region, tol);
}

template <typename Scalar, typename Region>
ScreeningReport<Scalar> screen(const ErmProblem<Scalar>& prob, const Region& region,
                               Scalar tol = Scalar(default_screening_tolerance)) {
  return prob.task() == Task::Regression ? screen_regression(prob, region, tol)
                                         : screen_classification(prob, region, tol);
}

enum class GapBallRule {
  Reported,        // radius 2 gap / lambda, as stated for the baseline
  StrongConvexity  // radius sqrt(2 gap / kappa)
};

/// Baseline: a ball around x sized from the duality gap at x.
template <typename Scalar, typename Derived>
ScreeningReport<Scalar> screen_with_gap_ball(const ErmProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& x,
                                             GapBallRule rule = GapBallRule::StrongConvexity,
                                             Scalar tol = Scalar(default_screening_tolerance)) {
  const Scalar gap = duality_gap(prob, x);
  if (!std::isfinite(gap)) throw std::domain_error("screen_with_gap_ball: dual candidate is infeasible");
  Scalar radius;
  if (rule == GapBallRule::StrongConvexity) {
    radius = init_ball(x, InitStrategy<Scalar>::gap(gap, prob.strong_convexity())).radius;
  } else {
    if (!(prob.lambda() > Scalar(0))) throw std::invalid_argument("screen_with_gap_ball: lambda must be positive");
    radius = Scalar(2) * gap / prob.lambda();
  }
  const BallRegion<Scalar> ball{x, radius};
  return screen(prob, ball, tol);
}

}  // namespace safescreen
