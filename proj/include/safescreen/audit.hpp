#pragma once

#include <cmath>
#include <limits>
#include <span>

#include <Eigen/Core>

#include "erm.hpp"
#include "region.hpp"
#include "screening.hpp"
#include "solver.hpp"

namespace safescreen {

template <typename Scalar = double>
struct AuditOptions {
  Scalar region_tol = Scalar(1e-6);      // slack on the Mahalanobis and cut tests
  Scalar margin_tol = Scalar(1e-7);      // how far outside I an approximate x_full may sit
  Scalar objective_tol = Scalar(1e-8);   // relative, on the full objective
  Scalar distance_tol = Scalar(1e-6);    // alternative pass: ||x_refit - x_full|| relative
  SolveOptions<Scalar> refit{Scalar(1e-12), 1e5, 10, Scalar(1)};
};

namespace detail {

template <typename Scalar, typename Derived>
void audit_membership(AuditReport<Scalar>& rep, const EllipsoidRegion<Scalar>& region,
                      const Eigen::MatrixBase<Derived>& x, Scalar tol) {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> d = x - region.center();
  if (region.is_point()) {
    rep.mahalanobis = d.norm();
    rep.cut_value = Scalar(0);
    rep.solution_in_region = d.norm() <= tol * std::max(Scalar(1), region.center().norm());
    return;
  }
  rep.mahalanobis = region.mahalanobis(x);
  rep.cut_value = region.cut_value(x);
  const Scalar cut_scale = region.cut() ? region.cut()->norm() * std::sqrt(region.scale()) : Scalar(1);
  rep.solution_in_region = rep.mahalanobis <= Scalar(1) + tol && rep.cut_value <= tol * cut_scale;
}

template <typename Scalar, typename Derived>
void audit_membership(AuditReport<Scalar>& rep, const BallRegion<Scalar>& ball, const Eigen::MatrixBase<Derived>& x,
                      Scalar tol) {
  const Scalar dist = (x - ball.center).norm();
  rep.mahalanobis = ball.radius > Scalar(0) ? (dist / ball.radius) * (dist / ball.radius)
                                            : (dist == Scalar(0) ? Scalar(0) : std::numeric_limits<Scalar>::infinity());
  rep.cut_value = -std::numeric_limits<Scalar>::infinity();
  rep.solution_in_region = dist <= ball.radius * (Scalar(1) + tol) + tol;
}

}  // namespace detail

/// Checks a screening outcome against a reference solution x_full:
/// (a) x_full lies in the region, (b) every screened sample has its margin
/// inside the flat interval at x_full, (c) a cold refit on the kept samples
/// reaches the full-data objective of x_full.
template <typename Scalar, typename Region, typename Derived>
AuditReport<Scalar> audit_safety(const ErmProblem<Scalar>& prob, std::span<const long> screened,
                                 const Eigen::MatrixBase<Derived>& x_full, const Region& region0,
                                 const AuditOptions<Scalar>& opt = {}) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  AuditReport<Scalar> rep;
  detail::audit_membership(rep, region0, x_full, opt.region_tol);

  const Vector t = margins(prob, x_full);
  const auto flat = prob.loss().flat_interval();
  rep.worst_margin_slack = std::numeric_limits<Scalar>::infinity();
  for (long i : screened) {
    const Scalar slack = std::min(t(i) - flat.lo, flat.hi - t(i));
    rep.worst_margin_slack = std::min(rep.worst_margin_slack, slack);
    if (!(slack > -opt.margin_tol)) ++rep.margin_violations;
  }
  if (screened.empty()) rep.worst_margin_slack = Scalar(0);
  rep.screened_margins_inside = rep.margin_violations == 0;

  if (screened.empty()) {
    rep.refit_matches = true;
    return rep;
  }
  std::vector<bool> mask(static_cast<std::size_t>(prob.samples()), false);
  for (long i : screened) mask[static_cast<std::size_t>(i)] = true;
  const auto kept = indices_where(mask, false);
  const ErmProblem<Scalar> sub = prob.restrict(kept);
  const auto refit = solve(sub, Vector::Zero(prob.features()), opt.refit);
  const Scalar p_full = primal(prob, x_full);
  const Scalar p_refit = primal(prob, refit.x);
  rep.refit_objective_gap = std::abs(p_refit - p_full) / std::max(std::abs(p_full), Scalar(1e-300));
  rep.refit_distance = (refit.x - x_full).norm() / std::max(x_full.norm(), Scalar(1));
  rep.refit_matches = rep.refit_objective_gap <= opt.objective_tol || rep.refit_distance <= opt.distance_tol;
  return rep;
}

}  // namespace safescreen
