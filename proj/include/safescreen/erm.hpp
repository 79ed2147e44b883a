#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>

#include <Eigen/Core>

#include "dataset.hpp"
#include "errors.hpp"
#include "losses.hpp"

namespace safescreen {

/// P(x) = (1/N) sum_i phi(t_i(x)) + lambda R(x).
///
/// N defaults to the number of samples. Restricting a problem to a subset of
/// its rows keeps N, so the restricted objective differs from the full one
/// only by the dropped loss terms; this is what makes a screened refit land
/// on the same minimizer.
template <typename Scalar = double>
class ErmProblem {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  ErmProblem(std::shared_ptr<const Dataset<Scalar>> data, SafeLoss<Scalar> loss, Penalty<Scalar> penalty,
             Scalar normalization = Scalar(0))
      : data_(std::move(data)), loss_(loss), penalty_(penalty), normalization_(normalization) {
    if (!data_) throw std::invalid_argument("ErmProblem needs a dataset");
    if (loss_.task() != data_->task())
      throw std::invalid_argument("loss '" + std::string(loss_id(loss_.kind())) + "' does not match the dataset task");
    if (normalization_ == Scalar(0)) normalization_ = Scalar(data_->samples());
    if (!(normalization_ > Scalar(0))) throw std::invalid_argument("normalization must be positive");
  }

  ErmProblem(Dataset<Scalar> data, SafeLoss<Scalar> loss, Penalty<Scalar> penalty)
      : ErmProblem(std::make_shared<const Dataset<Scalar>>(std::move(data)), loss, penalty) {}

  const Dataset<Scalar>& data() const { return *data_; }
  std::shared_ptr<const Dataset<Scalar>> data_ptr() const { return data_; }
  const SafeLoss<Scalar>& loss() const { return loss_; }
  const Penalty<Scalar>& penalty() const { return penalty_; }
  Scalar lambda() const { return penalty_.lambda(); }
  Scalar normalization() const { return normalization_; }
  Task task() const { return data_->task(); }
  long samples() const { return data_->samples(); }
  long features() const { return data_->features(); }
  Scalar strong_convexity() const { return penalty_.strong_convexity(); }

  ErmProblem with_lambda(Scalar lambda) const {
    return ErmProblem(data_, loss_, penalty_.with_lambda(lambda), normalization_);
  }

  /// Same objective restricted to the given rows, normalization unchanged.
  ErmProblem restrict(std::span<const long> rows) const {
    if (static_cast<long>(rows.size()) == samples()) {
      bool identity = true;
      for (std::size_t i = 0; i < rows.size() && identity; ++i) identity = rows[i] == static_cast<long>(i);
      if (identity) return *this;
    }
    return ErmProblem(std::make_shared<const Dataset<Scalar>>(data_->select(rows)), loss_, penalty_, normalization_);
  }

 private:
  std::shared_ptr<const Dataset<Scalar>> data_;
  SafeLoss<Scalar> loss_;
  Penalty<Scalar> penalty_;
  Scalar normalization_;
};

template <typename Scalar>
long dimension(const ErmProblem<Scalar>& prob) {
  return prob.features();
}

/// Fraction of the full-data pass that one pass over this problem's rows costs.
template <typename Scalar>
Scalar data_fraction(const ErmProblem<Scalar>& prob) {
  return Scalar(prob.samples()) / prob.normalization();
}

/// t_i = a_i'x - b_i (regression) or b_i a_i'x (classification).
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> margins(const ErmProblem<Scalar>& prob,
                                                 const Eigen::MatrixBase<Derived>& x) {
  require_dimension(x.size(), prob.features(), "margins");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> t = prob.data().design().multiply(x);
  if (prob.task() == Task::Regression) return t - prob.data().labels();
  return t.cwiseProduct(prob.data().labels());
}

/// (1/N) sum_i phi(t_i)
template <typename Scalar, typename Derived>
Scalar data_fit(const ErmProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& x) {
  const auto t = margins(prob, x);
  Scalar acc(0);
  for (long i = 0; i < t.size(); ++i) acc += prob.loss().value(t(i));
  return acc / prob.normalization();
}

template <typename Scalar, typename Derived>
Scalar primal(const ErmProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& x) {
  return data_fit(prob, x) + prob.lambda() * prob.penalty().value(x);
}

/// Value and gradient of the data-fit term in one pass.
template <typename Scalar, typename Derived>
std::pair<Scalar, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> data_fit_gradient(
    const ErmProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& x) {
  const auto t = margins(prob, x);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(t.size());
  Scalar acc(0);
  for (long i = 0; i < t.size(); ++i) {
    acc += prob.loss().value(t(i));
    w(i) = prob.loss().derivative(t(i));
  }
  if (prob.task() == Task::Classification) w = w.cwiseProduct(prob.data().labels());
  return {acc / prob.normalization(), prob.data().design().multiply_transpose(w) / prob.normalization()};
}

/// A subgradient of P at x; the l1 part uses 0 at 0.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> subgradient(const ErmProblem<Scalar>& prob,
                                                     const Eigen::MatrixBase<Derived>& x) {
  return data_fit_gradient(prob, x).second + prob.penalty().subgradient(x);
}

/// nu_i = f_i'(a_i'x): phi'(t_i) for regression, b_i phi'(t_i) for
/// classification, clipped to the conjugate domain.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dual_candidate(const ErmProblem<Scalar>& prob,
                                                        const Eigen::MatrixBase<Derived>& x) {
  const auto t = margins(prob, x);
  const auto dom = prob.loss().conjugate_domain();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nu(t.size());
  for (long i = 0; i < t.size(); ++i) nu(i) = std::clamp(prob.loss().derivative(t(i)), dom.lo, dom.hi);
  if (prob.task() == Task::Classification) nu = nu.cwiseProduct(prob.data().labels());
  return nu;
}

/// D(nu) = (1/N) sum_i -f_i*(nu_i) - lambda R*(-A'nu / (lambda N)); -inf when infeasible.
template <typename Scalar, typename Derived>
Scalar dual_value(const ErmProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& nu) {
  require_dimension(nu.size(), prob.samples(), "dual_value");
  constexpr Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();
  const auto& b = prob.data().labels();
  Scalar acc(0);
  for (long i = 0; i < nu.size(); ++i) {
    const Scalar c = prob.task() == Task::Regression ? prob.loss().conjugate(nu(i)) + b(i) * nu(i)
                                                     : prob.loss().conjugate(b(i) * nu(i));
    if (!std::isfinite(c)) return neg_inf;
    acc -= c;
  }
  acc /= prob.normalization();

  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> atnu = prob.data().design().multiply_transpose(nu);
  const Scalar lambda = prob.lambda();
  if (lambda == Scalar(0)) {
    return atnu.cwiseAbs().maxCoeff() <= Scalar(1e-12) ? acc : neg_inf;
  }
  const Scalar rc = prob.penalty().conjugate(-atnu / (lambda * prob.normalization()));
  if (!std::isfinite(rc)) return neg_inf;
  return acc - lambda * rc;
}

/// Scales an l1 dual candidate into the dual feasible set (a no-op for l2).
/// Conjugate domains are intervals containing 0, so shrinking keeps each
/// nu_i admissible.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> feasible_dual(const ErmProblem<Scalar>& prob,
                                                       const Eigen::MatrixBase<Derived>& nu) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = nu;
  if (prob.penalty().kind() != PenaltyKind::L1 || nu.size() == 0) return out;
  const Scalar bound = prob.lambda() * prob.normalization();
  const Scalar top = prob.data().design().multiply_transpose(nu).cwiseAbs().maxCoeff();
  if (top > bound) out *= bound / top;
  return out;
}

/// P(x) - D(nu) for the (rescaled) dual candidate at x, clamped at 0.
template <typename Scalar, typename Derived>
Scalar duality_gap(const ErmProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& x) {
  const auto nu = feasible_dual(prob, dual_candidate(prob, x));
  const Scalar d = dual_value(prob, nu);
  if (!std::isfinite(d)) return std::numeric_limits<Scalar>::infinity();
  return std::max(primal(prob, x) - d, Scalar(0));
}

/// Smallest lambda for which x = 0 is optimal under an l1 penalty.
template <typename Scalar>
Scalar lambda_max_l1(const ErmProblem<Scalar>& prob) {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> zero = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(prob.features());
  return data_fit_gradient(prob, zero).second.cwiseAbs().maxCoeff();
}

// Composite-objective hooks used by the generic solver: smooth data fit
// plus a proximable regularizer.

template <typename Scalar, typename Derived>
Scalar regularizer_value(const ErmProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& x) {
  return prob.lambda() * prob.penalty().value(x);
}

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> regularizer_prox(const ErmProblem<Scalar>& prob,
                                                          const Eigen::MatrixBase<Derived>& x, Scalar step) {
  return prob.penalty().prox(x, step);
}

}  // namespace safescreen
