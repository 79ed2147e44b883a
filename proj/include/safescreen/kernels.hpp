#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "dataset.hpp"
#include "errors.hpp"
#include "losses.hpp"
#include "region.hpp"
#include "screening.hpp"

namespace safescreen {

struct Kernel {
  enum class Kind { Linear, Rbf, Polynomial };
  Kind kind = Kind::Linear;
  double gamma = 1.0;
  int degree = 2;
  double coef = 1.0;

  static Kernel linear() { return {}; }
  static Kernel rbf(double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("rbf kernel needs gamma > 0");
    return {Kind::Rbf, gamma, 2, 1.0};
  }
  static Kernel polynomial(int degree, double coef) {
    if (degree < 1) throw std::invalid_argument("polynomial kernel needs degree >= 1");
    return {Kind::Polynomial, 1.0, degree, coef};
  }
};

/// K_ij = k(a_i, a_j).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gram_matrix(const Dataset<Scalar>& data, const Kernel& kernel) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Matrix a = data.design().to_dense();
  Matrix k = a * a.transpose();
  switch (kernel.kind) {
    case Kernel::Kind::Linear:
      break;
    case Kernel::Kind::Rbf: {
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sq = k.diagonal();
      for (long j = 0; j < k.cols(); ++j)
        for (long i = 0; i < k.rows(); ++i) {
          const Scalar d2 = i == j ? Scalar(0) : std::max(sq(i) + sq(j) - Scalar(2) * k(i, j), Scalar(0));
          k(i, j) = std::exp(-Scalar(kernel.gamma) * d2);
        }
      break;
    }
    case Kernel::Kind::Polynomial:
      k = k.unaryExpr([&](Scalar v) { return std::pow(v + Scalar(kernel.coef), kernel.degree); });
      break;
  }
  return k;
}

/// Smallest eigenvalue of a symmetric matrix: exact up to `exact_limit`
/// rows, a shifted power iteration beyond.
template <typename Scalar>
Scalar smallest_eigenvalue(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& k, long exact_limit = 1500) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const long n = k.rows();
  if (n == 0) return Scalar(0);
  if (n <= exact_limit) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
  }
  const Scalar shift = k.cwiseAbs().rowwise().sum().maxCoeff();  // >= spectral radius
  Vector v = Vector::Ones(n).normalized();
  Scalar top = Scalar(0);
  for (int it = 0; it < 500; ++it) {
    Vector w = shift * v - k * v;
    const Scalar nw = w.norm();
    if (nw == Scalar(0)) break;
    const Scalar next = v.dot(w);
    v = w / nw;
    if (std::abs(next - top) <= Scalar(1e-12) * std::abs(shift)) {
      top = next;
      break;
    }
    top = next;
  }
  return shift - top;
}

/// Kernel ERM over alpha: (1/N) sum_i phi(t_i(K_i alpha)) + lambda alpha'K alpha.
/// The penalty is part of the smooth term; restricting keeps N, alpha's
/// dimension and the full K in the penalty.
template <typename Scalar = double>
class GramProblem {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  static constexpr Scalar psd_tolerance = Scalar(1e-8);

  GramProblem(Matrix gram, Vector labels, SafeLoss<Scalar> loss, Scalar lambda)
      : gram_(std::make_shared<const Matrix>(std::move(gram))), loss_(loss), lambda_(lambda) {
    const long n = gram_->rows();
    require_dimension(gram_->cols(), n, "GramProblem gram");
    require_dimension(labels.size(), n, "GramProblem labels");
    if (!(lambda_ > Scalar(0))) throw std::invalid_argument("GramProblem: lambda must be positive");
    if (n > 0 && ((*gram_) - gram_->transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10))
      throw std::invalid_argument("GramProblem: gram matrix is not symmetric");
    if (n > 0 && gram_->diagonal().minCoeff() < Scalar(0))
      throw std::invalid_argument("GramProblem: gram matrix has a negative diagonal entry");
    if (loss_.task() == Task::Classification)
      for (long i = 0; i < n; ++i)
        if (labels(i) != Scalar(1) && labels(i) != Scalar(-1))
          throw std::invalid_argument("classification labels must be +1 or -1");
    const Scalar low = smallest_eigenvalue(*gram_);
    if (low < -psd_tolerance)
      throw std::invalid_argument("GramProblem: gram matrix is not positive semidefinite (smallest eigenvalue " +
                                  std::to_string(static_cast<double>(low)) + ")");
    rows_.resize(static_cast<std::size_t>(n));
    std::iota(rows_.begin(), rows_.end(), 0L);
    active_ = *gram_;
    labels_ = std::move(labels);
    normalization_ = Scalar(n);
  }

  long dimension() const { return gram_->rows(); }
  long samples() const { return static_cast<long>(rows_.size()); }
  Task task() const { return loss_.task(); }
  Scalar lambda() const { return lambda_; }
  Scalar normalization() const { return normalization_; }
  const SafeLoss<Scalar>& loss() const { return loss_; }
  const Matrix& gram() const { return *gram_; }
  /// Gram rows of the active samples.
  const Matrix& active_rows() const { return active_; }
  const Vector& labels() const { return labels_; }
  const std::vector<long>& rows() const { return rows_; }

  GramProblem restrict(std::span<const long> subset) const {
    GramProblem out = *this;
    out.rows_.clear();
    out.active_.resize(static_cast<long>(subset.size()), dimension());
    out.labels_.resize(static_cast<long>(subset.size()));
    for (std::size_t r = 0; r < subset.size(); ++r) {
      const long i = subset[r];
      out.rows_.push_back(rows_[static_cast<std::size_t>(i)]);
      out.active_.row(static_cast<long>(r)) = active_.row(i);
      out.labels_(static_cast<long>(r)) = labels_(i);
    }
    return out;
  }

  template <typename Derived>
  Vector margins(const Eigen::MatrixBase<Derived>& alpha) const {
    require_dimension(alpha.size(), dimension(), "GramProblem::margins");
    Vector t = active_ * alpha;
    if (task() == Task::Regression) return t - labels_;
    return t.cwiseProduct(labels_);
  }

 private:
  std::shared_ptr<const Matrix> gram_;
  Matrix active_;
  Vector labels_;
  std::vector<long> rows_;
  SafeLoss<Scalar> loss_;
  Scalar lambda_;
  Scalar normalization_;
};

template <typename Scalar>
long dimension(const GramProblem<Scalar>& prob) {
  return prob.dimension();
}

template <typename Scalar>
Scalar data_fraction(const GramProblem<Scalar>& prob) {
  return Scalar(prob.samples()) / prob.normalization();
}

template <typename Scalar>
bool is_smooth(const GramProblem<Scalar>& prob) {
  return prob.loss().is_smooth();
}

template <typename Scalar, typename Derived>
std::pair<Scalar, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> smooth_value_gradient(
    const GramProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& alpha) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Vector t = prob.margins(alpha);
  Vector w(t.size());
  Scalar acc(0);
  for (long i = 0; i < t.size(); ++i) {
    acc += prob.loss().value(t(i));
    w(i) = prob.loss().derivative(t(i));
  }
  if (prob.task() == Task::Classification) w = w.cwiseProduct(prob.labels());
  const Vector ka = prob.gram() * alpha;
  const Vector grad = prob.active_rows().transpose() * w / prob.normalization() + (Scalar(2) * prob.lambda()) * ka;
  return {acc / prob.normalization() + prob.lambda() * alpha.dot(ka), grad};
}

template <typename Scalar, typename Derived>
Scalar smooth_value(const GramProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& alpha) {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> t = prob.margins(alpha);
  Scalar acc(0);
  for (long i = 0; i < t.size(); ++i) acc += prob.loss().value(t(i));
  return acc / prob.normalization() + prob.lambda() * alpha.dot(prob.gram() * alpha);
}

template <typename Scalar, typename Derived>
Scalar primal(const GramProblem<Scalar>& prob, const Eigen::MatrixBase<Derived>& alpha) {
  return smooth_value(prob, alpha);
}

/// Gradient of the kernel objective; the penalty contributes 2 lambda K alpha.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> subgradient(const GramProblem<Scalar>& prob,
                                                     const Eigen::MatrixBase<Derived>& alpha) {
  return smooth_value_gradient(prob, alpha).second;
}

template <typename Scalar, typename Derived>
Scalar regularizer_value(const GramProblem<Scalar>&, const Eigen::MatrixBase<Derived>&) {
  return Scalar(0);
}

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> regularizer_prox(const GramProblem<Scalar>&,
                                                          const Eigen::MatrixBase<Derived>& alpha, Scalar) {
  return alpha;
}

/// No dual is formed for the kernel objective; solvers fall back to the
/// gradient-mapping test.
template <typename Scalar, typename Derived>
Scalar duality_gap(const GramProblem<Scalar>&, const Eigen::MatrixBase<Derived>&) {
  return std::numeric_limits<Scalar>::quiet_NaN();
}

/// Screening with the i-th Gram row in place of a_i.
template <typename Scalar, typename Region>
ScreeningReport<Scalar> screen_kernel(const GramProblem<Scalar>& prob, const Region& region,
                                      Scalar tol = Scalar(default_screening_tolerance)) {
  require_dimension(region_dimension(region), prob.dimension(), "screen_kernel");
  const Design<Scalar> rows(prob.active_rows());
  return screen_rows(rows, prob.labels(), prob.loss(), region, tol);
}

}  // namespace safescreen
