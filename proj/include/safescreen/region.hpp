#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "dataset.hpp"
#include "errors.hpp"
#include "losses.hpp"
#include "op_counter.hpp"

namespace safescreen {

template <typename Scalar = double>
struct BallRegion {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector center;
  Scalar radius;
};

/// How the initial ball around x* is sized.
template <typename Scalar = double>
struct InitStrategy {
  enum class Kind {
    ExplicitRadius,   // radius given by the caller
    StrongConvexity,  // kappa/2 ||x0 - x*||^2 <= bound
    Gap,              // same inequality with bound = duality gap
    Sublevel          // lambda R(x*) <= P(x0) <= value, ball centered at 0
  };

  Kind kind = Kind::ExplicitRadius;
  Scalar radius = Scalar(0);
  Scalar bound = Scalar(0);
  Scalar kappa = Scalar(0);
  Scalar lambda = Scalar(0);
  PenaltyKind penalty = PenaltyKind::L1;

  static InitStrategy explicit_radius(Scalar r) { return {Kind::ExplicitRadius, r}; }
  static InitStrategy strong_convexity(Scalar bound, Scalar kappa) {
    return {Kind::StrongConvexity, Scalar(0), bound, kappa};
  }
  static InitStrategy gap(Scalar delta, Scalar kappa) { return {Kind::Gap, Scalar(0), delta, kappa}; }
  /// Uses P(x*) <= P(x0) and P >= lambda R: ||x*|| <= P(x0)/lambda for l1,
  /// sqrt(2 P(x0)/lambda) for half squared l2.
  static InitStrategy sublevel(Scalar objective_value, Scalar lambda, PenaltyKind penalty) {
    return {Kind::Sublevel, Scalar(0), objective_value, Scalar(0), lambda, penalty};
  }
};

template <typename Scalar, typename Derived>
BallRegion<Scalar> init_ball(const Eigen::MatrixBase<Derived>& x0, const InitStrategy<Scalar>& strategy) {
  using Kind = typename InitStrategy<Scalar>::Kind;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  switch (strategy.kind) {
    case Kind::ExplicitRadius:
      if (!(strategy.radius >= Scalar(0))) throw std::invalid_argument("init_ball: radius must be nonnegative");
      return {x0, strategy.radius};
    case Kind::StrongConvexity:
    case Kind::Gap:
      if (!(strategy.kappa > Scalar(0)))
        throw std::invalid_argument("init_ball: strategy needs a strongly convex objective (kappa > 0)");
      if (!(strategy.bound >= Scalar(0))) throw std::invalid_argument("init_ball: bound must be nonnegative");
      return {x0, std::sqrt(Scalar(2) * strategy.bound / strategy.kappa)};
    case Kind::Sublevel: {
      if (!(strategy.lambda > Scalar(0))) throw std::invalid_argument("init_ball: sublevel strategy needs lambda > 0");
      if (!(strategy.bound >= Scalar(0))) throw std::invalid_argument("init_ball: bound must be nonnegative");
      const Scalar r = strategy.penalty == PenaltyKind::L1 ? strategy.bound / strategy.lambda
                                                           : std::sqrt(Scalar(2) * strategy.bound / strategy.lambda);
      return {Vector::Zero(x0.size()), r};
    }
  }
  throw std::invalid_argument("init_ball: unknown strategy");
}

/// Ellipsoid {x : (x - z)' E^{-1} (x - z) <= 1} with E = s I - L D L',
/// optionally intersected with the half-space g'(x - z) <= 0.
///
/// L is p x k and D is diagonal with positive entries. The Gram matrix L'L
/// is kept alongside so that spectral checks cost O(k^3), independent of p.
/// A zero scale encodes the degenerate region {z}.
template <typename Scalar = double>
class EllipsoidRegion {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  EllipsoidRegion(Vector center, Scalar scale, Matrix factors, Vector weights, std::optional<Vector> cut = {})
      : center_(std::move(center)),
        scale_(scale),
        factors_(std::move(factors)),
        weights_(std::move(weights)),
        cut_(std::move(cut)) {
    const long p = center_.size();
    if (factors_.size() == 0) factors_.resize(p, 0);
    require_dimension(factors_.rows(), p, "EllipsoidRegion factors");
    require_dimension(weights_.size(), factors_.cols(), "EllipsoidRegion weights");
    if (cut_) require_dimension(cut_->size(), p, "EllipsoidRegion cut");
    if (!(scale_ >= Scalar(0))) throw std::invalid_argument("EllipsoidRegion: scale must be nonnegative");
    if (weights_.size() > 0 && !(weights_.minCoeff() > Scalar(0)))
      throw std::invalid_argument("EllipsoidRegion: weights must be positive");
    gram_ = factors_.transpose() * factors_;
  }

  static EllipsoidRegion ball(Vector center, Scalar radius) {
    if (!(radius > Scalar(0))) throw std::invalid_argument("ball region needs a positive radius");
    EllipsoidRegion r(std::move(center), radius * radius, Matrix(), Vector());
    r.initial_radius_ = radius;
    return r;
  }

  static EllipsoidRegion point(Vector center, Scalar initial_radius = Scalar(0)) {
    EllipsoidRegion r(std::move(center), Scalar(0), Matrix(), Vector());
    r.initial_radius_ = initial_radius;
    return r;
  }

  long dimension() const { return center_.size(); }
  long steps() const { return factors_.cols(); }
  bool is_point() const { return scale_ == Scalar(0); }
  const Vector& center() const { return center_; }
  Scalar scale() const { return scale_; }
  const Matrix& factors() const { return factors_; }
  const Vector& weights() const { return weights_; }
  const std::optional<Vector>& cut() const { return cut_; }
  const Matrix& gram() const { return gram_; }
  Scalar initial_radius() const { return initial_radius_; }

  EllipsoidRegion with_cut(Vector g) const {
    require_dimension(g.size(), dimension(), "EllipsoidRegion::with_cut");
    EllipsoidRegion out = *this;
    out.cut_ = std::move(g);
    return out;
  }

  EllipsoidRegion without_cut() const {
    EllipsoidRegion out = *this;
    out.cut_.reset();
    return out;
  }

  /// E v through the factors, O(pk).
  template <typename Derived>
  Vector apply(const Eigen::MatrixBase<Derived>& v) const {
    require_dimension(v.size(), dimension(), "EllipsoidRegion::apply");
    const long p = dimension(), k = steps();
    ops::count(static_cast<std::uint64_t>(2 * p * k + p + k));
    if (k == 0) return scale_ * v;
    const Vector lv = weights_.cwiseProduct(factors_.transpose() * v);
    return scale_ * v - factors_ * lv;
  }

  /// v' E v, O(pk).
  template <typename Derived>
  Scalar quadratic_form(const Eigen::MatrixBase<Derived>& v) const {
    require_dimension(v.size(), dimension(), "EllipsoidRegion::quadratic_form");
    const long p = dimension(), k = steps();
    ops::count(static_cast<std::uint64_t>(p * k + p + k));
    Scalar q = scale_ * v.squaredNorm();
    if (k > 0) {
      const Vector lv = factors_.transpose() * v;
      q -= lv.cwiseAbs2().dot(weights_);
    }
    return q;
  }

  Matrix to_dense() const {
    Matrix e = scale_ * Matrix::Identity(dimension(), dimension());
    if (steps() > 0) e -= factors_ * weights_.asDiagonal() * factors_.transpose();
    return e;
  }

  /// Smallest eigenvalue of E: s minus the top eigenvalue of D^{1/2} L'L D^{1/2}.
  Scalar min_eigenvalue() const {
    if (steps() == 0) return scale_;
    const Vector root = weights_.cwiseSqrt();
    const Matrix m = root.asDiagonal() * gram_ * root.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
    return scale_ - eig.eigenvalues().maxCoeff();
  }

  /// log det E via the matrix determinant lemma; NaN when E is not PD.
  Scalar log_det() const {
    if (is_point()) return -std::numeric_limits<Scalar>::infinity();
    const Scalar base = Scalar(dimension()) * std::log(scale_);
    if (steps() == 0) return base;
    const Vector root = weights_.cwiseSqrt();
    const Matrix m = Matrix::Identity(steps(), steps()) - root.asDiagonal() * gram_ * root.asDiagonal() / scale_;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return std::numeric_limits<Scalar>::quiet_NaN();
    return base + Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  /// E^{-1} v by the Woodbury identity with a k x k factorization.
  template <typename Derived>
  Vector solve(const Eigen::MatrixBase<Derived>& v) const {
    if (is_point()) throw NumericalError("EllipsoidRegion::solve on a degenerate point region");
    require_dimension(v.size(), dimension(), "EllipsoidRegion::solve");
    if (steps() == 0) return v / scale_;
    // E^{-1} = I/s + L (D^{-1} - L'L/s)^{-1} L' / s^2; the middle matrix is PD iff E is.
    const Matrix middle = Matrix(weights_.cwiseInverse().asDiagonal()) - gram_ / scale_;
    Eigen::LDLT<Matrix> ldlt(middle);
    const Vector lv = factors_.transpose() * v;
    return v / scale_ + factors_ * ldlt.solve(lv) / (scale_ * scale_);
  }

  /// (x - z)' E^{-1} (x - z); 0 or +inf for a point region.
  template <typename Derived>
  Scalar mahalanobis(const Eigen::MatrixBase<Derived>& x) const {
    const Vector d = x - center_;
    if (is_point()) return d.norm() == Scalar(0) ? Scalar(0) : std::numeric_limits<Scalar>::infinity();
    return d.dot(solve(d));
  }

  /// g'(x - z), or -inf when there is no cut.
  template <typename Derived>
  Scalar cut_value(const Eigen::MatrixBase<Derived>& x) const {
    if (!cut_) return -std::numeric_limits<Scalar>::infinity();
    return cut_->dot(x - center_);
  }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x, Scalar tol = Scalar(1e-9)) const {
    return mahalanobis(x) <= Scalar(1) + tol && cut_value(x) <= tol * (cut_ ? cut_->norm() : Scalar(1));
  }

 private:
  template <typename S, typename D>
  friend EllipsoidRegion<S> ellipsoid_step(const EllipsoidRegion<S>&, const Eigen::MatrixBase<D>&);

  Vector center_;
  Scalar scale_;
  Matrix factors_;
  Vector weights_;
  std::optional<Vector> cut_;
  Matrix gram_;
  Scalar initial_radius_ = Scalar(0);
};

/// One central-cut ellipsoid step with subgradient g, in O(pk):
///   z' = z - E g~ / (p+1),
///   E' = p^2/(p^2-1) (E - 2/(p+1) E g~ g~' E),   g~ = g / sqrt(g'E g).
/// In factored form s and D are rescaled and E g~ becomes a new column of L.
template <typename Scalar, typename Derived>
EllipsoidRegion<Scalar> ellipsoid_step(const EllipsoidRegion<Scalar>& region, const Eigen::MatrixBase<Derived>& g) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const long p = region.dimension();
  const long k = region.steps();
  require_dimension(g.size(), p, "ellipsoid_step");
  if (p < 2) throw std::invalid_argument("ellipsoid_step needs dimension >= 2");
  if (region.is_point()) throw std::invalid_argument("ellipsoid_step on a degenerate point region");

  const Vector eg = region.apply(g);
  const Scalar geg = g.dot(eg);
  ops::count(static_cast<std::uint64_t>(p));
  if (!(geg > Scalar(0)))
    throw NumericalError("ellipsoid_step: g'Eg = " + std::to_string(static_cast<double>(geg)) +
                         " is not positive (zero subgradient or E lost positive definiteness)");

  const Scalar pp = Scalar(p) * Scalar(p);
  const Scalar expand = pp / (pp - Scalar(1));
  const Vector u = eg / std::sqrt(geg);

  EllipsoidRegion<Scalar> next = region;
  next.cut_.reset();
  next.center_ = region.center_ - u / Scalar(p + 1);
  next.scale_ = expand * region.scale_;

  next.factors_.conservativeResize(p, k + 1);
  next.factors_.col(k) = u;
  next.weights_.conservativeResize(k + 1);
  next.weights_.head(k) *= expand;
  next.weights_(k) = expand * Scalar(2) / Scalar(p + 1);

  const Vector cross = region.factors_.transpose() * u;
  next.gram_.conservativeResize(k + 1, k + 1);
  next.gram_.topRightCorner(k, 1) = cross;
  next.gram_.bottomLeftCorner(1, k) = cross.transpose();
  next.gram_(k, k) = u.squaredNorm();
  ops::count(static_cast<std::uint64_t>(p * k + 3 * p + k));
  return next;
}

/// Runs the ellipsoid method on `prob` from the ball B(x0, r0) for `steps`
/// iterations, then attaches the subgradient at the final center as a cut.
/// Stops early when E is about to lose positive definiteness, and returns
/// the point region when the subgradient vanishes (the center is optimal).
template <typename Problem, typename Scalar, typename Derived>
EllipsoidRegion<Scalar> build_region(const Problem& prob, const Eigen::MatrixBase<Derived>& x0, Scalar r0,
                                     long steps) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (steps < 1) throw std::invalid_argument("build_region needs at least one step");
  if (!(r0 > Scalar(0))) throw std::invalid_argument("build_region needs a positive initial radius");
  require_dimension(x0.size(), dimension(prob), "build_region");

  EllipsoidRegion<Scalar> region = EllipsoidRegion<Scalar>::ball(Vector(x0), r0);
  for (long j = 0; j < steps; ++j) {
    const Vector g = subgradient(prob, region.center());
    if (g.squaredNorm() == Scalar(0)) return EllipsoidRegion<Scalar>::point(region.center(), r0);
    EllipsoidRegion<Scalar> next = ellipsoid_step(region, g);
    if (next.min_eigenvalue() < Scalar(1e-12) * next.scale()) break;
    region = std::move(next);
  }
  Vector g = subgradient(prob, region.center());
  if (g.squaredNorm() == Scalar(0)) return EllipsoidRegion<Scalar>::point(region.center(), r0);
  return region.with_cut(std::move(g));
}

template <typename Problem, typename Scalar>
EllipsoidRegion<Scalar> build_region(const Problem& prob, const BallRegion<Scalar>& ball, long steps) {
  return build_region(prob, ball.center, ball.radius, steps);
}

/// Precomputed support-function evaluator: returns [min a'x, max a'x] over
/// the region. With a cut g, the maximum of a'x is
///   a'z + sqrt(a'Ea)                            if g'Ea <= 0,
///   a'z + sqrt((a - nu g)'E(a - nu g)),  nu = g'Ea / g'Eg,   otherwise,
/// and (a - nu g)'E(a - nu g) = a'Ea - (g'Ea)^2 / g'Eg.
template <typename Scalar = double>
class LinearRange {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit LinearRange(const EllipsoidRegion<Scalar>& region) : region_(&region) {
    if (region.cut() && !region.is_point()) {
      cut_image_ = region.apply(*region.cut());
      cut_form_ = region.cut()->dot(cut_image_);
      if (!(cut_form_ > Scalar(0))) throw NumericalError("LinearRange: g'Eg is not positive");
      has_cut_ = true;
    }
  }

  explicit LinearRange(const BallRegion<Scalar>& ball) : ball_(&ball) {}

  template <typename Derived>
  std::pair<Scalar, Scalar> operator()(const Eigen::MatrixBase<Derived>& a) const {
    if (ball_) {
      require_dimension(a.size(), ball_->center.size(), "LinearRange");
      const Scalar az = a.dot(ball_->center);
      const Scalar spread = ball_->radius * a.norm();
      ops::count(static_cast<std::uint64_t>(2 * a.size()));
      return {az - spread, az + spread};
    }
    const auto& r = *region_;
    require_dimension(a.size(), r.dimension(), "LinearRange");
    const long p = r.dimension(), k = r.steps();
    const Scalar az = a.dot(r.center());
    if (r.is_point()) return {az, az};
    Scalar aea = r.scale() * a.squaredNorm();
    if (k > 0) aea -= (r.factors().transpose() * a).cwiseAbs2().dot(r.weights());
    Scalar gea = has_cut_ ? cut_image_.dot(a) : Scalar(0);
    ops::count(static_cast<std::uint64_t>(p * (k + 3) + 2 * k));
    return finish(az, aea, gea);
  }

  /// Range of a_i'x for row i of a design, exploiting sparse rows.
  std::pair<Scalar, Scalar> row(const Design<Scalar>& design, long i) const {
    if (ball_) {
      const Scalar az = design.row_dot(i, ball_->center);
      const Scalar spread = ball_->radius * std::sqrt(design.row_squared_norm(i));
      ops::count(static_cast<std::uint64_t>(2 * design.row_nonzeros(i)));
      return {az - spread, az + spread};
    }
    const auto& r = *region_;
    const long nnz = design.row_nonzeros(i), k = r.steps();
    const Scalar az = design.row_dot(i, r.center());
    if (r.is_point()) return {az, az};
    Scalar aea = r.scale() * design.row_squared_norm(i);
    if (k > 0) aea -= design.row_times(i, r.factors()).cwiseAbs2().dot(r.weights());
    const Scalar gea = has_cut_ ? design.row_dot(i, cut_image_) : Scalar(0);
    ops::count(static_cast<std::uint64_t>(nnz * (k + 3) + 2 * k));
    return finish(az, aea, gea);
  }

 private:
  std::pair<Scalar, Scalar> finish(Scalar az, Scalar aea, Scalar gea) const {
    Scalar up = aea, down = aea;
    if (has_cut_) {
      const Scalar reduced = aea - gea * gea / cut_form_;
      if (gea > Scalar(0)) up = reduced;
      if (gea < Scalar(0)) down = reduced;
    }
    return {az - std::sqrt(std::max(down, Scalar(0))), az + std::sqrt(std::max(up, Scalar(0)))};
  }

  const EllipsoidRegion<Scalar>* region_ = nullptr;
  const BallRegion<Scalar>* ball_ = nullptr;
  Vector cut_image_;
  Scalar cut_form_ = Scalar(0);
  bool has_cut_ = false;
};

/// max of a'x - offset over the region (including its cut, if any).
template <typename Scalar, typename Derived>
Scalar region_max_linear(const EllipsoidRegion<Scalar>& region, const Eigen::MatrixBase<Derived>& a, Scalar offset) {
  return LinearRange<Scalar>(region)(a).second - offset;
}

template <typename Scalar, typename Derived>
Scalar region_max_linear(const BallRegion<Scalar>& ball, const Eigen::MatrixBase<Derived>& a, Scalar offset) {
  return LinearRange<Scalar>(ball)(a).second - offset;
}

}  // namespace safescreen
