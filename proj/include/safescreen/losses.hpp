#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace safescreen {

enum class Task { Regression, Classification };

enum class LossKind {
  SquareDistance,  // 1/2 [|t| - mu]_+^2, the interval-regression loss
  SafeLogistic,    // exp(t + mu - 1) - (t + mu), zero once t >= 1 - mu
  Hinge,           // [1 - t - mu]_+
  SquaredHinge,    // 1/2 [1 - t - mu]_+^2
  Huber,
  PlainSquare,
  PlainLogistic
};

/// Closed interval [lo, hi]; either end may be infinite.
template <typename Scalar>
struct Interval {
  Scalar lo;
  Scalar hi;

  bool contains(Scalar t) const { return lo <= t && t <= hi; }
  bool interior_contains(Scalar t) const { return lo < t && t < hi; }
  bool degenerate() const { return !(lo < hi); }
};

inline LossKind parse_loss_kind(std::string_view id) {
  if (id == "sqdist") return LossKind::SquareDistance;
  if (id == "safelog") return LossKind::SafeLogistic;
  if (id == "hinge") return LossKind::Hinge;
  if (id == "sqhinge") return LossKind::SquaredHinge;
  if (id == "huber") return LossKind::Huber;
  if (id == "square") return LossKind::PlainSquare;
  if (id == "logistic") return LossKind::PlainLogistic;
  throw std::invalid_argument("unknown loss id '" + std::string(id) + "'");
}

inline std::string_view loss_id(LossKind kind) {
  switch (kind) {
    case LossKind::SquareDistance: return "sqdist";
    case LossKind::SafeLogistic: return "safelog";
    case LossKind::Hinge: return "hinge";
    case LossKind::SquaredHinge: return "sqhinge";
    case LossKind::Huber: return "huber";
    case LossKind::PlainSquare: return "square";
    case LossKind::PlainLogistic: return "logistic";
  }
  return "?";
}

inline Task task_of(LossKind kind) {
  switch (kind) {
    case LossKind::SquareDistance:
    case LossKind::Huber:
    case LossKind::PlainSquare:
      return Task::Regression;
    default:
      return Task::Classification;
  }
}

namespace detail {
template <typename Scalar>
Scalar xlogx(Scalar x) {
  return x > Scalar(0) ? x * std::log(x) : Scalar(0);
}
}  // namespace detail

/// Scalar loss phi applied to a margin t. Regression losses see t = a'x - b,
/// classification losses see t = b a'x. Immutable once built.
template <typename Scalar = double>
class SafeLoss {
 public:
  SafeLoss(LossKind kind, Scalar mu) : kind_(kind), mu_(mu) {
    if (!(mu >= Scalar(0))) throw std::invalid_argument("loss threshold mu must be nonnegative");
    if (kind == LossKind::Huber && !(mu > Scalar(0)))
      throw std::invalid_argument("huber loss needs mu > 0");
  }

  LossKind kind() const { return kind_; }
  Scalar mu() const { return mu_; }
  Task task() const { return task_of(kind_); }

  Scalar value(Scalar t) const {
    using std::abs;
    switch (kind_) {
      case LossKind::SquareDistance: {
        const Scalar d = std::max(abs(t) - mu_, Scalar(0));
        return Scalar(0.5) * d * d;
      }
      case LossKind::SafeLogistic: {
        const Scalar u = t + mu_ - Scalar(1);
        return u <= Scalar(0) ? std::expm1(u) - u : Scalar(0);
      }
      case LossKind::Hinge:
        return std::max(Scalar(1) - mu_ - t, Scalar(0));
      case LossKind::SquaredHinge: {
        const Scalar d = std::max(Scalar(1) - mu_ - t, Scalar(0));
        return Scalar(0.5) * d * d;
      }
      case LossKind::Huber:
        return abs(t) <= mu_ ? t * t / (Scalar(2) * mu_) : abs(t) - mu_ / Scalar(2);
      case LossKind::PlainSquare:
        return Scalar(0.5) * t * t;
      case LossKind::PlainLogistic:
        return t > Scalar(0) ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
    }
    return std::numeric_limits<Scalar>::quiet_NaN();
  }

  /// phi'(t). The hinge kink returns 0 (the flat-side one-sided derivative).
  Scalar derivative(Scalar t) const {
    using std::abs;
    switch (kind_) {
      case LossKind::SquareDistance: {
        const Scalar d = std::max(abs(t) - mu_, Scalar(0));
        return t < Scalar(0) ? -d : d;
      }
      case LossKind::SafeLogistic: {
        const Scalar u = t + mu_ - Scalar(1);
        return u <= Scalar(0) ? std::expm1(u) : Scalar(0);
      }
      case LossKind::Hinge:
        return t < Scalar(1) - mu_ ? Scalar(-1) : Scalar(0);
      case LossKind::SquaredHinge:
        return -std::max(Scalar(1) - mu_ - t, Scalar(0));
      case LossKind::Huber:
        return std::clamp(t / mu_, Scalar(-1), Scalar(1));
      case LossKind::PlainSquare:
        return t;
      case LossKind::PlainLogistic:
        return Scalar(-1) / (Scalar(1) + std::exp(t));
    }
    return std::numeric_limits<Scalar>::quiet_NaN();
  }

  /// Fenchel conjugate phi*(s); +inf outside its domain.
  Scalar conjugate(Scalar s) const {
    using std::abs;
    constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
    const bool in_unit_neg = s >= Scalar(-1) && s <= Scalar(0);
    switch (kind_) {
      case LossKind::SquareDistance:
        return Scalar(0.5) * s * s + mu_ * abs(s);
      case LossKind::SafeLogistic:
        return in_unit_neg ? detail::xlogx(Scalar(1) + s) - mu_ * s : inf;
      case LossKind::Hinge:
        return in_unit_neg ? (Scalar(1) - mu_) * s : inf;
      case LossKind::SquaredHinge:
        return s <= Scalar(0) ? (Scalar(1) - mu_) * s + Scalar(0.5) * s * s : inf;
      case LossKind::Huber:
        return abs(s) <= Scalar(1) ? Scalar(0.5) * mu_ * s * s : inf;
      case LossKind::PlainSquare:
        return Scalar(0.5) * s * s;
      case LossKind::PlainLogistic:
        return in_unit_neg ? detail::xlogx(-s) + detail::xlogx(Scalar(1) + s) : inf;
    }
    return inf;
  }

  /// Closed domain of the conjugate, used to project dual candidates.
  Interval<Scalar> conjugate_domain() const {
    constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
    switch (kind_) {
      case LossKind::SquareDistance:
      case LossKind::PlainSquare:
        return {-inf, inf};
      case LossKind::SquaredHinge:
        return {-inf, Scalar(0)};
      case LossKind::Huber:
        return {Scalar(-1), Scalar(1)};
      default:
        return {Scalar(-1), Scalar(0)};
    }
  }

  /// Interval on which the loss vanishes identically. Degenerate for
  /// losses that are not safe.
  Interval<Scalar> flat_interval() const {
    constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
    switch (kind_) {
      case LossKind::SquareDistance:
        return {-mu_, mu_};
      case LossKind::SafeLogistic:
      case LossKind::Hinge:
      case LossKind::SquaredHinge:
        return {Scalar(1) - mu_, inf};
      case LossKind::Huber:
      case LossKind::PlainSquare:
        return {Scalar(0), Scalar(0)};
      case LossKind::PlainLogistic:
        return {inf, inf};
    }
    return {inf, inf};
  }

  bool is_safe() const { return !flat_interval().degenerate(); }

  bool is_smooth() const { return kind_ != LossKind::Hinge; }

  /// Lipschitz constant of phi' (infinite for the hinge).
  Scalar smoothness() const {
    switch (kind_) {
      case LossKind::Hinge: return std::numeric_limits<Scalar>::infinity();
      case LossKind::Huber: return Scalar(1) / mu_;
      case LossKind::PlainLogistic: return Scalar(0.25);
      default: return Scalar(1);
    }
  }

 private:
  LossKind kind_;
  Scalar mu_;
};

enum class PenaltyKind { L1, HalfSquaredL2 };

inline PenaltyKind parse_penalty_kind(std::string_view id) {
  if (id == "l1") return PenaltyKind::L1;
  if (id == "l2") return PenaltyKind::HalfSquaredL2;
  throw std::invalid_argument("unknown penalty id '" + std::string(id) + "'");
}

inline std::string_view penalty_id(PenaltyKind kind) {
  return kind == PenaltyKind::L1 ? "l1" : "l2";
}

/// lambda * R(x) with R the l1 norm or half the squared l2 norm.
/// value() and conjugate() return R and R* without the lambda factor.
template <typename Scalar = double>
class Penalty {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Penalty(PenaltyKind kind, Scalar lambda) : kind_(kind), lambda_(lambda) {
    if (!(lambda >= Scalar(0))) throw std::invalid_argument("penalty strength must be nonnegative");
  }

  PenaltyKind kind() const { return kind_; }
  Scalar lambda() const { return lambda_; }
  Penalty with_lambda(Scalar lambda) const { return Penalty(kind_, lambda); }

  /// Modulus of strong convexity of lambda * R.
  Scalar strong_convexity() const { return kind_ == PenaltyKind::HalfSquaredL2 ? lambda_ : Scalar(0); }

  template <typename Derived>
  Scalar value(const Eigen::MatrixBase<Derived>& x) const {
    return kind_ == PenaltyKind::L1 ? x.template lpNorm<1>() : Scalar(0.5) * x.squaredNorm();
  }

  /// prox of step * lambda * R.
  template <typename Derived>
  Vector prox(const Eigen::MatrixBase<Derived>& x, Scalar step) const {
    if (!(step > Scalar(0))) throw std::invalid_argument("prox step must be positive");
    const Scalar h = lambda_ * step;
    if (kind_ == PenaltyKind::L1) {
      return x.unaryExpr([h](Scalar v) {
        return v > h ? v - h : (v < -h ? v + h : Scalar(0));
      });
    }
    return x / (Scalar(1) + h);
  }

  /// R*(y): indicator of the unit l_inf ball for l1, 1/2||y||^2 for l2.
  template <typename Derived>
  Scalar conjugate(const Eigen::MatrixBase<Derived>& y) const {
    if (kind_ == PenaltyKind::L1) {
      if (y.size() == 0) return Scalar(0);
      return y.cwiseAbs().maxCoeff() <= Scalar(1) + feasibility_slack
                 ? Scalar(0)
                 : std::numeric_limits<Scalar>::infinity();
    }
    return Scalar(0.5) * y.squaredNorm();
  }

  /// Minimum-norm element of lambda * dR(x); the l1 subgradient is 0 at 0.
  template <typename Derived>
  Vector subgradient(const Eigen::MatrixBase<Derived>& x) const {
    if (kind_ == PenaltyKind::L1) {
      return lambda_ * x.unaryExpr([](Scalar v) {
        return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
      });
    }
    return lambda_ * x;
  }

  static constexpr Scalar feasibility_slack = Scalar(1e-12);

 private:
  PenaltyKind kind_;
  Scalar lambda_;
};

}  // namespace safescreen
