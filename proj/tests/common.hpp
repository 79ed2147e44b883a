#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>
#include <cmath>
#include <algorithm>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include <safescreen/safescreen.hpp>

namespace testutil {

using namespace safescreen;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Mat gaussian(long rows, long cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat m(rows, cols);
  for (long j = 0; j < cols; ++j)
    for (long i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

inline Vec gaussian_vector(long n, std::mt19937_64& rng, double scale = 1.0) {
  return gaussian(n, 1, rng, scale).col(0);
}

inline Vec signs(long n, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  Vec b(n);
  for (long i = 0; i < n; ++i) b(i) = coin(rng) ? 1.0 : -1.0;
  return b;
}

/// Random instance for a loss and penalty; classification labels follow a
/// noisy linear rule so the problem is not trivial.
inline ErmProblem<double> random_problem(LossKind kind, double mu, PenaltyKind pen, double lambda, long n, long p,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Mat a = gaussian(n, p, rng);
  const Vec w = gaussian_vector(p, rng);
  Vec b = a * w + gaussian_vector(n, rng, 0.3);
  Task task = task_of(kind);
  if (task == Task::Classification) b = b.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
  return ErmProblem<double>(Dataset<double>(Design<double>(a), b, task), SafeLoss<double>(kind, mu),
                            Penalty<double>(pen, lambda));
}

inline Eigen::SparseMatrix<double, Eigen::RowMajor, long> sparsify(const Mat& dense) {
  Eigen::SparseMatrix<double, Eigen::RowMajor, long> s = dense.sparseView();
  s.makeCompressed();
  return s;
}

inline Mat random_pd(long p, std::mt19937_64& rng) {
  const Mat m = gaussian(p, p, rng);
  return m * m.transpose() + 0.1 * Mat::Identity(p, p);
}

// Region from a dense PD matrix: E = s I - V diag(s - w) V' with s above
// the top eigenvalue.
inline EllipsoidRegion<double> region_from_dense(const Vec& z, const Mat& e, std::optional<Vec> cut = {}) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(e);
  const double s = eig.eigenvalues().maxCoeff() * 1.5;
  const Vec w = (s - eig.eigenvalues().array()).matrix();
  return EllipsoidRegion<double>(z, s, eig.eigenvectors(), w, std::move(cut));
}

inline const Grid<double> z_grid{-12.0, 12.0, 1e-3, 2};

inline double box(double y) { return std::abs(y) <= 1.0 ? 0.0 : std::numeric_limits<double>::infinity(); }

// Base function and dual regularizer whose smoothed infimal convolution
// gives each safe loss.
inline double safe_oracle(LossKind kind, double mu, double t) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (kind) {
    case LossKind::SquareDistance:
      return inf_conv_oracle([](double z) { return 0.5 * z * z; }, box, mu, t, z_grid);
    case LossKind::Hinge:
      return inf_conv_oracle([](double z) { return std::max(1.0 - z, 0.0); }, box, mu, t, z_grid);
    case LossKind::SquaredHinge:
      return inf_conv_oracle([](double z) { return 0.5 * std::pow(std::max(1.0 - z, 0.0), 2); }, box, mu, t, z_grid);
    case LossKind::Huber:
      return inf_conv_oracle([](double z) { return std::abs(z); }, [](double y) { return 0.5 * y * y; }, mu, t,
                             z_grid);
    case LossKind::SafeLogistic: {
      // sup_s s t - g*(s) - mu |s| with g*(s) = (1+s) log(1+s) on [-1, 0].
      auto h = [mu](double s) {
        if (s < -1.0 || s > 0.0) return inf;
        const double v = 1.0 + s;
        return (v > 0.0 ? v * std::log(v) : 0.0) + mu * std::abs(s);
      };
      return grid_conjugate(h, t, Grid<double>{-1.5, 0.5, 1e-4, 2});
    }
    default:
      return std::numeric_limits<double>::quiet_NaN();
  }
}

inline std::vector<double> sample_points(int count, double lo, double hi, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(u(rng));
  return out;
}

/// Dense E = s I - L D L' updated with the textbook formula, for comparison
/// against the factored region.
struct DenseEllipsoid {
  Vec z;
  Mat e;

  void step(const Vec& g) {
    const double p = static_cast<double>(z.size());
    const Vec eg = e * g;
    const Vec u = eg / std::sqrt(g.dot(eg));
    z -= u / (p + 1.0);
    e = p * p / (p * p - 1.0) * (e - 2.0 / (p + 1.0) * u * u.transpose());
  }
};

struct BruteForce {
  double best = -std::numeric_limits<double>::infinity();
  double worst_excess = -std::numeric_limits<double>::infinity();  // max of a'x - bound over samples
};

/// Random search for max a'x over {x : (x-z)'E^{-1}(x-z) <= 1, g'(x-z) <= 0}.
/// Points are drawn on the boundary (sphere directions folded onto the cut
/// plane when they violate it) and in the interior; the second half of the
/// budget perturbs the incumbent with a shrinking radius.
inline BruteForce brute_force_max(const Vec& z, const Mat& e, const std::optional<Vec>& cut, const Vec& a,
                                  long samples, double bound, std::mt19937_64& rng) {
  // Fixed-capacity vectors keep the inner loop off the heap.
  using Small = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 8, 1>;
  const long p = z.size();
  if (p > 8) throw std::invalid_argument("brute_force_max: p <= 8 only");
  const Mat l = Eigen::LLT<Mat>(e).matrixL();
  const Small c = l.transpose() * a;
  const Small h = cut ? Small(l.transpose() * *cut) : Small(Small::Zero(p));
  const double hh = h.squaredNorm();
  const double az = a.dot(z);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Folds u into the half-space; boundary samples stay on the unit sphere.
  // A folded vector can be tiny and dominated by rounding, so it is folded
  // again after normalizing; the second fold only shrinks it.
  auto fold = [&](Small& u) {
    const double hu = h.dot(u);
    if (cut && hu > 0.0) u -= hu / hh * h;
  };
  auto feasible = [&](Small& u, bool boundary) {
    fold(u);
    const double nu = u.norm();
    if (nu < 1e-12) {
      u.setZero();
    } else if (boundary || nu > 1.0) {
      u /= nu;
      fold(u);
    }
  };
  BruteForce out;
  Small best_u = Small::Zero(p);
  auto record = [&](const Small& u) {
    const double v = az + c.dot(u);
    out.worst_excess = std::max(out.worst_excess, v - bound);
    if (v > out.best) {
      out.best = v;
      best_u = u;
    }
  };
  const long global = samples / 2;
  Small u(p);
  for (long s = 0; s < global; ++s) {
    for (long j = 0; j < p; ++j) u(j) = g(rng);
    u /= u.norm();
    const bool interior = s % 10 == 0;
    if (interior) u *= std::pow(unif(rng), 1.0 / static_cast<double>(p));
    feasible(u, !interior);
    record(u);
  }
  double radius = 0.1;
  for (long s = global; s < samples; ++s) {
    u = best_u;
    for (long j = 0; j < p; ++j) u(j) += radius * g(rng);
    feasible(u, true);
    record(u);
    if ((s - global) % 1000 == 999) radius *= 0.7;
  }
  return out;
}

}  // namespace testutil
