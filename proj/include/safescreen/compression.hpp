#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dataset.hpp"
#include "erm.hpp"
#include "region.hpp"
#include "screening.hpp"
#include "solver.hpp"

namespace safescreen {

/// Sample indices by descending score, ties broken by index.
template <typename Scalar>
std::vector<long> rank_samples(const ScreeningReport<Scalar>& report) {
  const auto& s = report.scores;
  for (long i = 0; i < s.size(); ++i)
    if (!std::isfinite(s(i))) throw std::invalid_argument("rank_samples: non-finite score at " + std::to_string(i));
  std::vector<long> order(static_cast<std::size_t>(s.size()));
  std::iota(order.begin(), order.end(), 0L);
  std::stable_sort(order.begin(), order.end(), [&s](long a, long b) { return s(a) > s(b); });
  return order;
}

enum class CompressionMethod { Screening, Margin, Random };

inline const char* method_id(CompressionMethod m) {
  switch (m) {
    case CompressionMethod::Screening: return "screening";
    case CompressionMethod::Margin: return "margin";
    case CompressionMethod::Random: return "random";
  }
  return "?";
}

inline CompressionMethod parse_method(const std::string& id) {
  if (id == "screening") return CompressionMethod::Screening;
  if (id == "margin") return CompressionMethod::Margin;
  if (id == "random") return CompressionMethod::Random;
  throw std::invalid_argument("unknown compression method '" + id + "'");
}

enum class MetricKind { Accuracy, R2 };

template <typename Scalar = double>
struct CompressionOptions {
  std::vector<double> fractions{0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<CompressionMethod> methods{CompressionMethod::Screening, CompressionMethod::Margin,
                                         CompressionMethod::Random};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double test_fraction = 0.2;
  long steps = 20;
  double early_epochs = 2.0;  // budget of the approximation used for ranking
  SolveOptions<Scalar> solve{Scalar(1e-8), 2e3, 10, Scalar(1)};
};

struct CompressionCell {
  double fraction = 0.0;
  CompressionMethod method = CompressionMethod::Random;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation across seeds
  long n_train = 0;  // samples kept for the refit
  long runs = 0;
};

struct CompressionCurve {
  MetricKind metric = MetricKind::Accuracy;
  std::vector<double> fractions;
  std::vector<CompressionCell> cells;
  std::vector<std::string> warnings;

  const CompressionCell* find(double fraction, CompressionMethod method) const {
    for (const auto& c : cells)
      if (c.fraction == fraction && c.method == method) return &c;
    return nullptr;
  }
};

/// Test accuracy of sign(a'x) or coefficient of determination.
template <typename Scalar, typename Derived>
double evaluate_metric(const Dataset<Scalar>& test, const Eigen::MatrixBase<Derived>& x) {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pred = test.design().multiply(x);
  const auto& b = test.labels();
  if (test.task() == Task::Classification) {
    long hits = 0;
    for (long i = 0; i < b.size(); ++i) hits += (pred(i) >= Scalar(0) ? Scalar(1) : Scalar(-1)) == b(i) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(b.size());
  }
  const Scalar mean = b.mean();
  const Scalar ss_tot = (b.array() - mean).square().sum();
  const Scalar ss_res = (pred - b).squaredNorm();
  return ss_tot > Scalar(0) ? static_cast<double>(Scalar(1) - ss_res / ss_tot) : 0.0;
}

/// Deletes growing fractions of the training split in the order given by
/// each method, refits on the rest and scores the held-out split.
///
/// Screening ranks by scores over an ellipsoid around the trained model;
/// the margin baseline ranks by the margins of an early iterate; random
/// deletion uses one permutation per seed, so deleted sets are nested.
/// Refits keep the training-set normalization, so deleting samples that are
/// flat at the optimum leaves the model unchanged.
template <typename Scalar>
CompressionCurve compression_curve(const Dataset<Scalar>& data, const SafeLoss<Scalar>& loss,
                                   const Penalty<Scalar>& penalty, const CompressionOptions<Scalar>& opt) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (opt.seeds.size() < 3) throw std::invalid_argument("compression_curve needs at least 3 seeds");
  for (std::size_t i = 0; i < opt.fractions.size(); ++i) {
    const double f = opt.fractions[i];
    if (!(f >= 0.0 && f <= 0.95)) throw std::invalid_argument("compression fractions must lie in [0, 0.95]");
    if (i > 0 && !(f > opt.fractions[i - 1])) throw std::invalid_argument("compression fractions must increase");
  }
  if (!(opt.test_fraction > 0.0 && opt.test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must lie in (0, 1)");

  CompressionCurve curve;
  curve.metric = data.task() == Task::Classification ? MetricKind::Accuracy : MetricKind::R2;
  curve.fractions = opt.fractions;
  const long n = data.samples();
  const long n_test = std::max(1L, static_cast<long>(std::lround(opt.test_fraction * static_cast<double>(n))));
  const long n_train = n - n_test;
  if (n_train < 2) throw std::invalid_argument("compression_curve: training split is too small");

  // metric[f][m] collects one value per seed.
  std::vector<std::vector<std::vector<double>>> values(
      opt.fractions.size(), std::vector<std::vector<double>>(opt.methods.size()));
  std::vector<bool> skipped(opt.fractions.size(), false);

  for (std::uint64_t seed : opt.seeds) {
    std::mt19937_64 rng(seed);
    std::vector<long> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0L);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<long> train_idx(perm.begin(), perm.begin() + n_train);
    std::vector<long> test_idx(perm.begin() + n_train, perm.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    const auto train = std::make_shared<const Dataset<Scalar>>(data.select(train_idx));
    const Dataset<Scalar> test = data.select(test_idx);
    const ErmProblem<Scalar> prob(train, loss, penalty);
    const Vector zero = Vector::Zero(prob.features());

    SolveOptions<Scalar> early = opt.solve;
    early.max_epochs = opt.early_epochs;
    const Vector x_early = solve(prob, zero, early).x;

    std::vector<std::vector<long>> orders(opt.methods.size());
    for (std::size_t m = 0; m < opt.methods.size(); ++m) {
      switch (opt.methods[m]) {
        case CompressionMethod::Screening: {
          // Region around the trained model. Without strong convexity the
          // radius sqrt(2 gap / lambda) is a ranking heuristic, not a certificate.
          const Vector x_ref = solve(prob, x_early, opt.solve).x;
          const Scalar gap = duality_gap(prob, x_ref);
          const Scalar kappa = prob.strong_convexity() > Scalar(0) ? prob.strong_convexity() : prob.lambda();
          const Scalar r0 = std::isfinite(gap) ? std::sqrt(Scalar(2) * gap / kappa) : Scalar(1);
          const auto region = r0 > Scalar(0) ? build_region(prob, x_ref, r0, opt.steps)
                                             : EllipsoidRegion<Scalar>::point(x_ref);
          orders[m] = rank_samples(screen(prob, region));
          break;
        }
        case CompressionMethod::Margin:
          orders[m] = rank_samples(screen(prob, EllipsoidRegion<Scalar>::point(x_early)));
          break;
        case CompressionMethod::Random: {
          std::vector<long> order(static_cast<std::size_t>(n_train));
          std::iota(order.begin(), order.end(), 0L);
          std::mt19937_64 del_rng(seed ^ 0x9e3779b97f4a7c15ULL);
          std::shuffle(order.begin(), order.end(), del_rng);
          orders[m] = std::move(order);
          break;
        }
      }
    }

    for (std::size_t f = 0; f < opt.fractions.size(); ++f) {
      const long removed = static_cast<long>(std::floor(opt.fractions[f] * static_cast<double>(n_train)));
      const long kept = n_train - removed;
      if (2 * kept < prob.features()) {
        skipped[f] = true;
        continue;
      }
      for (std::size_t m = 0; m < opt.methods.size(); ++m) {
        std::vector<long> keep(orders[m].begin() + removed, orders[m].end());
        std::sort(keep.begin(), keep.end());
        const auto refit = solve(prob.restrict(keep), zero, opt.solve);
        values[f][m].push_back(evaluate_metric(test, refit.x));
      }
    }
  }

  for (std::size_t f = 0; f < opt.fractions.size(); ++f) {
    if (skipped[f]) {
      curve.warnings.push_back("fraction " + std::to_string(opt.fractions[f]) +
                               " skipped: fewer than p/2 training samples remain");
      continue;
    }
    const long removed = static_cast<long>(std::floor(opt.fractions[f] * static_cast<double>(n_train)));
    for (std::size_t m = 0; m < opt.methods.size(); ++m) {
      const auto& v = values[f][m];
      CompressionCell cell;
      cell.fraction = opt.fractions[f];
      cell.method = opt.methods[m];
      cell.n_train = n_train - removed;
      cell.runs = static_cast<long>(v.size());
      cell.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - cell.mean) * (x - cell.mean);
      cell.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      curve.cells.push_back(cell);
    }
  }
  return curve;
}

}  // namespace safescreen
