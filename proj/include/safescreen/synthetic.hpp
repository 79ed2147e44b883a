#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "dataset.hpp"
#include "losses.hpp"

namespace safescreen {

template <typename Scalar = double>
struct SyntheticData {
  Dataset<Scalar> data;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> truth;
};

namespace detail {

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> uniform_matrix(long n, long p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a(n, p);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < p; ++j) a(i, j) = Scalar(unif(rng));
  return a;
}

// `sparsity` nonzero coefficients in [-1, 1] at random positions.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sparse_truth(long p, long sparsity, std::mt19937_64& rng) {
  std::vector<long> idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), 0L);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(p);
  for (long j = 0; j < sparsity; ++j) x(idx[static_cast<std::size_t>(j)]) = Scalar(unif(rng));
  return x;
}

}  // namespace detail

/// b = A x + eps with A uniform on [-1, 1], x with `sparsity` nonzeros in
/// [-1, 1] and eps ~ N(0, sigma^2).
template <typename Scalar = double>
SyntheticData<Scalar> gen_synthetic_regression(long n = 100, long p = 10, long sparsity = 10, double sigma = 0.01,
                                               std::uint64_t seed = 0) {
  if (n < 1 || p < 1) throw std::invalid_argument("gen_synthetic_regression: n and p must be positive");
  if (sparsity < 0 || sparsity > p) throw std::invalid_argument("gen_synthetic_regression: need 0 <= sparsity <= p");
  if (!(sigma >= 0.0)) throw std::invalid_argument("gen_synthetic_regression: sigma must be nonnegative");
  std::mt19937_64 rng(seed);
  auto a = detail::uniform_matrix<Scalar>(n, p, rng);
  auto x = detail::sparse_truth<Scalar>(p, sparsity, rng);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b = a * x;
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (long i = 0; i < n; ++i) b(i) += Scalar(noise(rng));
  }
  return {Dataset<Scalar>(Design<Scalar>(std::move(a)), std::move(b), Task::Regression), std::move(x)};
}

/// b = sign(A w + eps) with a dense w in [-1, 1]^p, eps ~ N(0, sigma^2), and
/// each label flipped independently with probability `flip`.
template <typename Scalar = double>
SyntheticData<Scalar> gen_synthetic_classification(long n = 1000, long p = 50, double sigma = 0.1, double flip = 0.0,
                                                   std::uint64_t seed = 0) {
  if (n < 1 || p < 1) throw std::invalid_argument("gen_synthetic_classification: n and p must be positive");
  if (!(sigma >= 0.0) || !(flip >= 0.0 && flip <= 1.0))
    throw std::invalid_argument("gen_synthetic_classification: need sigma >= 0 and flip in [0, 1]");
  std::mt19937_64 rng(seed);
  auto a = detail::uniform_matrix<Scalar>(n, p, rng);
  auto w = detail::sparse_truth<Scalar>(p, p, rng);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> score = a * w;
  std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
  std::bernoulli_distribution flipper(flip);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b(n);
  for (long i = 0; i < n; ++i) {
    const Scalar s = score(i) + (sigma > 0.0 ? Scalar(noise(rng)) : Scalar(0));
    Scalar label = s >= Scalar(0) ? Scalar(1) : Scalar(-1);
    if (flip > 0.0 && flipper(rng)) label = -label;
    b(i) = label;
  }
  return {Dataset<Scalar>(Design<Scalar>(std::move(a)), std::move(b), Task::Classification), std::move(w)};
}

/// Toy interval regression: uniform features, targets b = a_1 + eps. The
/// square-distance loss with threshold mu then fits intervals [b - mu, b + mu].
template <typename Scalar = double>
SyntheticData<Scalar> gen_interval_regression(long n = 20, long p = 2, double sigma = 0.05, std::uint64_t seed = 0) {
  if (n < 1 || p < 1) throw std::invalid_argument("gen_interval_regression: n and p must be positive");
  if (!(sigma >= 0.0)) throw std::invalid_argument("gen_interval_regression: sigma must be nonnegative");
  std::mt19937_64 rng(seed);
  auto a = detail::uniform_matrix<Scalar>(n, p, rng);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> truth = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(p);
  truth(0) = Scalar(1);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b = a * truth;
  std::mt19937_64 noise_rng(seed + 1);
  std::normal_distribution<double> noise(0.0, sigma);
  for (long i = 0; i < n; ++i) b(i) += Scalar(noise(noise_rng));
  return {Dataset<Scalar>(Design<Scalar>(std::move(a)), std::move(b), Task::Regression), std::move(truth)};
}

}  // namespace safescreen
