#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/QR>

#include "common.hpp"

using namespace testutil;

TEST_CASE("gram matrices") {
  std::mt19937_64 rng(1);
  const Mat q = Eigen::HouseholderQR<Mat>(gaussian(5, 5, rng)).householderQ();
  const Dataset<double> ortho(Design<double>(q), Vec::Zero(5), Task::Regression);
  CHECK((gram_matrix(ortho, Kernel::linear()) - Mat::Identity(5, 5)).norm() <= 1e-12);

  Mat a(3, 2);
  a << 0, 0, 1, 0, 0, 0;
  const Dataset<double> d(Design<double>(a), Vec::Zero(3), Task::Regression);
  const Mat k = gram_matrix(d, Kernel::rbf(1.0));
  CHECK(k(0, 2) == 1.0);
  CHECK(k(0, 1) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  CHECK(k.diagonal() == Vec::Ones(3));
  const Mat poly = gram_matrix(d, Kernel::polynomial(2, 1.0));
  CHECK(poly(1, 1) == doctest::Approx(4.0));
  CHECK_THROWS_AS(Kernel::rbf(0.0), std::invalid_argument);
  CHECK_THROWS_AS(Kernel::polynomial(0, 1.0), std::invalid_argument);
}

TEST_CASE("gram problems reject invalid matrices") {
  const SafeLoss<double> loss(LossKind::SquareDistance, 0.1);
  Mat asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  CHECK_THROWS_AS(GramProblem<double>(asym, Vec::Zero(2), loss, 0.1), std::invalid_argument);
  Mat indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(GramProblem<double>(indefinite, Vec::Zero(2), loss, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(GramProblem<double>(Mat::Identity(2, 2), Vec::Zero(2), loss, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(GramProblem<double>(Mat::Identity(2, 2), Vec::Zero(3), loss, 0.1), DimensionError);
  CHECK_THROWS_AS(GramProblem<double>(Mat::Identity(2, 2), Vec::Zero(2), SafeLoss<double>(LossKind::SquaredHinge, 0.1), 0.1),
                  std::invalid_argument);
  // Large matrices go through the iterative eigenvalue estimate.
  std::mt19937_64 rng(2);
  const Mat g = gaussian(40, 3, rng);
  Mat low_rank = g * g.transpose();
  CHECK(smallest_eigenvalue(low_rank, 10) == doctest::Approx(0.0).scale(1e-6 * low_rank.norm()));
  low_rank(0, 0) -= 50.0;
  CHECK(smallest_eigenvalue(low_rank, 10) < -1.0);
}

TEST_CASE("kernel gradient matches finite differences") {
  std::mt19937_64 rng(3);
  auto synth = gen_synthetic_classification<double>(12, 3, 0.1, 0.0, 3);
  const Mat k = gram_matrix(synth.data, Kernel::rbf(0.5));
  const GramProblem<double> prob(k, synth.data.labels(), SafeLoss<double>(LossKind::SafeLogistic, 0.3), 0.05);
  const Vec alpha = gaussian_vector(12, rng, 0.3);
  const Vec g = subgradient(prob, alpha);
  for (long j = 0; j < 12; ++j) {
    Vec ap = alpha, am = alpha;
    ap(j) += 1e-6;
    am(j) -= 1e-6;
    CHECK(std::abs((primal(prob, ap) - primal(prob, am)) / 2e-6 - g(j)) <= 1e-6);
  }
}

TEST_CASE("identity gram reproduces the linear screen") {
  std::mt19937_64 rng(4);
  for (int r = 0; r < 5; ++r) {
    const long n = 15;
    const Vec b = gaussian_vector(n, rng, 0.3);
    const SafeLoss<double> loss(LossKind::SquareDistance, 0.2);
    const GramProblem<double> kp(Mat::Identity(n, n), b, loss, 0.05);
    // alpha'I alpha = 2 * (1/2 ||x||^2), so the linear lambda doubles.
    const ErmProblem<double> lp(Dataset<double>(Design<double>(Mat(Mat::Identity(n, n))), b, Task::Regression), loss,
                                Penalty<double>(PenaltyKind::HalfSquaredL2, 0.1));
    const Vec x0 = gaussian_vector(n, rng, 0.1);
    const auto rk = build_region(kp, x0, 1.0, 5);
    const auto rl = build_region(lp, x0, 1.0, 5);
    CHECK((rk.center() - rl.center()).norm() == 0.0);
    const auto sk = screen_kernel(kp, rk);
    const auto sl = screen(lp, rl);
    CHECK(sk.screened == sl.screened);
    CHECK((sk.scores - sl.scores).norm() == 0.0);
  }
}

TEST_CASE("duplicate rows and permutations") {
  auto synth = gen_synthetic_regression<double>(10, 3, 3, 0.01, 5);
  Mat a = synth.data.design().dense();
  Vec b = synth.data.labels();
  a.row(7) = a.row(2);
  b(7) = b(2);
  const Dataset<double> d(Design<double>(a), b, Task::Regression);
  const SafeLoss<double> loss(LossKind::SquareDistance, 0.3);
  const GramProblem<double> prob(gram_matrix(d, Kernel::rbf(0.7)), b, loss, 0.1);
  const Vec alpha0 = Vec::Zero(10);
  const auto region = build_region(prob, alpha0, 0.5, 5);
  const auto rep = screen_kernel(prob, region);
  CHECK(rep.scores(7) == doctest::Approx(rep.scores(2)).epsilon(1e-12));

  // Reversing the samples reverses the scores.
  std::vector<long> rev(10);
  for (long i = 0; i < 10; ++i) rev[static_cast<std::size_t>(i)] = 9 - i;
  const Dataset<double> dr = d.select(rev);
  const GramProblem<double> pr(gram_matrix(dr, Kernel::rbf(0.7)), dr.labels(), loss, 0.1);
  const EllipsoidRegion<double> ball = EllipsoidRegion<double>::ball(Vec::Zero(10), 0.5);
  const auto s1 = screen_kernel(prob, ball), s2 = screen_kernel(pr, ball);
  for (long i = 0; i < 10; ++i) CHECK(s1.scores(i) == doctest::Approx(s2.scores(9 - i)).epsilon(1e-12));
}

TEST_CASE("kernel screening is safe") {
  auto synth = gen_synthetic_classification<double>(120, 4, 0.1, 0.0, 6);
  const Mat k = gram_matrix(synth.data, Kernel::rbf(0.5));
  const GramProblem<double> prob(k, synth.data.labels(), SafeLoss<double>(LossKind::SquaredHinge, 0.5), 0.01);
  const Vec zero = Vec::Zero(120);
  SolveOptions<double> opt;
  opt.tol = 1e-10;
  opt.max_epochs = 2e5;
  const auto full = solve(prob, zero, opt);
  CHECK(full.converged);
  const Vec x0 = solve(prob, zero, 1e-8, 20.0).x;
  const auto region = build_region(prob, x0, 2.0 * (x0 - full.x).norm(), 10);
  CHECK(region.contains(full.x, 1e-6));
  const auto rep = screen_kernel(prob, region);
  const auto kept = rep.kept_indices();
  const auto refit = solve(prob.restrict(kept), zero, opt);
  CHECK(primal(prob, refit.x) == doctest::Approx(full.primal).epsilon(1e-6));
  const Vec t = prob.margins(full.x);
  for (long i : rep.screened_indices()) CHECK(t(i) >= 0.5 - 1e-6);
}
