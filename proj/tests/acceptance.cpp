// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "common.hpp"

using namespace testutil;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Full refit vs refit on the kept rows, both compared on the full objective.
double refit_mismatch(const ErmProblem<double>& prob, const ScreeningReport<double>& report, const Vec& x_full,
                      const SolveOptions<double>& opt) {
  const auto refit = solve(prob.restrict(report.kept_indices()), Vec::Zero(prob.features()), opt);
  const double p_full = primal(prob, x_full);
  return std::abs(primal(prob, refit.x) - p_full) / std::abs(p_full);
}

SolveOptions<double> tight() { return SolveOptions<double>{1e-12, 1e5, 10, 1.0}; }

Outcome safety_end_to_end() {
  Outcome out;
  const auto t0 = Clock::now();
  double worst = 0.0;
  long screened = 0, instances = 0;
  std::ostringstream counts;
  for (double mu : {0.1, 0.5}) {
    for (double lambda : {1e-3, 1e-2}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto synth = gen_synthetic_regression<double>(100, 10, 10, 0.01, seed);
        const ErmProblem<double> prob(std::move(synth.data), SafeLoss<double>(LossKind::SquareDistance, mu),
                                      Penalty<double>(PenaltyKind::L1, lambda));
        const Vec zero = Vec::Zero(10);
        const Vec x0 = solve(prob, zero, 1e-8, 2.0).x;
        const auto ball = init_ball(x0, InitStrategy<double>::sublevel(primal(prob, x0), lambda, PenaltyKind::L1));
        const auto report = screen(prob, build_region(prob, ball, 20));
        const auto full = solve(prob, zero, tight());
        worst = std::max(worst, refit_mismatch(prob, report, full.x, tight()));
        screened += report.screened_count();
        counts << report.screened_count() << (++instances < 20 ? "," : "");
      }
    }
  }
  const double elapsed = seconds_since(t0);
  out.pass = worst <= 1e-7 && elapsed < 10.0;
  out.detail = "worst relative mismatch " + fmt("%.2e", worst) + ", screened " + std::to_string(screened) +
               "/2000 (per instance " + counts.str() + "), " + fmt("%.2f", elapsed) + " s";
  return out;
}

Outcome interval_demo() {
  Outcome out;
  const auto t0 = Clock::now();
  const auto synth = gen_interval_regression<double>(20, 2, 0.05, 0);
  const ErmProblem<double> prob(synth.data, SafeLoss<double>(LossKind::SquareDistance, 0.2),
                                Penalty<double>(PenaltyKind::L1, 0.01));
  const Vec zero = Vec::Zero(2);
  const Vec x0 = solve(prob, zero, 1e-8, 50.0).x;
  const auto ball = init_ball(x0, InitStrategy<double>::sublevel(primal(prob, x0), 0.01, PenaltyKind::L1));
  const auto region = build_region(prob, ball, 20);
  const auto report = screen(prob, region);
  const auto full = solve(prob, zero, tight());
  const auto audit = audit_safety(prob, report.screened_indices(), full.x, region);
  const double elapsed = seconds_since(t0);
  out.pass = 2 * report.screened_count() >= 20 && audit.passed() && elapsed < 1.0;
  out.detail = "screened " + std::to_string(report.screened_count()) + "/20, audit " +
               (audit.passed() ? "passed" : "failed") + ", " + fmt("%.3f", elapsed) + " s";
  return out;
}

Outcome closed_form_oracle() {
  Outcome out;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<long> dim(1, 5);
  double worst_match = 0.0, worst_excess = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < 200; ++r) {
    const long p = dim(rng);
    const Vec z = gaussian_vector(p, rng);
    const Mat e = random_pd(p, rng);
    const auto region = region_from_dense(z, e, gaussian_vector(p, rng));
    const Vec a = gaussian_vector(p, rng);
    const double closed = region_max_linear(region, a, 0.0);
    const auto bf = brute_force_max(z, e, region.cut(), a, 1000000, closed, rng);
    worst_match = std::max(worst_match, std::abs(bf.best - closed));
    worst_excess = std::max(worst_excess, bf.worst_excess);
  }
  out.pass = worst_match <= 1e-3 && worst_excess <= 1e-9;
  out.detail = "worst |brute - closed| " + fmt("%.2e", worst_match) + ", worst sample excess " +
               fmt("%.2e", worst_excess);
  return out;
}

Outcome low_rank_fidelity() {
  Outcome out;
  std::mt19937_64 rng(9);
  const long p = 50, k = 40;
  auto region = EllipsoidRegion<double>::ball(gaussian_vector(p, rng), 2.0);
  DenseEllipsoid dense{region.center(), 4.0 * Mat::Identity(p, p)};
  double prev = region.log_det();
  bool decreasing = true;
  double worst_ops_ratio = 0.0;
  for (long j = 0; j < k; ++j) {
    const Vec g = gaussian_vector(p, rng);
    {
      ops::ScopedOpCounter counter;
      region = ellipsoid_step(region, g);
      worst_ops_ratio = std::max(worst_ops_ratio, static_cast<double>(counter.value()) / (p * (j + 1.0)));
    }
    dense.step(g);
    const double ld = region.log_det();
    decreasing = decreasing && ld < prev;
    prev = ld;
  }
  const double err_e = (region.to_dense() - dense.e).norm() / dense.e.norm();
  const double err_z = (region.center() - dense.z).norm() / dense.z.norm();

  // O(pk) rather than O(p^2): doubling p at fixed k about doubles the step cost.
  auto step_cost = [&](long dim, long steps) {
    auto r = EllipsoidRegion<double>::ball(Vec::Zero(dim), 1.0);
    for (long j = 0; j < steps; ++j) r = ellipsoid_step(r, gaussian_vector(dim, rng));
    ops::ScopedOpCounter counter;
    r = ellipsoid_step(r, gaussian_vector(dim, rng));
    return static_cast<double>(counter.value());
  };
  const double growth = step_cost(1600, 10) / step_cost(800, 10);
  out.pass = err_e <= 1e-10 && err_z <= 1e-10 && decreasing && worst_ops_ratio <= 8.0 && growth < 2.5;
  out.detail = "relative error E " + fmt("%.1e", err_e) + " z " + fmt("%.1e", err_z) + ", ops/(p(k+1)) <= " +
               fmt("%.2f", worst_ops_ratio) + ", cost ratio p 1600/800 " + fmt("%.2f", growth) +
               ", log det decreasing " + (decreasing ? "yes" : "no");
  return out;
}

Outcome loss_oracles() {
  Outcome out;
  double worst_oracle = 0.0, worst_fd = 0.0, worst_recovery = 0.0;
  bool flat_exact = true;
  const auto ts = sample_points(100, -5.0, 5.0, 11);
  for (LossKind kind : {LossKind::SquareDistance, LossKind::SafeLogistic, LossKind::Hinge, LossKind::SquaredHinge,
                        LossKind::Huber}) {
    for (double mu : {0.1, 0.5, 1.0}) {
      const SafeLoss<double> loss(kind, mu);
      for (double t : ts) worst_oracle = std::max(worst_oracle, std::abs(loss.value(t) - safe_oracle(kind, mu, t)));
    }
  }
  for (double t : sample_points(200, -5.0, 5.0, 3)) {
    worst_recovery = std::max(worst_recovery, std::abs(SafeLoss<double>(LossKind::Huber, 1e-6).value(t) - std::abs(t)));
    worst_recovery =
        std::max(worst_recovery, std::abs(SafeLoss<double>(LossKind::Hinge, 0.0).value(t) - std::max(1.0 - t, 0.0)));
  }
  for (double mu : {0.0, 0.2, 0.5, 0.9}) {
    const SafeLoss<double> sl(LossKind::SafeLogistic, mu);
    for (double t : sample_points(200, 1.0 - mu, 6.0, 4)) flat_exact = flat_exact && sl.value(t) == 0.0 && sl.derivative(t) == 0.0;
    flat_exact = flat_exact && sl.value(1.0 - mu) == 0.0;
  }
  const double h = 1e-6;
  for (LossKind kind : {LossKind::SquareDistance, LossKind::SafeLogistic, LossKind::SquaredHinge, LossKind::Huber}) {
    const SafeLoss<double> loss(kind, 0.35);
    for (double t : sample_points(200, -5.0, 5.0, 17))
      worst_fd = std::max(worst_fd, std::abs((loss.value(t + h) - loss.value(t - h)) / (2 * h) - loss.derivative(t)));
  }
  out.pass = worst_oracle <= 1e-4 && worst_recovery <= 1e-5 && flat_exact && worst_fd <= 1e-6;
  out.detail = "oracle " + fmt("%.1e", worst_oracle) + ", recovery " + fmt("%.1e", worst_recovery) +
               ", derivative " + fmt("%.1e", worst_fd) + ", flat region exact " + (flat_exact ? "yes" : "no");
  return out;
}

Outcome duality() {
  Outcome out;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const LossKind kinds[] = {LossKind::SquareDistance, LossKind::SafeLogistic, LossKind::SquaredHinge,
                            LossKind::Hinge, LossKind::Huber};
  double worst_weak = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < 100; ++r) {
    const PenaltyKind pen = r % 2 ? PenaltyKind::L1 : PenaltyKind::HalfSquaredL2;
    const auto prob = random_problem(kinds[r % 5], 0.05 + 0.5 * unif(rng), pen, 0.01 + unif(rng), 20, 5, 100 + r);
    const Vec nu = feasible_dual(prob, dual_candidate(prob, gaussian_vector(5, rng)));
    const double d = dual_value(prob, nu);
    for (int s = 0; s < 5; ++s) worst_weak = std::max(worst_weak, d - primal(prob, gaussian_vector(5, rng)));
  }

  double worst_nu = 0.0, worst_gap = 0.0;
  long inside = 0;
  const LossKind smooth[] = {LossKind::SquareDistance, LossKind::SafeLogistic, LossKind::SquaredHinge};
  for (int r = 0; r < 30; ++r) {
    const LossKind kind = smooth[r % 3];
    const PenaltyKind pen = r % 2 ? PenaltyKind::L1 : PenaltyKind::HalfSquaredL2;
    const auto prob = random_problem(kind, 0.5, pen, 0.05, 80, 5, 500 + r);
    const auto res = solve(prob, Vec::Zero(5), tight());
    worst_gap = std::max(worst_gap, res.gap);
    if (!(res.gap <= 1e-8)) continue;
    const Vec t = margins(prob, res.x);
    const Vec nu = feasible_dual(prob, dual_candidate(prob, res.x));
    const auto flat = prob.loss().flat_interval();
    for (long i = 0; i < t.size(); ++i) {
      if (t(i) - flat.lo < 1e-4 || flat.hi - t(i) < 1e-4) continue;
      ++inside;
      worst_nu = std::max(worst_nu, std::abs(nu(i)));
    }
  }
  out.pass = worst_weak <= 1e-12 && worst_gap <= 1e-8 && worst_nu <= 1e-8 && inside > 0;
  out.detail = "max D - P " + fmt("%.1e", worst_weak) + ", worst gap " + fmt("%.1e", worst_gap) + ", max |nu| " +
               fmt("%.1e", worst_nu) + " over " + std::to_string(inside) + " interior samples";
  return out;
}

Outcome gap_ball_comparison() {
  Outcome out;
  auto synth = gen_synthetic_classification<double>(2000, 50, 0.1, 0.0, 0);
  const ErmProblem<double> base(std::move(synth.data), SafeLoss<double>(LossKind::SquaredHinge, 0.5),
                                Penalty<double>(PenaltyKind::HalfSquaredL2, 1.0));
  std::ostringstream table;
  bool all = true;
  for (double lambda : {1e-2, 1e-1, 1.0}) {
    const auto prob = base.with_lambda(lambda);
    const Vec zero = Vec::Zero(50);
    const auto full = solve(prob, zero, tight());
    table << " lambda=" << lambda << " (ellipsoid/ball by warm epochs";
    for (double epochs : {10.0, 20.0, 30.0}) {
      const Vec x = solve(prob, zero, 1e-8, epochs).x;
      const auto ball = init_ball(x, InitStrategy<double>::gap(duality_gap(prob, x), prob.strong_convexity()));
      const auto ball_region = EllipsoidRegion<double>::ball(ball.center, ball.radius);
      const auto ell_region = build_region(prob, ball, 10);
      const auto by_ball = screen(prob, ball_region);
      const auto by_ell = screen(prob, ell_region);
      const bool safe = refit_mismatch(prob, by_ball, full.x, tight()) <= 1e-7 &&
                        refit_mismatch(prob, by_ell, full.x, tight()) <= 1e-7 &&
                        ell_region.contains(full.x, 1e-6) && ball_region.contains(full.x, 1e-6);
      const bool floor = 2 * by_ell.screened_count() >= by_ball.screened_count();
      all = all && safe && floor;
      table << " " << epochs << ": " << by_ell.screened_count() << "/" << by_ball.screened_count()
            << (safe ? "" : " UNSAFE");
    }
    table << ");";
  }
  out.pass = all;
  out.detail = "screened of 2000," + table.str();
  return out;
}

Outcome path_cost() {
  Outcome out;
  int wins = 0;
  std::ostringstream per;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto synth = gen_synthetic_classification<double>(2000, 50, 0.1, 0.0, seed);
    const ErmProblem<double> prob(std::move(synth.data), SafeLoss<double>(LossKind::SquaredHinge, 0.5),
                                  Penalty<double>(PenaltyKind::HalfSquaredL2, 1.0));
    const auto grid = log_grid_points(1.0, 1e-3, 20);
    PathOptions<double> opt;
    opt.warm_epochs = 1000;
    const double plain = regularization_path(prob, grid, opt).total_epochs();
    opt.screening = true;
    const double screened = regularization_path(prob, grid, opt).total_epochs();
    if (screened < plain) ++wins;
    per << " " << fmt("%.1f", screened) << "/" << fmt("%.1f", plain);
  }
  out.pass = wins * 10 >= 5 * 7;
  out.detail = std::to_string(wins) + "/5 paths cheaper with screening (epochs screened/plain:" + per.str() + ")";
  return out;
}

Outcome compression() {
  Outcome out;
  const CompressionOptions<double> opt;  // fractions 0, 0.2, ..., 0.8 and seeds 0..4
  std::ostringstream worst;
  bool all = true;
  auto check = [&](const char* name, const CompressionCurve& curve) {
    double margin = std::numeric_limits<double>::infinity();
    std::ostringstream diffs;
    for (double f : opt.fractions) {
      const auto* s = curve.find(f, CompressionMethod::Screening);
      const auto* r = curve.find(f, CompressionMethod::Random);
      if (!s || !r) {
        all = false;
        continue;
      }
      margin = std::min(margin, s->mean - r->mean);
      if (f > 0.0) diffs << " " << fmt("%+.4f", s->mean - r->mean);
    }
    all = all && margin >= 0.0;
    worst << " " << name << " screening - random at 0.2..0.8:" << diffs.str() << ";";
  };
  const auto cls = gen_synthetic_classification<double>(1000, 50, 0.1, 0.0, 0);
  check("classification", compression_curve(cls.data, SafeLoss<double>(LossKind::SquaredHinge, 0.5),
                                             Penalty<double>(PenaltyKind::HalfSquaredL2, 0.01), opt));
  const auto reg = gen_synthetic_regression<double>(100, 10, 10, 0.01, 0);
  check("regression", compression_curve(reg.data, SafeLoss<double>(LossKind::SquareDistance, 0.1),
                                        Penalty<double>(PenaltyKind::L1, 1e-3), opt));
  out.pass = all;
  out.detail = "5 seeds;" + worst.str();
  return out;
}

Outcome kernel_reduction() {
  Outcome out;
  std::mt19937_64 rng(4);
  int equal = 0;
  long screened = 0;
  for (int r = 0; r < 10; ++r) {
    const long n = 20;
    const bool cls = r % 2 == 1;
    const Vec b = cls ? signs(n, rng) : gaussian_vector(n, rng, 0.3);
    const SafeLoss<double> loss(cls ? LossKind::SquaredHinge : LossKind::SquareDistance, 0.2 + 0.05 * r);
    const double lambda_k = 0.02 + 0.01 * r;
    const Mat identity = Mat::Identity(n, n);
    const Dataset<double> data(Design<double>(identity), b, cls ? Task::Classification : Task::Regression);
    const GramProblem<double> kp(gram_matrix(data, Kernel::linear()), b, loss, lambda_k);
    const ErmProblem<double> lp(data, loss, Penalty<double>(PenaltyKind::HalfSquaredL2, 2.0 * lambda_k));
    const Vec x0 = gaussian_vector(n, rng, 0.1);
    const double r0 = std::sqrt(2.0 * duality_gap(lp, x0) / lp.strong_convexity());
    const auto sk = screen_kernel(kp, build_region(kp, x0, r0, 10));
    const auto sl = screen(lp, build_region(lp, x0, r0, 10));
    if (sk.screened == sl.screened) ++equal;
    screened += sl.screened_count();
  }
  out.pass = equal == 10;
  out.detail = std::to_string(equal) + "/10 masks identical (" + std::to_string(screened) + " screened in total)";
  return out;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"safety end-to-end", safety_end_to_end},
      {"interval regression demo", interval_demo},
      {"closed-form region maximum", closed_form_oracle},
      {"low-rank ellipsoid fidelity", low_rank_fidelity},
      {"loss oracle suite", loss_oracles},
      {"duality suite", duality},
      {"gap-ball comparison", gap_ball_comparison},
      {"regularization path cost", path_cost},
      {"compression curves", compression},
      {"kernel reduction", kernel_reduction},
  };
  int failed = 0, index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
