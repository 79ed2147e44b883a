// Command-line front end: data ingestion, synthetic generation and the
// screen / solve / path / compress experiments.

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "safescreen/io.hpp"
#include "safescreen/safescreen.hpp"

namespace fs = std::filesystem;
using namespace safescreen;
using Vector = Eigen::VectorXd;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kUnsafe = 3, kNoConvergence = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string task = "regression";
  std::string loss = "sqdist";
  std::string penalty = "l1";
  double lambda = 0.01;
  double mu = 0.1;
  long k = 20;
  std::string init = "auto";  // auto | explicit | gap | sublevel
  double radius = 0.0;
  double tol = 1e-8;
  double epochs = 1e4;
  double warm_epochs = 2.0;
  std::string data;
  std::string format = "libsvm";
  long features = 0;
  std::string out = "out";
  std::uint64_t seed = 0;

  // synthetic source, used when no data file is given
  long n = 100;
  long p = 10;
  long sparsity = -1;
  double sigma = 0.01;
  double flip = 0.0;

  // path
  double lambda_max = 0.0;
  double lambda_min_ratio = 1e-2;
  long points = 20;
  std::string screening = "both";  // on | off | both
  std::string path_region = "ellipsoid";
  double path_warm_epochs = 1e4;
  double path_radius = 0.05;
  long path_k = 1;

  // compress
  std::vector<double> fractions{0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<std::string> methods{"screening", "margin", "random"};
  long seeds = 5;
};

Task parse_task(const std::string& s) {
  if (s == "regression") return Task::Regression;
  if (s == "classification") return Task::Classification;
  throw ConfigError("unknown task '" + s + "'");
}

void validate(const RunConfig& c) {
  if (c.k < 1 || c.path_k < 1) throw ConfigError("k must be >= 1");
  if (!(c.mu >= 0.0)) throw ConfigError("mu must be >= 0");
  if (!(c.lambda > 0.0)) throw ConfigError("lambda must be > 0");
  if (!(c.tol > 0.0)) throw ConfigError("tol must be > 0");
  if (!(c.epochs > 0.0)) throw ConfigError("epochs must be > 0");
  try {
    const Task task = parse_task(c.task);
    const LossKind loss = parse_loss_kind(c.loss);
    parse_penalty_kind(c.penalty);
    io::parse_format(c.format);
    if (task_of(loss) != task) throw ConfigError("loss '" + c.loss + "' does not fit task '" + c.task + "'");
    for (const auto& m : c.methods) parse_method(m);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.init != "auto" && c.init != "explicit" && c.init != "gap" && c.init != "sublevel")
    throw ConfigError("unknown init strategy '" + c.init + "'");
  if (c.init == "explicit" && !(c.radius > 0.0)) throw ConfigError("explicit init needs radius > 0");
  if (c.screening != "on" && c.screening != "off" && c.screening != "both")
    throw ConfigError("screening must be on, off or both");
  if (c.path_region != "ellipsoid" && c.path_region != "gap-ball")
    throw ConfigError("path-region must be ellipsoid or gap-ball");
}

Dataset<double> load_or_generate(const RunConfig& c) {
  const Task task = parse_task(c.task);
  if (!c.data.empty())
    return io::load_dataset(c.data, io::parse_format(c.format), task,
                            c.features > 0 ? std::optional<long>(c.features) : std::nullopt);
  if (task == Task::Regression)
    return gen_synthetic_regression<double>(c.n, c.p, c.sparsity < 0 ? c.p : c.sparsity, c.sigma, c.seed).data;
  return gen_synthetic_classification<double>(c.n, c.p, c.sigma, c.flip, c.seed).data;
}

ErmProblem<double> make_problem(const RunConfig& c) {
  return ErmProblem<double>(load_or_generate(c), SafeLoss<double>(parse_loss_kind(c.loss), c.mu),
                            Penalty<double>(parse_penalty_kind(c.penalty), c.lambda));
}

SolveOptions<double> solve_options(const RunConfig& c) {
  SolveOptions<double> o;
  o.tol = c.tol;
  o.max_epochs = c.epochs;
  return o;
}

nlohmann::json config_json(const RunConfig& c) {
  return {{"task", c.task},       {"loss", c.loss},   {"penalty", c.penalty},     {"lambda", c.lambda},
          {"mu", c.mu},           {"k", c.k},         {"init", c.init},           {"radius", c.radius},
          {"tol", c.tol},         {"epochs", c.epochs}, {"warm_epochs", c.warm_epochs}, {"data", c.data},
          {"format", c.format},   {"seed", c.seed},   {"n", c.n},                 {"p", c.p},
          {"sparsity", c.sparsity}, {"sigma", c.sigma}, {"flip", c.flip}};
}

void write_json(const fs::path& file, nlohmann::json j) {
  j["schema"] = 1;
  io::write_atomic(file, j.dump(2) + "\n");
}

BallRegion<double> initial_ball(const RunConfig& c, const ErmProblem<double>& prob, const Vector& x0) {
  std::string init = c.init;
  if (init == "auto") init = c.radius > 0.0 ? "explicit" : (prob.strong_convexity() > 0.0 ? "gap" : "sublevel");
  if (init == "explicit") return init_ball(x0, InitStrategy<double>::explicit_radius(c.radius));
  if (init == "gap") {
    const double gap = duality_gap(prob, x0);
    if (!std::isfinite(gap)) throw NumericalError("duality gap is infinite at the warm start");
    return init_ball(x0, InitStrategy<double>::gap(gap, prob.strong_convexity()));
  }
  return init_ball(x0, InitStrategy<double>::sublevel(primal(prob, x0), prob.lambda(), prob.penalty().kind()));
}

struct ScreenOutcome {
  ScreeningReport<double> report;
  EllipsoidRegion<double> region;
  SolveResult<double> full;
};

// Warm start, region, screening, reference solve and audit.
ScreenOutcome screen_pipeline(const RunConfig& c, const ErmProblem<double>& prob) {
  const Vector zero = Vector::Zero(prob.features());
  SolveOptions<double> warm = solve_options(c);
  warm.max_epochs = c.warm_epochs;
  const Vector x0 = solve(prob, zero, warm).x;
  const BallRegion<double> ball = initial_ball(c, prob, x0);
  const EllipsoidRegion<double> region = ball.radius > 0.0 ? build_region(prob, ball, c.k)
                                                           : EllipsoidRegion<double>::point(ball.center);
  ScreeningReport<double> report = screen(prob, region);
  SolveOptions<double> tight = solve_options(c);
  tight.tol = std::min(c.tol, 1e-12);
  SolveResult<double> full = solve(prob, x0, tight);
  report.audit = audit_safety(prob, report.screened_indices(), full.x, region);
  return {std::move(report), region, std::move(full)};
}

int run_screen(const RunConfig& c) {
  const auto prob = make_problem(c);
  const auto outcome = screen_pipeline(c, prob);
  const fs::path out(c.out);
  io::write_atomic(out / "screening.csv", io::report_csv(outcome.report));
  write_json(out / "region.json", io::to_json(outcome.region));
  nlohmann::json summary = io::summary_json(outcome.report);
  summary["config"] = config_json(c);
  summary["reference_solve"] = io::to_json(outcome.full);
  write_json(out / "summary.json", summary);
  std::cout << "screened " << outcome.report.screened_count() << " of " << outcome.report.samples()
            << " samples; audit " << (outcome.report.audit->passed() ? "passed" : "FAILED") << "\n";
  if (outcome.report.degenerate_interval) std::cerr << "warning: mu = 0, no sample can be screened\n";
  return outcome.report.audit->passed() ? kOk : kUnsafe;
}

int run_solve(const RunConfig& c) {
  const auto prob = make_problem(c);
  const auto res = solve(prob, Vector::Zero(prob.features()), solve_options(c));
  nlohmann::json j = io::to_json(res);
  j["config"] = config_json(c);
  write_json(fs::path(c.out) / "solution.json", j);
  std::cout << "primal " << io::format_double(res.primal) << " gap " << io::format_double(res.gap) << " epochs "
            << res.epochs << (res.converged ? "" : " (not converged)") << "\n";
  return res.converged ? kOk : kNoConvergence;
}

int run_path(const RunConfig& c) {
  const auto prob = make_problem(c);
  double hi = c.lambda_max;
  if (!(hi > 0.0)) hi = prob.penalty().kind() == PenaltyKind::L1 ? lambda_max_l1(prob) : 1.0;
  if (!(c.lambda_min_ratio > 0.0 && c.lambda_min_ratio < 1.0)) throw ConfigError("lambda-min-ratio must be in (0, 1)");
  if (c.points < 2) throw ConfigError("points must be >= 2");
  const auto grid = log_grid_points(hi, hi * c.lambda_min_ratio, c.points);
  PathOptions<double> opt;
  opt.steps = c.path_k;
  opt.warm_epochs = c.path_warm_epochs;
  opt.target_radius = c.path_radius;
  opt.solve = solve_options(c);
  opt.region = c.path_region == "gap-ball" ? PathRegion::GapBall : PathRegion::Ellipsoid;
  const fs::path out(c.out);
  nlohmann::json summary;
  summary["config"] = config_json(c);
  bool converged = true;
  for (const bool screening : {false, true}) {
    if ((screening && c.screening == "off") || (!screening && c.screening == "on")) continue;
    opt.screening = screening;
    const auto path = regularization_path(prob, grid, opt);
    const std::string name = screening ? "path_screened" : "path_plain";
    io::write_atomic(out / (name + ".csv"), io::path_csv(path));
    summary[name] = {{"total_epochs", path.total_epochs()}};
    for (const auto& pt : path.points) {
      if (!pt.error.empty()) std::cerr << "lambda " << pt.lambda << ": " << pt.error << "\n";
      converged = converged && pt.error.empty() && pt.result.converged;
    }
    std::cout << name << ": " << path.total_epochs() << " epochs\n";
  }
  write_json(out / "path.json", summary);
  return converged ? kOk : kNoConvergence;
}

int run_compress(const RunConfig& c) {
  const Dataset<double> data = load_or_generate(c);
  CompressionOptions<double> opt;
  opt.fractions = c.fractions;
  opt.methods.clear();
  for (const auto& m : c.methods) opt.methods.push_back(parse_method(m));
  if (c.seeds < 3) throw ConfigError("seeds must be >= 3");
  opt.seeds.clear();
  for (long s = 0; s < c.seeds; ++s) opt.seeds.push_back(c.seed + static_cast<std::uint64_t>(s));
  opt.steps = c.k;
  opt.early_epochs = c.warm_epochs;
  opt.solve = solve_options(c);
  const auto curve = compression_curve(data, SafeLoss<double>(parse_loss_kind(c.loss), c.mu),
                                       Penalty<double>(parse_penalty_kind(c.penalty), c.lambda), opt);
  const fs::path out(c.out);
  io::write_atomic(out / "compression.csv", io::compression_csv(curve));
  nlohmann::json manifest;
  manifest["config"] = config_json(c);
  manifest["fractions"] = c.fractions;
  manifest["methods"] = c.methods;
  manifest["seeds"] = c.seeds;
  manifest["metric"] = curve.metric == MetricKind::Accuracy ? "accuracy" : "r2";
  manifest["warnings"] = curve.warnings;
  write_json(out / "compression.json", manifest);
  for (const auto& w : curve.warnings) std::cerr << "warning: " << w << "\n";
  return kOk;
}

int run_gen_data(const RunConfig& c) {
  const Dataset<double> data = load_or_generate(c);
  const auto fmt = io::parse_format(c.format);
  const fs::path out(c.out);
  const fs::path file = out.has_extension() ? out : out / (fmt == io::Format::Libsvm ? "data.libsvm" : "data.csv");
  io::write_atomic(file, fmt == io::Format::Libsvm ? io::to_libsvm(data) : io::to_csv(data));
  std::cout << "wrote " << data.samples() << " samples to " << file.string() << "\n";
  return kOk;
}

// Equal-width intervals around b_i are the square-distance loss; the signal
// lives in the first feature only.
int run_interval_demo(const RunConfig& c) {
  const auto synth = gen_interval_regression<double>(c.n, c.p, c.sigma, c.seed);
  const Eigen::MatrixXd& a = synth.data.design().dense();
  const Vector& b = synth.data.labels();
  const ErmProblem<double> prob(synth.data, SafeLoss<double>(LossKind::SquareDistance, c.mu),
                                Penalty<double>(parse_penalty_kind(c.penalty), c.lambda));
  const auto outcome = screen_pipeline(c, prob);
  const fs::path out(c.out);
  io::write_atomic(out / "screening.csv", io::report_csv(outcome.report));
  std::string points = "index,x0,x1,center,prediction,screened\n";
  const Vector pred = a * outcome.full.x;
  for (long i = 0; i < b.size(); ++i)
    points += std::to_string(i) + ',' + io::format_double(a(i, 0)) + ',' + io::format_double(a(i, 1 % c.p)) + ',' +
              io::format_double(b(i)) + ',' + io::format_double(pred(i)) + ',' +
              (outcome.report.screened[static_cast<std::size_t>(i)] ? "1" : "0") + '\n';
  io::write_atomic(out / "intervals.csv", points);
  nlohmann::json summary = io::summary_json(outcome.report);
  summary["config"] = config_json(c);
  summary["reference_solve"] = io::to_json(outcome.full);
  write_json(out / "summary.json", summary);
  std::cout << "interval demo: screened " << outcome.report.screened_count() << " of " << outcome.report.samples()
            << "; audit " << (outcome.report.audit->passed() ? "passed" : "FAILED") << "\n";
  return outcome.report.audit->passed() ? kOk : kUnsafe;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe screening of data points for empirical risk minimization"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file supplying any of the flags below");
  RunConfig c;

  app.add_option("--task", c.task, "regression | classification");
  app.add_option("--loss", c.loss, "sqdist, safelog, hinge, sqhinge, huber, square, logistic");
  app.add_option("--penalty", c.penalty, "l1 | l2");
  app.add_option("--lambda", c.lambda, "penalty strength");
  app.add_option("--mu", c.mu, "flat-region threshold");
  app.add_option("--k", c.k, "ellipsoid steps");
  app.add_option("--init", c.init, "initial ball: auto | explicit | gap | sublevel");
  app.add_option("--radius", c.radius, "radius for the explicit init");
  app.add_option("--tol", c.tol, "solver tolerance");
  app.add_option("--epochs", c.epochs, "solver epoch budget");
  app.add_option("--warm-epochs", c.warm_epochs, "epochs of the warm start used to center the region");
  app.add_option("--data", c.data, "dataset file (synthetic data when omitted)");
  app.add_option("--format", c.format, "libsvm | csv");
  app.add_option("--features", c.features, "feature count for libsvm input");
  app.add_option("--out", c.out, "output directory (gen-data: file or directory)");
  app.add_option("--seed", c.seed, "random seed");
  app.add_option("--n", c.n, "synthetic samples");
  app.add_option("--p", c.p, "synthetic features");
  app.add_option("--sparsity", c.sparsity, "nonzeros of the synthetic regression model (default p)");
  app.add_option("--sigma", c.sigma, "synthetic noise level");
  app.add_option("--flip", c.flip, "synthetic label flip probability");
  app.add_option("--lambda-max", c.lambda_max, "largest path lambda (default: lambda_max for l1, 1 for l2)");
  app.add_option("--lambda-min-ratio", c.lambda_min_ratio, "smallest path lambda as a fraction of the largest");
  app.add_option("--points", c.points, "path length");
  app.add_option("--screening", c.screening, "path variants: on | off | both");
  app.add_option("--path-k", c.path_k, "ellipsoid steps per path point");
  app.add_option("--path-warm-epochs", c.path_warm_epochs, "epoch cap of the warm phase before screening");
  app.add_option("--path-radius", c.path_radius, "warm phase stops once the gap ball radius is this small");
  app.add_option("--path-region", c.path_region, "ellipsoid | gap-ball");
  app.add_option("--fractions", c.fractions, "deletion fractions")->delimiter(',');
  app.add_option("--methods", c.methods, "screening, margin, random")->delimiter(',');
  app.add_option("--seeds", c.seeds, "number of seeds");

  auto* screen_cmd = app.add_subcommand("screen", "build a region, screen, audit and write the report");
  auto* solve_cmd = app.add_subcommand("solve", "solve the full problem");
  auto* path_cmd = app.add_subcommand("path", "regularization path with and without screening");
  auto* compress_cmd = app.add_subcommand("compress", "dataset compression curves");
  auto* gen_cmd = app.add_subcommand("gen-data", "write a synthetic dataset");
  auto* demo_cmd = app.add_subcommand("interval-demo", "toy interval regression");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (demo_cmd->parsed()) {
    // Toy-scale defaults unless given explicitly.
    const auto unset = [&app](const char* flag) { return app.get_option(flag)->count() == 0; };
    if (unset("--n")) c.n = 20;
    if (unset("--p")) c.p = 2;
    if (unset("--sigma")) c.sigma = 0.05;
    if (unset("--mu")) c.mu = 0.2;
    if (unset("--warm-epochs")) c.warm_epochs = 50;
  }

  try {
    validate(c);
    if (screen_cmd->parsed()) return run_screen(c);
    if (solve_cmd->parsed()) return run_solve(c);
    if (path_cmd->parsed()) return run_path(c);
    if (compress_cmd->parsed()) return run_compress(c);
    if (gen_cmd->parsed()) return run_gen_data(c);
    if (demo_cmd->parsed()) return run_interval_demo(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const io::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
