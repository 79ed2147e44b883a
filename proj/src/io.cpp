#include "safescreen/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace safescreen::io {

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool parse_number(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_index(std::string_view s, long& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void fail(long line, const std::string& what) {
  throw ParseError("line " + std::to_string(line) + ": " + what);
}

template <typename F>
void for_each_line(std::string_view text, F&& f) {
  long number = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    ++number;
    f(number, line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Format parse_format(std::string_view id) {
  if (id == "libsvm") return Format::Libsvm;
  if (id == "csv") return Format::Csv;
  throw std::invalid_argument("unknown dataset format '" + std::string(id) + "'");
}

Dataset<double> parse_libsvm(std::string_view text, Task task, std::optional<long> features) {
  std::vector<Eigen::Triplet<double, long>> triplets;
  std::vector<double> labels;
  long max_col = 0;
  for_each_line(text, [&](long number, std::string_view line) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) return;
    const long row = static_cast<long>(labels.size());
    std::size_t pos = line.find_first_of(" \t");
    double label;
    if (!parse_number(line.substr(0, pos), label)) fail(number, "bad label '" + std::string(line.substr(0, pos)) + "'");
    labels.push_back(label);
    long previous = 0;
    while (pos != std::string_view::npos) {
      const auto start = line.find_first_not_of(" \t", pos);
      if (start == std::string_view::npos) break;
      pos = line.find_first_of(" \t", start);
      const std::string_view token = line.substr(start, pos == std::string_view::npos ? pos : pos - start);
      const auto colon = token.find(':');
      long index;
      double value;
      if (colon == std::string_view::npos || !parse_index(token.substr(0, colon), index) ||
          !parse_number(token.substr(colon + 1), value))
        fail(number, "bad feature '" + std::string(token) + "'");
      if (index < 1) fail(number, "feature indices are 1-based, got " + std::to_string(index));
      if (index <= previous) fail(number, "feature indices must be strictly increasing");
      if (features && index > *features)
        fail(number, "feature index " + std::to_string(index) + " exceeds the declared " + std::to_string(*features));
      previous = index;
      max_col = std::max(max_col, index);
      triplets.emplace_back(row, index - 1, value);
    }
  });
  if (labels.empty()) throw ParseError("empty dataset");
  const long cols = features ? *features : max_col;
  Design<double>::SparseMatrix a(static_cast<long>(labels.size()), cols);
  a.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(labels.data(), static_cast<long>(labels.size()));
  try {
    return Dataset<double>(Design<double>(std::move(a)), std::move(b), task);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
}

Dataset<double> parse_csv(std::string_view text, Task task) {
  std::vector<double> values;
  long cols = -1;
  long rows = 0;
  bool first = true;
  for_each_line(text, [&](long number, std::string_view line) {
    line = trim(line);
    if (line.empty()) return;
    std::vector<double> row;
    bool numeric = true;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      double v;
      if (!parse_number(line.substr(start, comma == std::string_view::npos ? comma : comma - start), v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!numeric) {
      if (first) {
        first = false;
        return;  // header
      }
      fail(number, "non-numeric field");
    }
    first = false;
    if (row.size() < 2) fail(number, "need at least one feature and a label");
    if (cols < 0) cols = static_cast<long>(row.size());
    if (static_cast<long>(row.size()) != cols)
      fail(number, "expected " + std::to_string(cols) + " columns, got " + std::to_string(row.size()));
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  });
  if (rows == 0) throw ParseError("empty dataset");
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(values.data(), rows,
                                                                                                  cols);
  Eigen::MatrixXd a = m.leftCols(cols - 1);
  Eigen::VectorXd b = m.col(cols - 1);
  try {
    return Dataset<double>(Design<double>(std::move(a)), std::move(b), task);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
}

Dataset<double> load_dataset(const std::filesystem::path& path, Format format, Task task,
                             std::optional<long> features) {
  const std::string text = read_file(path);
  try {
    return format == Format::Libsvm ? parse_libsvm(text, task, features) : parse_csv(text, task);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string to_libsvm(const Dataset<double>& data) {
  std::string out;
  const auto& design = data.design();
  for (long i = 0; i < data.samples(); ++i) {
    out += format_double(data.labels()(i));
    if (design.is_sparse()) {
      for (Design<double>::SparseMatrix::InnerIterator it(design.sparse(), i); it; ++it)
        out += ' ' + std::to_string(it.index() + 1) + ':' + format_double(it.value());
    } else {
      for (long j = 0; j < data.features(); ++j) {
        const double v = design.dense()(i, j);
        if (v != 0.0) out += ' ' + std::to_string(j + 1) + ':' + format_double(v);
      }
    }
    out += '\n';
  }
  return out;
}

std::string to_csv(const Dataset<double>& data) {
  std::string out;
  for (long j = 0; j < data.features(); ++j) out += "x" + std::to_string(j) + ',';
  out += "label\n";
  const Eigen::MatrixXd a = data.design().to_dense();
  for (long i = 0; i < data.samples(); ++i) {
    for (long j = 0; j < data.features(); ++j) out += format_double(a(i, j)) + ',';
    out += format_double(data.labels()(i)) + '\n';
  }
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

namespace {

// JSON has no infinities; they are written as strings.
nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  auto arr = nlohmann::json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(number(v(i)));
  return arr;
}

}  // namespace

nlohmann::json to_json(const EllipsoidRegion<double>& region) {
  nlohmann::json j;
  j["dimension"] = region.dimension();
  j["steps"] = region.steps();
  j["initial_radius"] = number(region.initial_radius());
  j["point"] = region.is_point();
  j["center"] = vector_json(region.center());
  j["scale"] = number(region.scale());
  j["weights"] = vector_json(region.weights());
  auto factors = nlohmann::json::array();
  for (long c = 0; c < region.steps(); ++c) factors.push_back(vector_json(region.factors().col(c)));
  j["factors"] = factors;
  j["cut"] = region.cut() ? vector_json(*region.cut()) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const AuditReport<double>& audit) {
  return {{"passed", audit.passed()},
          {"solution_in_region", audit.solution_in_region},
          {"mahalanobis", number(audit.mahalanobis)},
          {"cut_value", number(audit.cut_value)},
          {"screened_margins_inside", audit.screened_margins_inside},
          {"worst_margin_slack", number(audit.worst_margin_slack)},
          {"margin_violations", audit.margin_violations},
          {"refit_matches", audit.refit_matches},
          {"refit_distance", number(audit.refit_distance)},
          {"refit_objective_gap", number(audit.refit_objective_gap)}};
}

nlohmann::json summary_json(const ScreeningReport<double>& report) {
  nlohmann::json j;
  j["task"] = report.task == Task::Regression ? "regression" : "classification";
  j["samples"] = report.samples();
  j["screened"] = report.screened_count();
  j["screened_fraction"] = report.screened_fraction();
  j["threshold"] = number(report.threshold);
  j["tolerance"] = report.tolerance;
  j["degenerate_interval"] = report.degenerate_interval;
  j["region"] = {{"kind", report.region.kind},
                 {"steps", report.region.steps},
                 {"initial_radius", number(report.region.initial_radius)},
                 {"cut_used", report.region.cut_used}};
  j["audit"] = report.audit ? to_json(*report.audit) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const SolveResult<double>& r) {
  return {{"primal", number(r.primal)},   {"gap", number(r.gap)},
          {"iterations", r.iterations},   {"epochs", r.epochs},
          {"converged", r.converged},     {"x", vector_json(r.x)}};
}

std::string report_csv(const ScreeningReport<double>& report) {
  std::string out = "index,score,screened\n";
  for (long i = 0; i < report.samples(); ++i)
    out += std::to_string(i) + ',' + format_double(report.scores(i)) + ',' +
           (report.screened[static_cast<std::size_t>(i)] ? "1" : "0") + '\n';
  return out;
}

std::string path_csv(const PathResult<double>& path) {
  std::string out = "lambda,primal,gap,screened_fraction,cumulative_epochs\n";
  for (const auto& pt : path.points)
    out += format_double(pt.lambda) + ',' + format_double(pt.result.primal) + ',' + format_double(pt.result.gap) +
           ',' + format_double(pt.screened_fraction) + ',' + format_double(pt.cumulative_epochs) + '\n';
  return out;
}

std::string compression_csv(const CompressionCurve& curve) {
  std::string out = "fraction,method,mean,std,n_train\n";
  for (const auto& c : curve.cells)
    out += format_double(c.fraction) + ',' + method_id(c.method) + ',' + format_double(c.mean) + ',' +
           format_double(c.std) + ',' + std::to_string(c.n_train) + '\n';
  return out;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 14695981039346656037ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof v);
  }
};

constexpr char kGramMagic[8] = {'S', 'S', 'G', 'R', 'A', 'M', '0', '1'};

}  // namespace

std::uint64_t gram_cache_key(const Dataset<double>& data, const Kernel& kernel) {
  Fnv1a f;
  const Eigen::MatrixXd a = data.design().to_dense();
  f.value(a.rows());
  f.value(a.cols());
  f.bytes(a.data(), sizeof(double) * static_cast<std::size_t>(a.size()));
  f.value(static_cast<int>(kernel.kind));
  f.value(kernel.gamma);
  f.value(kernel.degree);
  f.value(kernel.coef);
  return f.h;
}

Eigen::MatrixXd cached_gram_matrix(const Dataset<double>& data, const Kernel& kernel,
                                   const std::filesystem::path& dir) {
  const std::uint64_t key = gram_cache_key(data, kernel);
  char name[40];
  std::snprintf(name, sizeof name, "gram-%016llx.bin", static_cast<unsigned long long>(key));
  const auto file = dir / name;
  const long n = data.samples();
  if (std::ifstream in{file, std::ios::binary}) {
    char magic[8];
    std::uint64_t stored_key = 0;
    long rows = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&stored_key), sizeof stored_key);
    in.read(reinterpret_cast<char*>(&rows), sizeof rows);
    if (in && std::memcmp(magic, kGramMagic, sizeof magic) == 0 && stored_key == key && rows == n) {
      Eigen::MatrixXd k(n, n);
      in.read(reinterpret_cast<char*>(k.data()), static_cast<std::streamsize>(sizeof(double) * n * n));
      if (in) return k;
    }
  }
  Eigen::MatrixXd k = gram_matrix(data, kernel);
  std::string blob(kGramMagic, sizeof kGramMagic);
  blob.append(reinterpret_cast<const char*>(&key), sizeof key);
  blob.append(reinterpret_cast<const char*>(&n), sizeof n);
  blob.append(reinterpret_cast<const char*>(k.data()), sizeof(double) * static_cast<std::size_t>(k.size()));
  write_atomic(file, blob);
  return k;
}

}  // namespace safescreen::io
