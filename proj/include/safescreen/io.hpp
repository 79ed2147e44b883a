#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "compression.hpp"
#include "dataset.hpp"
#include "kernels.hpp"
#include "region.hpp"
#include "screening.hpp"
#include "solver.hpp"

namespace safescreen::io {

/// Malformed input file; the message carries the offending line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Format { Libsvm, Csv };

Format parse_format(std::string_view id);

/// libsvm: "label idx:val ..." with 1-based ascending indices, loaded as
/// sparse rows. csv: numeric columns, last column is the label, an optional
/// non-numeric header row. `features` pins the column count for libsvm.
Dataset<double> load_dataset(const std::filesystem::path& path, Format format, Task task,
                             std::optional<long> features = {});

Dataset<double> parse_libsvm(std::string_view text, Task task, std::optional<long> features = {});
Dataset<double> parse_csv(std::string_view text, Task task);

std::string to_libsvm(const Dataset<double>& data);
std::string to_csv(const Dataset<double>& data);

/// Shortest representation with 17 significant digits, so doubles round-trip.
std::string format_double(double v);

/// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

nlohmann::json to_json(const EllipsoidRegion<double>& region);
nlohmann::json to_json(const AuditReport<double>& audit);
/// Counts, threshold, region metadata and audit verdicts; no per-sample data.
nlohmann::json summary_json(const ScreeningReport<double>& report);
nlohmann::json to_json(const SolveResult<double>& result);

/// index,score,screened
std::string report_csv(const ScreeningReport<double>& report);
/// lambda,primal,gap,screened_fraction,cumulative_epochs
std::string path_csv(const PathResult<double>& path);
/// fraction,method,mean,std,n_train
std::string compression_csv(const CompressionCurve& curve);

/// FNV-1a over the design and the kernel parameters.
std::uint64_t gram_cache_key(const Dataset<double>& data, const Kernel& kernel);

/// Loads K from `dir` when a matching cache file exists, otherwise computes
/// and stores it.
Eigen::MatrixXd cached_gram_matrix(const Dataset<double>& data, const Kernel& kernel,
                                   const std::filesystem::path& dir);

}  // namespace safescreen::io
