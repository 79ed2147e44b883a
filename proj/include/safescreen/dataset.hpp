#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "errors.hpp"
#include "losses.hpp"

namespace safescreen {

/// Design matrix A (n x p), stored dense or as compressed sparse rows.
/// Every kernel here skips explicit zeros in the sparse path.
template <typename Scalar = double>
class Design {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, long>;

  Design() : storage_(Matrix()) {}
  explicit Design(Matrix dense) : storage_(std::move(dense)) {}
  explicit Design(SparseMatrix sparse) : storage_(std::move(sparse)) {
    std::get<SparseMatrix>(storage_).makeCompressed();
  }

  long rows() const {
    return std::visit([](const auto& m) { return static_cast<long>(m.rows()); }, storage_);
  }
  long cols() const {
    return std::visit([](const auto& m) { return static_cast<long>(m.cols()); }, storage_);
  }
  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(storage_); }
  const Matrix& dense() const { return std::get<Matrix>(storage_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(storage_); }

  Matrix to_dense() const {
    if (is_sparse()) return Matrix(sparse());
    return dense();
  }

  /// A x
  template <typename Derived>
  Vector multiply(const Eigen::MatrixBase<Derived>& x) const {
    require_dimension(x.size(), cols(), "Design::multiply");
    return std::visit([&x](const auto& m) -> Vector { return m * x; }, storage_);
  }

  /// A' w
  template <typename Derived>
  Vector multiply_transpose(const Eigen::MatrixBase<Derived>& w) const {
    require_dimension(w.size(), rows(), "Design::multiply_transpose");
    return std::visit([&w](const auto& m) -> Vector { return m.transpose() * w; }, storage_);
  }

  /// a_i' v
  template <typename Derived>
  Scalar row_dot(long i, const Eigen::MatrixBase<Derived>& v) const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) return d->row(i).dot(v.transpose());
    Scalar acc(0);
    for (typename SparseMatrix::InnerIterator it(sparse(), i); it; ++it) acc += it.value() * v(it.index());
    return acc;
  }

  /// F' a_i for a dense p x k factor F.
  template <typename Derived>
  Vector row_times(long i, const Eigen::MatrixBase<Derived>& factor) const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) return factor.transpose() * d->row(i).transpose();
    Vector out = Vector::Zero(factor.cols());
    for (typename SparseMatrix::InnerIterator it(sparse(), i); it; ++it)
      out += it.value() * factor.row(it.index()).transpose();
    return out;
  }

  Scalar row_squared_norm(long i) const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) return d->row(i).squaredNorm();
    Scalar acc(0);
    for (typename SparseMatrix::InnerIterator it(sparse(), i); it; ++it) acc += it.value() * it.value();
    return acc;
  }

  /// Stored entries of row i (p for dense rows).
  long row_nonzeros(long i) const {
    if (!is_sparse()) return cols();
    return sparse().outerIndexPtr()[i + 1] - sparse().outerIndexPtr()[i];
  }

  Vector row(long i) const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) return d->row(i).transpose();
    return Vector(sparse().row(i).transpose());
  }

  Design select_rows(std::span<const long> indices) const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) {
      Matrix out(static_cast<long>(indices.size()), d->cols());
      for (std::size_t r = 0; r < indices.size(); ++r) out.row(static_cast<long>(r)) = d->row(indices[r]);
      return Design(std::move(out));
    }
    std::vector<Eigen::Triplet<Scalar, long>> triplets;
    for (std::size_t r = 0; r < indices.size(); ++r)
      for (typename SparseMatrix::InnerIterator it(sparse(), indices[r]); it; ++it)
        triplets.emplace_back(static_cast<long>(r), it.index(), it.value());
    SparseMatrix out(static_cast<long>(indices.size()), cols());
    out.setFromTriplets(triplets.begin(), triplets.end());
    return Design(std::move(out));
  }

 private:
  std::variant<Matrix, SparseMatrix> storage_;
};

/// Samples (a_i, b_i). Classification labels are +-1.
template <typename Scalar = double>
class Dataset {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Dataset(Design<Scalar> design, Vector labels, Task task)
      : design_(std::move(design)), labels_(std::move(labels)), task_(task) {
    require_dimension(labels_.size(), design_.rows(), "Dataset labels");
    if (task_ == Task::Classification) {
      for (long i = 0; i < labels_.size(); ++i)
        if (labels_(i) != Scalar(1) && labels_(i) != Scalar(-1))
          throw std::invalid_argument("classification labels must be +1 or -1 (row " + std::to_string(i) + ")");
    }
  }

  long samples() const { return design_.rows(); }
  long features() const { return design_.cols(); }
  Task task() const { return task_; }
  const Design<Scalar>& design() const { return design_; }
  const Vector& labels() const { return labels_; }

  Dataset select(std::span<const long> indices) const {
    Vector b(static_cast<long>(indices.size()));
    for (std::size_t r = 0; r < indices.size(); ++r) b(static_cast<long>(r)) = labels_(indices[r]);
    return Dataset(design_.select_rows(indices), std::move(b), task_);
  }

 private:
  Design<Scalar> design_;
  Vector labels_;
  Task task_;
};

/// Indices i in [0, n) with mask[i] == keep.
inline std::vector<long> indices_where(const std::vector<bool>& mask, bool keep) {
  std::vector<long> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] == keep) out.push_back(static_cast<long>(i));
  return out;
}

}  // namespace safescreen
