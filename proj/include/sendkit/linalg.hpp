#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace sendkit::linalg {

/// Real vector of 64-bit floats. Entries are checked for finiteness on construction.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len, double fill = 0.0);
  explicit Vector(std::vector<double> data);
  Vector(std::initializer_list<double> values);

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> span() const noexcept { return data_; }
  std::span<double> span() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }
  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

/// Column-major dense real matrix.
///
/// Holds embedding matrices (one column per generation / sample, one row per
/// embedding dimension) and small Gram or covariance matrices. All entries
/// must be finite when the matrix is built from external data.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> column_major);

  static DenseMatrix identity(std::size_t n);
  /// Builds from row-major nested lists; convenient for small literals.
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> col(std::size_t j) const {
    return std::span<const double>(data_).subspan(j * rows_, rows_);
  }
  std::span<double> col(std::size_t j) { return std::span<double>(data_).subspan(j * rows_, rows_); }

  DenseMatrix transposed() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

bool all_finite(std::span<const double> values) noexcept;
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// A * x.
Vector matvec(const DenseMatrix& a, const Vector& x);
/// A^T * x.
Vector matvec_transposed(const DenseMatrix& a, const Vector& x);

/// C * z with C = E^T E, computed as E^T (E z); C is never formed.
Vector gram_apply(const DenseMatrix& e, const Vector& z);
/// Block form of gram_apply: E^T (E Z) for a K x b block of vectors Z.
DenseMatrix gram_apply_block(const DenseMatrix& e, const DenseMatrix& z);

/// A * B.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// Explicit E^T E (K x K, fully populated).
DenseMatrix gram_matrix(const DenseMatrix& e);
/// Explicit E E^T (d x d, fully populated).
DenseMatrix outer_gram_matrix(const DenseMatrix& e);

/// Per row, subtract the mean over the columns and divide by the population
/// standard deviation over the columns. Rows whose standard deviation is below
/// 1e-12 are only centered.
DenseMatrix standardize_columns(const DenseMatrix& e);

/// Subtract the mean column from every column.
DenseMatrix center_columns(const DenseMatrix& e);

/// Dominant singular value of E by power iteration on E^T E. Iterates until the
/// relative change of the estimate drops below `tol`. The start vector is a
/// seeded standard Gaussian.
double power_method(const DenseMatrix& e, double tol, std::size_t max_iter, std::uint64_t seed);

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
/// Deterministic and slow; used as the exactness reference.
Vector symmetric_eigenvalues(const DenseMatrix& c);

/// All eigenvalues of a symmetric matrix, ascending, via LAPACK (dsyevd).
/// The production path for large matrices.
Vector symmetric_eigenvalues_lapack(const DenseMatrix& c);

}  // namespace sendkit::linalg
