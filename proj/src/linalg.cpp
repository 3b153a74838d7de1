#include "sendkit/linalg.hpp"

#include <cblas.h>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sendkit/errors.hpp"
#include "sendkit/random.hpp"

namespace sendkit::linalg {

namespace {

constexpr double kDegenerateStd = 1e-12;
constexpr double kSymmetryTol = 1e-9;
constexpr double kJacobiRelTol = 1e-12;
constexpr int kJacobiMaxSweeps = 100;

std::string shape(const DenseMatrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void require_finite(std::span<const double> values, const char* what) {
  if (!all_finite(values)) throw InvalidArgumentError(std::string(what) + " contains non-finite entries");
}

}  // namespace

Vector::Vector(std::size_t len, double fill) : data_(len, fill) {
  if (!std::isfinite(fill)) throw InvalidArgumentError("vector fill value is not finite");
}

Vector::Vector(std::vector<double> data) : data_(std::move(data)) { require_finite(data_, "vector"); }

Vector::Vector(std::initializer_list<double> values) : data_(values) { require_finite(data_, "vector"); }

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> column_major)
    : rows_(rows), cols_(cols), data_(std::move(column_major)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  require_finite(data_, "matrix");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data(r * c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged row list");
    std::size_t j = 0;
    for (double v : row) data[j++ * r + i] = v;
    ++i;
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t j = 0; j < cols_; ++j)
    for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
  return t;
}

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  return cblas_ddot(static_cast<blasint>(a.size()), a.data(), 1, b.data(), 1);
}

double norm2(std::span<const double> a) {
  return cblas_dnrm2(static_cast<blasint>(a.size()), a.data(), 1);
}

Vector matvec(const DenseMatrix& a, const Vector& x) {
  if (a.cols() != x.size()) {
    throw DimensionError("matvec: matrix " + shape(a) + " vs vector of length " + std::to_string(x.size()));
  }
  Vector y(a.rows());
  if (a.rows() == 0 || a.cols() == 0) return y;
  cblas_dgemv(CblasColMajor, CblasNoTrans, static_cast<blasint>(a.rows()), static_cast<blasint>(a.cols()),
              1.0, a.data().data(), static_cast<blasint>(a.rows()), x.span().data(), 1, 0.0,
              y.span().data(), 1);
  return y;
}

Vector matvec_transposed(const DenseMatrix& a, const Vector& x) {
  if (a.rows() != x.size()) {
    throw DimensionError("matvec_transposed: matrix " + shape(a) + " vs vector of length " +
                         std::to_string(x.size()));
  }
  Vector y(a.cols());
  if (a.rows() == 0 || a.cols() == 0) return y;
  cblas_dgemv(CblasColMajor, CblasTrans, static_cast<blasint>(a.rows()), static_cast<blasint>(a.cols()),
              1.0, a.data().data(), static_cast<blasint>(a.rows()), x.span().data(), 1, 0.0,
              y.span().data(), 1);
  return y;
}

Vector gram_apply(const DenseMatrix& e, const Vector& z) {
  if (e.cols() != z.size()) {
    throw DimensionError("gram_apply: matrix " + shape(e) + " vs vector of length " + std::to_string(z.size()));
  }
  return matvec_transposed(e, matvec(e, z));
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: " + shape(a) + " * " + shape(b));
  DenseMatrix c(a.rows(), b.cols());
  if (c.size() == 0 || a.cols() == 0) return c;
  cblas_dgemm(CblasColMajor, CblasNoTrans, CblasNoTrans, static_cast<blasint>(a.rows()),
              static_cast<blasint>(b.cols()), static_cast<blasint>(a.cols()), 1.0, a.data().data(),
              static_cast<blasint>(a.rows()), b.data().data(), static_cast<blasint>(b.rows()), 0.0,
              c.data().data(), static_cast<blasint>(c.rows()));
  return c;
}

DenseMatrix gram_apply_block(const DenseMatrix& e, const DenseMatrix& z) {
  if (e.cols() != z.rows()) throw DimensionError("gram_apply_block: " + shape(e) + " vs block " + shape(z));
  const DenseMatrix w = matmul(e, z);
  DenseMatrix out(e.cols(), z.cols());
  if (out.size() == 0 || e.rows() == 0) return out;
  cblas_dgemm(CblasColMajor, CblasTrans, CblasNoTrans, static_cast<blasint>(e.cols()),
              static_cast<blasint>(z.cols()), static_cast<blasint>(e.rows()), 1.0, e.data().data(),
              static_cast<blasint>(e.rows()), w.data().data(), static_cast<blasint>(w.rows()), 0.0,
              out.data().data(), static_cast<blasint>(out.rows()));
  return out;
}

namespace {

void fill_lower_from_upper(DenseMatrix& c) {
  for (std::size_t j = 0; j < c.cols(); ++j)
    for (std::size_t i = j + 1; i < c.rows(); ++i) c(i, j) = c(j, i);
}

}  // namespace

DenseMatrix gram_matrix(const DenseMatrix& e) {
  DenseMatrix c(e.cols(), e.cols());
  if (c.size() == 0 || e.rows() == 0) return c;
  cblas_dsyrk(CblasColMajor, CblasUpper, CblasTrans, static_cast<blasint>(e.cols()),
              static_cast<blasint>(e.rows()), 1.0, e.data().data(), static_cast<blasint>(e.rows()), 0.0,
              c.data().data(), static_cast<blasint>(c.rows()));
  fill_lower_from_upper(c);
  return c;
}

DenseMatrix outer_gram_matrix(const DenseMatrix& e) {
  DenseMatrix c(e.rows(), e.rows());
  if (c.size() == 0 || e.cols() == 0) return c;
  cblas_dsyrk(CblasColMajor, CblasUpper, CblasNoTrans, static_cast<blasint>(e.rows()),
              static_cast<blasint>(e.cols()), 1.0, e.data().data(), static_cast<blasint>(e.rows()), 0.0,
              c.data().data(), static_cast<blasint>(c.rows()));
  fill_lower_from_upper(c);
  return c;
}

namespace {

std::vector<double> row_means(const DenseMatrix& e) {
  std::vector<double> mean(e.rows(), 0.0);
  for (std::size_t j = 0; j < e.cols(); ++j) {
    const auto c = e.col(j);
    for (std::size_t i = 0; i < e.rows(); ++i) mean[i] += c[i];
  }
  const double inv = 1.0 / static_cast<double>(e.cols());
  for (double& m : mean) m *= inv;
  return mean;
}

}  // namespace

DenseMatrix standardize_columns(const DenseMatrix& e) {
  if (e.cols() < 2) throw InsufficientSamplesError("standardize_columns needs at least 2 columns, got " +
                                                   std::to_string(e.cols()));
  const std::vector<double> mean = row_means(e);
  std::vector<double> var(e.rows(), 0.0);
  DenseMatrix out(e.rows(), e.cols());
  for (std::size_t j = 0; j < e.cols(); ++j) {
    const auto src = e.col(j);
    auto dst = out.col(j);
    for (std::size_t i = 0; i < e.rows(); ++i) {
      dst[i] = src[i] - mean[i];
      var[i] += dst[i] * dst[i];
    }
  }
  const double inv_k = 1.0 / static_cast<double>(e.cols());
  std::vector<double> scale(e.rows());
  for (std::size_t i = 0; i < e.rows(); ++i) {
    const double sd = std::sqrt(var[i] * inv_k);
    scale[i] = sd < kDegenerateStd ? 1.0 : 1.0 / sd;
  }
  for (std::size_t j = 0; j < e.cols(); ++j) {
    auto dst = out.col(j);
    for (std::size_t i = 0; i < e.rows(); ++i) dst[i] *= scale[i];
  }
  return out;
}

DenseMatrix center_columns(const DenseMatrix& e) {
  const std::vector<double> mean = e.cols() == 0 ? std::vector<double>(e.rows(), 0.0) : row_means(e);
  DenseMatrix out(e.rows(), e.cols());
  for (std::size_t j = 0; j < e.cols(); ++j) {
    const auto src = e.col(j);
    auto dst = out.col(j);
    for (std::size_t i = 0; i < e.rows(); ++i) dst[i] = src[i] - mean[i];
  }
  return out;
}

double power_method(const DenseMatrix& e, double tol, std::size_t max_iter, std::uint64_t seed) {
  if (!(tol > 0.0)) throw InvalidArgumentError("power_method: tol must be positive");
  if (max_iter < 1) throw InvalidArgumentError("power_method: max_iter must be at least 1");
  if (e.cols() == 0 || e.rows() == 0 || norm2(e.data()) == 0.0) {
    throw DegenerateSpectrumError("power_method: matrix is zero");
  }

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> start(e.cols());
  for (double& x : start) x = normal(rng);
  Vector v(std::move(start));
  double nv = norm2(v.span());
  cblas_dscal(static_cast<blasint>(v.size()), 1.0 / nv, v.span().data(), 1);

  double sigma = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector w = gram_apply(e, v);
    const double rayleigh = dot(v.span(), w.span());
    const double next = std::sqrt(std::max(rayleigh, 0.0));
    const double nw = norm2(w.span());
    if (nw == 0.0) throw DegenerateSpectrumError("power_method: iterate collapsed to zero");
    cblas_dscal(static_cast<blasint>(w.size()), 1.0 / nw, w.span().data(), 1);
    v = std::move(w);
    if (it > 0 && std::abs(next - sigma) < tol * next) return next;
    sigma = next;
  }
  throw ConvergenceError("power_method: no convergence after " + std::to_string(max_iter) + " iterations",
                         sigma);
}

Vector symmetric_eigenvalues(const DenseMatrix& c) {
  if (c.rows() != c.cols()) throw DimensionError("symmetric_eigenvalues: matrix " + shape(c) + " is not square");
  const std::size_t n = c.rows();
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j + 1; i < n; ++i)
      if (std::abs(c(i, j) - c(j, i)) > kSymmetryTol) {
        throw SymmetryError("symmetric_eigenvalues: |C(" + std::to_string(i) + "," + std::to_string(j) +
                            ") - C(" + std::to_string(j) + "," + std::to_string(i) + ")| exceeds 1e-9");
      }

  DenseMatrix a = c;
  // Work on the symmetrized matrix so both triangles agree exactly.
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j + 1; i < n; ++i) a(i, j) = a(j, i) = 0.5 * (c(i, j) + c(j, i));

  auto off_norm2 = [&] {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return s;
  };
  double total2 = 0.0;
  for (double x : a.data()) total2 += x * x;
  const double target2 = kJacobiRelTol * kJacobiRelTol * total2;

  int sweep = 0;
  while (off_norm2() > target2) {
    if (sweep++ >= kJacobiMaxSweeps) {
      throw ConvergenceError("symmetric_eigenvalues: Jacobi did not converge in " +
                                 std::to_string(kJacobiMaxSweeps) + " sweeps",
                             std::sqrt(off_norm2()));
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = cs * akp - sn * akq;
          a(k, q) = sn * akp + cs * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = cs * apk - sn * aqk;
          a(q, k) = sn * apk + cs * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
      }
    }
  }

  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return Vector(std::move(eig));
}

Vector symmetric_eigenvalues_lapack(const DenseMatrix& c) {
  if (c.rows() != c.cols()) throw DimensionError("symmetric_eigenvalues_lapack: matrix " + shape(c) + " is not square");
  const std::size_t n = c.rows();
  if (n == 0) return Vector();
  std::vector<double> work(c.data().begin(), c.data().end());
  std::vector<double> w(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'U', static_cast<lapack_int>(n), work.data(),
                                         static_cast<lapack_int>(n), w.data());
  if (info > 0) throw ConvergenceError("dsyevd failed to converge", static_cast<double>(info));
  if (info < 0) throw InvalidArgumentError("dsyevd: illegal argument " + std::to_string(-info));
  return Vector(std::move(w));
}

}  // namespace sendkit::linalg
