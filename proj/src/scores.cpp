#include "sendkit/scores.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "sendkit/errors.hpp"

namespace sendkit::scores {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

void EesConfig::validate() const {
  if (trace_samples < 1) throw InvalidArgumentError("EesConfig: trace_samples must be >= 1");
  if (quad_points < 4 * (moments + 1)) throw InvalidArgumentError("EesConfig: quad_points must be >= 4(moments+1)");
  if (!(lambda_floor > 0.0 && lambda_floor <= 1e-3)) throw InvalidArgumentError("EesConfig: lambda_floor must lie in (0, 1e-3]");
  if (!(power_tol > 0.0)) throw InvalidArgumentError("EesConfig: power_tol must be positive");
  if (power_max_iter < 1) throw InvalidArgumentError("EesConfig: power_max_iter must be >= 1");
}

std::string_view to_string(Method m) { return m == Method::exact ? "exact" : "ees"; }

std::string_view to_string(Orientation o) { return o == Orientation::generations ? "generations" : "hidden"; }

ScoreReport exact_eigenscore(const DenseMatrix& e, double alpha, Orientation orientation) {
  const auto start = Clock::now();
  if (e.cols() < 2) {
    throw InsufficientSamplesError("exact_eigenscore needs K >= 2 generations, got " + std::to_string(e.cols()));
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgumentError("exact_eigenscore: alpha must be positive");
  if (!linalg::all_finite(e.data())) throw InvalidArgumentError("exact_eigenscore: non-finite input");

  const DenseMatrix centered = linalg::center_columns(e);
  DenseMatrix cov = orientation == Orientation::generations ? linalg::gram_matrix(centered)
                                                            : linalg::outer_gram_matrix(centered);
  for (std::size_t i = 0; i < cov.rows(); ++i) cov(i, i) += alpha;
  const linalg::Vector eig = linalg::symmetric_eigenvalues_lapack(cov);

  double sum = 0.0;
  for (double lambda : eig) {
    if (!(lambda > 0.0)) throw DegenerateSpectrumError("exact_eigenscore: non-positive eigenvalue " + std::to_string(lambda));
    sum += std::log(lambda);
  }

  ScoreReport r;
  r.method = Method::exact;
  r.value = sum / static_cast<double>(eig.size());
  r.matrix_rows = e.rows();
  r.matrix_cols = e.cols();
  r.alpha = alpha;
  r.elapsed_seconds = seconds_since(start);
  return r;
}

ScoreReport efficient_eigenscore(const DenseMatrix& e, const EesConfig& cfg) {
  const auto start = Clock::now();
  cfg.validate();
  if (e.cols() < 2) {
    throw InsufficientSamplesError("efficient_eigenscore needs K >= 2 generations, got " + std::to_string(e.cols()));
  }

  DenseMatrix scaled = linalg::standardize_columns(e);
  // All rows degenerate: the scaled operator is exactly zero and no rescaling applies.
  if (linalg::norm2(scaled.data()) > 0.0) {
    double sigma = 0.0;
    try {
      sigma = linalg::power_method(scaled, cfg.power_tol, cfg.power_max_iter, cfg.seed);
    } catch (const ConvergenceError& err) {
      throw ConvergenceError("efficient_eigenscore on " + std::to_string(e.rows()) + "x" +
                                 std::to_string(e.cols()) + " input: " + err.what() +
                                 " (last estimate " + std::to_string(err.last_value()) + ")",
                             err.last_value());
    }
    const double inv = 1.0 / sigma;
    for (double& x : scaled.data()) x *= inv;
  }

  const spectral::MomentSet d = spectral::dos_moments(scaled, cfg.moments, cfg.trace_samples, cfg.seed, cfg.probes);
  const spectral::LogCoefficients c = spectral::log_cheb_coefficients(cfg.moments, cfg.quad_points, cfg.lambda_floor);

  ScoreReport r;
  r.method = Method::ees;
  r.value = spectral::combine_ees(d, c, e.cols());
  r.matrix_rows = e.rows();
  r.matrix_cols = e.cols();
  r.config = cfg;
  r.spectrum_warning = d.spectrum_warning;
  r.elapsed_seconds = seconds_since(start);
  return r;
}

std::pair<ScoreReport, ScoreReport> score_pair(const DenseMatrix& e, double alpha, const EesConfig& cfg) {
  ScoreReport exact = exact_eigenscore(e, alpha);
  ScoreReport ees = efficient_eigenscore(e, cfg);
  return {std::move(exact), std::move(ees)};
}

}  // namespace sendkit::scores
