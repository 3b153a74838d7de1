#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>

#include "sendkit/linalg.hpp"
#include "sendkit/spectral.hpp"

namespace sendkit::scores {

using linalg::DenseMatrix;

/// Approximation knobs for the efficient score.
struct EesConfig {
  std::size_t moments = 20;
  std::size_t trace_samples = 32;
  std::size_t quad_points = 2048;
  double lambda_floor = 1e-8;
  double power_tol = 1e-6;
  std::size_t power_max_iter = 10000;
  std::uint64_t seed = 0;
  spectral::ProbeKind probes = spectral::ProbeKind::gaussian;

  /// Throws InvalidArgumentError naming the first violated constraint.
  void validate() const;
};

inline constexpr double kDefaultAlpha = 1e-3;

enum class Method { exact, ees };

/// Which covariance the exact score decomposes: the K x K Gram over
/// generations, or the d x d covariance over hidden dimensions.
enum class Orientation { generations, hidden };

std::string_view to_string(Method m);
std::string_view to_string(Orientation o);

struct ScoreReport {
  double value = 0.0;
  Method method = Method::exact;
  double elapsed_seconds = 0.0;
  std::size_t matrix_rows = 0;
  std::size_t matrix_cols = 0;
  /// Meaningful for Method::exact.
  double alpha = kDefaultAlpha;
  /// Meaningful for Method::ees.
  EesConfig config;
  /// Set when the Chebyshev iterates left the expected range.
  bool spectrum_warning = false;
};

/// Mean of log(lambda_i) over the eigenvalues of Ec^T Ec + alpha I (K x K,
/// generations) or Ec Ec^T + alpha I (d x d, hidden), where Ec is E with its
/// mean column removed.
ScoreReport exact_eigenscore(const DenseMatrix& e, double alpha = kDefaultAlpha,
                             Orientation orientation = Orientation::generations);

/// Efficient EigenScore: standardize rows, scale by the dominant singular value,
/// estimate Chebyshev DOS moments and combine with the log coefficients.
ScoreReport efficient_eigenscore(const DenseMatrix& e, const EesConfig& cfg = {});

/// Both scores on the same input, each timed on its own.
std::pair<ScoreReport, ScoreReport> score_pair(const DenseMatrix& e, double alpha = kDefaultAlpha,
                                               const EesConfig& cfg = {});

}  // namespace sendkit::scores
