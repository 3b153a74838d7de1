#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sendkit/linalg.hpp"

namespace sendkit::spectral {

using linalg::DenseMatrix;
using linalg::Vector;

enum class ProbeKind { gaussian, rademacher };

/// Chebyshev moments d_0..d_M of the density of states of the shifted
/// operator 2 E^T E - I, normalized by the operator size K.
struct MomentSet {
  std::vector<double> moments;
  std::size_t num_samples = 0;
  std::uint64_t seed = 0;
  /// Set when some probe's Chebyshev iterate grew past 1e8 times its start
  /// norm, which means the operator spectrum left [-1, 1].
  bool spectrum_warning = false;

  std::size_t order() const noexcept { return moments.empty() ? 0 : moments.size() - 1; }
};

/// Chebyshev coefficients c_0..c_M of log((1 + x) / 2) on [-1, 1], i.e. the
/// expansion of log(lambda) on [0, 1] under x = 2 lambda - 1.
struct LogCoefficients {
  std::vector<double> coeffs;
  std::size_t quad_points = 0;
  double lambda_floor = 0.0;
};

/// Quadratic forms z^T T_m(C_s) z, m = 0..M.
struct ChebyshevSequence {
  std::vector<double> values;
  bool spectrum_warning = false;
};

/// T_n(x) by the three-term recurrence; x is clamped to [-1, 1].
double cheb_eval(std::size_t n, double x);

/// q_m = z^T T_m(2 C - I) z for C = E^T E, m = 0..M, using M gram_apply calls.
ChebyshevSequence cheb_apply_sequence(const DenseMatrix& e_norm, const Vector& z, std::size_t order);

/// The same sequences for every column of a K x b probe block, computed with
/// M block products. Row j of the result holds the sequence of probe j.
std::vector<ChebyshevSequence> cheb_apply_block(const DenseMatrix& e_norm, const DenseMatrix& probes,
                                                std::size_t order);

/// Probe vector j of a seeded probe stream; depends only on (seed, j).
Vector probe_vector(std::size_t len, std::uint64_t seed, std::size_t j, ProbeKind kind = ProbeKind::gaussian);

/// Stochastic trace estimate of d_m = (1/K) tr T_m(2 E^T E - I).
MomentSet dos_moments(const DenseMatrix& e_norm, std::size_t order, std::size_t num_samples, std::uint64_t seed,
                      ProbeKind kind = ProbeKind::gaussian);

/// Gauss-Chebyshev nodes x_j = cos(pi (j + 1/2) / N), j = 0..N-1.
std::vector<double> gauss_chebyshev_nodes(std::size_t n);

/// (2 / ((1 + delta_0m) pi)) * integral of f(x) T_m(x) / sqrt(1 - x^2) over [-1, 1]
/// by N-point Gauss-Chebyshev quadrature.
double chebyshev_coefficient(const std::vector<double>& f_at_nodes, std::size_t m);

/// Log coefficients by Gauss-Chebyshev quadrature with log evaluated at
/// max(lambda, lambda_floor). Results are memoized per (M, N_q, floor).
LogCoefficients log_cheb_coefficients(std::size_t order, std::size_t quad_points, double lambda_floor);

/// (1/K) * sum_m d_m c_m.
double combine_ees(const MomentSet& d, const LogCoefficients& c, std::size_t k);

}  // namespace sendkit::spectral
