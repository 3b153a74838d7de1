#include "sendkit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

#include "sendkit/errors.hpp"
#include "sendkit/random.hpp"

namespace sendkit::spectral {

namespace {

constexpr double kBlowupFactor = 1e8;
constexpr std::size_t kProbeChunk = 32;

}  // namespace

double cheb_eval(std::size_t n, double x) {
  x = std::clamp(x, -1.0, 1.0);
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (std::size_t k = 1; k < n; ++k) {
    const double next = 2.0 * x * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

std::vector<ChebyshevSequence> cheb_apply_block(const DenseMatrix& e_norm, const DenseMatrix& probes,
                                                std::size_t order) {
  const std::size_t k = e_norm.cols();
  const std::size_t b = probes.cols();
  if (probes.rows() != k) {
    throw DimensionError("cheb_apply: probe length " + std::to_string(probes.rows()) + " != operator size " +
                         std::to_string(k));
  }
  std::vector<ChebyshevSequence> out(b);
  std::vector<double> start_norm(b);
  for (std::size_t j = 0; j < b; ++j) {
    out[j].values.resize(order + 1);
    out[j].values[0] = linalg::dot(probes.col(j), probes.col(j));
    start_norm[j] = std::sqrt(out[j].values[0]);
  }
  if (order == 0) return out;

  // T_1 z = (2C - I) z
  DenseMatrix prev = probes;
  DenseMatrix cur = linalg::gram_apply_block(e_norm, probes);
  for (std::size_t i = 0; i < cur.size(); ++i) cur.data()[i] = 2.0 * cur.data()[i] - prev.data()[i];

  auto record = [&](std::size_t m, const DenseMatrix& t) {
    for (std::size_t j = 0; j < b; ++j) {
      out[j].values[m] = linalg::dot(probes.col(j), t.col(j));
      if (linalg::norm2(t.col(j)) > kBlowupFactor * start_norm[j]) out[j].spectrum_warning = true;
    }
  };
  record(1, cur);

  // T_{m+1} z = 2 (2C - I) T_m z - T_{m-1} z = 4 C T_m z - 2 T_m z - T_{m-1} z
  for (std::size_t m = 1; m < order; ++m) {
    DenseMatrix next = linalg::gram_apply_block(e_norm, cur);
    auto nd = next.data();
    const auto cd = cur.data();
    const auto pd = prev.data();
    for (std::size_t i = 0; i < nd.size(); ++i) nd[i] = 4.0 * nd[i] - 2.0 * cd[i] - pd[i];
    prev = std::move(cur);
    cur = std::move(next);
    record(m + 1, cur);
  }
  return out;
}

ChebyshevSequence cheb_apply_sequence(const DenseMatrix& e_norm, const Vector& z, std::size_t order) {
  if (z.size() != e_norm.cols()) {
    throw DimensionError("cheb_apply_sequence: probe length " + std::to_string(z.size()) +
                         " != operator size " + std::to_string(e_norm.cols()));
  }
  ChebyshevSequence out;
  out.values.resize(order + 1);
  out.values[0] = linalg::dot(z.span(), z.span());
  if (order == 0) return out;
  const double start = std::sqrt(out.values[0]);

  Vector prev = z;
  Vector cur = linalg::gram_apply(e_norm, z);
  for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = 2.0 * cur[i] - prev[i];
  out.values[1] = linalg::dot(z.span(), cur.span());
  for (std::size_t m = 1; m < order; ++m) {
    Vector next = linalg::gram_apply(e_norm, cur);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = 4.0 * next[i] - 2.0 * cur[i] - prev[i];
    prev = std::move(cur);
    cur = std::move(next);
    out.values[m + 1] = linalg::dot(z.span(), cur.span());
    if (linalg::norm2(cur.span()) > kBlowupFactor * start) out.spectrum_warning = true;
  }
  return out;
}

Vector probe_vector(std::size_t len, std::uint64_t seed, std::size_t j, ProbeKind kind) {
  Rng rng(derive_seed(seed, j));
  std::vector<double> z(len);
  if (kind == ProbeKind::gaussian) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& x : z) x = normal(rng);
  } else {
    for (double& x : z) x = (rng() >> 63) != 0 ? 1.0 : -1.0;
  }
  return Vector(std::move(z));
}

MomentSet dos_moments(const DenseMatrix& e_norm, std::size_t order, std::size_t num_samples, std::uint64_t seed,
                      ProbeKind kind) {
  if (num_samples < 1) throw InvalidArgumentError("dos_moments: need at least one probe");
  const std::size_t k = e_norm.cols();
  if (k == 0) throw DimensionError("dos_moments: operator has no columns");

  MomentSet out;
  out.moments.assign(order + 1, 0.0);
  out.num_samples = num_samples;
  out.seed = seed;

  for (std::size_t first = 0; first < num_samples; first += kProbeChunk) {
    const std::size_t b = std::min(kProbeChunk, num_samples - first);
    DenseMatrix block(k, b);
    for (std::size_t j = 0; j < b; ++j) {
      const Vector z = probe_vector(k, seed, first + j, kind);
      std::copy(z.begin(), z.end(), block.col(j).begin());
    }
    const auto seqs = cheb_apply_block(e_norm, block, order);
    for (const auto& s : seqs) {
      for (std::size_t m = 0; m <= order; ++m) out.moments[m] += s.values[m];
      out.spectrum_warning = out.spectrum_warning || s.spectrum_warning;
    }
  }
  const double scale = 1.0 / (static_cast<double>(k) * static_cast<double>(num_samples));
  for (double& d : out.moments) d *= scale;
  return out;
}

std::vector<double> gauss_chebyshev_nodes(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = std::cos(std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(n));
  }
  return x;
}

double chebyshev_coefficient(const std::vector<double>& f_at_nodes, std::size_t m) {
  const std::size_t n = f_at_nodes.size();
  if (n == 0) throw InvalidArgumentError("chebyshev_coefficient: no quadrature nodes");
  // At node j, T_m(x_j) = cos(m theta_j) with theta_j = pi (j + 1/2) / N.
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double theta = std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
    sum += f_at_nodes[j] * std::cos(static_cast<double>(m) * theta);
  }
  const double weight = m == 0 ? 1.0 : 2.0;
  return weight * sum / static_cast<double>(n);
}

namespace {

LogCoefficients compute_log_coefficients(std::size_t order, std::size_t quad_points, double lambda_floor) {
  const std::vector<double> x = gauss_chebyshev_nodes(quad_points);
  std::vector<double> f(quad_points);
  for (std::size_t j = 0; j < quad_points; ++j) {
    const double lambda = 0.5 * (1.0 + x[j]);
    f[j] = std::log(std::max(lambda, lambda_floor));
  }
  LogCoefficients out;
  out.quad_points = quad_points;
  out.lambda_floor = lambda_floor;
  out.coeffs.resize(order + 1);
  for (std::size_t m = 0; m <= order; ++m) out.coeffs[m] = chebyshev_coefficient(f, m);
  return out;
}

}  // namespace

LogCoefficients log_cheb_coefficients(std::size_t order, std::size_t quad_points, double lambda_floor) {
  if (quad_points < 4 * (order + 1)) {
    throw InvalidArgumentError("log_cheb_coefficients: N_q = " + std::to_string(quad_points) +
                               " is below 4(M+1) = " + std::to_string(4 * (order + 1)));
  }
  if (!(lambda_floor > 0.0 && lambda_floor <= 1e-3)) {
    throw InvalidArgumentError("log_cheb_coefficients: lambda_floor must lie in (0, 1e-3]");
  }
  using Key = std::tuple<std::size_t, std::size_t, double>;
  static std::mutex mutex;
  static std::map<Key, LogCoefficients> cache;
  const Key key{order, quad_points, lambda_floor};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  LogCoefficients c = compute_log_coefficients(order, quad_points, lambda_floor);
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(c)).first->second;
}

double combine_ees(const MomentSet& d, const LogCoefficients& c, std::size_t k) {
  if (d.moments.size() != c.coeffs.size()) {
    throw DimensionError("combine_ees: " + std::to_string(d.moments.size()) + " moments vs " +
                         std::to_string(c.coeffs.size()) + " coefficients");
  }
  if (k == 0) throw InvalidArgumentError("combine_ees: K must be positive");
  double sum = 0.0;
  for (std::size_t m = 0; m < d.moments.size(); ++m) sum += d.moments[m] * c.coeffs[m];
  return sum / static_cast<double>(k);
}

}  // namespace sendkit::spectral
