#include "sendkit/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sendkit/errors.hpp"
#include "sendkit/random.hpp"
#include "sendkit/scores.hpp"
#include "sendkit/stats.hpp"

namespace sendkit::sensitivity {

TokenActivations::TokenActivations(DenseMatrix tokens_by_dims) : data_(std::move(tokens_by_dims)) {
  if (data_.rows() < 1) throw InvalidArgumentError("token activations: empty token sequence");
  if (!linalg::all_finite(data_.data())) throw InvalidArgumentError("token activations: non-finite entries");
}

CheckpointSeries::CheckpointSeries(std::string datapoint_id) : id_(std::move(datapoint_id)) {}

void CheckpointSeries::append(std::size_t checkpoint, Vector embedding) {
  if (!points_.empty()) {
    if (checkpoint <= points_.back().checkpoint) {
      throw InvalidArgumentError("checkpoint series '" + id_ + "': index " + std::to_string(checkpoint) +
                                 " does not increase");
    }
    if (embedding.size() != dims()) {
      throw DimensionError("checkpoint series '" + id_ + "': embedding length " + std::to_string(embedding.size()) +
                           " != " + std::to_string(dims()));
    }
  }
  points_.push_back({checkpoint, std::move(embedding)});
}

DropoutMask::DropoutMask(std::size_t dims, std::vector<std::size_t> zeroed) : dims_(dims), zeroed_(std::move(zeroed)) {
  std::sort(zeroed_.begin(), zeroed_.end());
  zeroed_.erase(std::unique(zeroed_.begin(), zeroed_.end()), zeroed_.end());
  if (!zeroed_.empty() && zeroed_.back() >= dims_) {
    throw DimensionError("dropout mask index " + std::to_string(zeroed_.back()) + " out of range for " +
                         std::to_string(dims_) + " dims");
  }
}

std::vector<double> DropoutMask::keep_flags() const {
  std::vector<double> keep(dims_, 1.0);
  for (std::size_t i : zeroed_) keep[i] = 0.0;
  return keep;
}

Vector sentence_embedding(const TokenActivations& h) {
  const DenseMatrix& a = h.matrix();
  const std::size_t m = a.rows();
  std::vector<double> e(a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const auto col = a.col(j);
    double sum = 0.0;
    for (double x : col) sum += x;
    e[j] = 0.5 * (sum / static_cast<double>(m) + col[m - 1]);
  }
  return Vector(std::move(e));
}

Vector net_change(const Vector& e_t, const Vector& e_prev) {
  if (e_t.size() != e_prev.size()) {
    throw DimensionError("net_change: lengths " + std::to_string(e_t.size()) + " and " + std::to_string(e_prev.size()));
  }
  Vector out(e_t.size());
  for (std::size_t i = 0; i < e_t.size(); ++i) out[i] = std::abs(e_t[i] - e_prev[i]);
  return out;
}

Vector variability(const CheckpointSeries& series, std::size_t window) {
  if (window < 1) throw InvalidArgumentError("variability: window must be >= 1");
  if (series.size() < window + 1) {
    throw InsufficientSamplesError("variability: window " + std::to_string(window) + " needs " +
                                   std::to_string(window + 1) + " checkpoints, series '" + series.id() + "' has " +
                                   std::to_string(series.size()));
  }
  const auto& pts = series.points();
  const std::size_t first = pts.size() - (window + 1);
  const std::size_t n = series.dims();
  const double count = static_cast<double>(window + 1);

  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t t = first; t < pts.size(); ++t) mean += pts[t].embedding[i];
    mean /= count;
    double var = 0.0;
    for (std::size_t t = first; t < pts.size(); ++t) {
      const double d = pts[t].embedding[i] - mean;
      var += d * d;
    }
    var /= count;
    double delta = 0.0;
    for (std::size_t t = first + 1; t < pts.size(); ++t) delta += std::abs(pts[t].embedding[i] - pts[t - 1].embedding[i]);
    v[i] = var * delta;
  }
  return v;
}

Vector average_variability(const std::vector<Vector>& profiles) {
  if (profiles.empty()) throw InvalidArgumentError("average_variability: empty tracking set");
  const std::size_t n = profiles.front().size();
  Vector avg(n);
  for (const Vector& p : profiles) {
    if (p.size() != n) throw DimensionError("average_variability: profile lengths differ");
    for (std::size_t i = 0; i < n; ++i) avg[i] += p[i];
  }
  const double inv = 1.0 / static_cast<double>(profiles.size());
  for (double& x : avg) x *= inv;
  return avg;
}

std::size_t selection_size(std::size_t n, double k_percent) {
  const double exact = k_percent * static_cast<double>(n) / 100.0;
  // Absorb representation error so that e.g. 10% of 10 is exactly 1.
  const auto size = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  return std::min(size, n);
}

SensitivityProfile select_sensitive(const Vector& v, double k_percent) {
  if (!(k_percent > 0.0 && k_percent < 100.0)) {
    throw InvalidArgumentError("select_sensitive: k_percent must lie in (0, 100), got " + std::to_string(k_percent));
  }
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t count = selection_size(n, k_percent);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) { return v[a] > v[b] || (v[a] == v[b] && a < b); });
  std::vector<std::size_t> selected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(selected.begin(), selected.end());
  return SensitivityProfile{v, std::move(selected), k_percent, 0};
}

Vector apply_mask(const Vector& activations, const DropoutMask& mask) {
  if (activations.size() != mask.dims()) {
    throw DimensionError("apply_mask: activations of length " + std::to_string(activations.size()) +
                         " vs mask over " + std::to_string(mask.dims()) + " dims");
  }
  Vector out = activations;
  for (std::size_t i : mask.zeroed()) out[i] = 0.0;
  return out;
}

DenseMatrix mask_rows(const DenseMatrix& e, const DropoutMask& mask) {
  if (e.rows() != mask.dims()) {
    throw DimensionError("mask_rows: matrix with " + std::to_string(e.rows()) + " rows vs mask over " +
                         std::to_string(mask.dims()) + " dims");
  }
  DenseMatrix out = e;
  for (std::size_t j = 0; j < out.cols(); ++j)
    for (std::size_t i : mask.zeroed()) out(i, j) = 0.0;
  return out;
}

namespace {

std::vector<std::size_t> random_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first `count` entries form a uniform random subset.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace

DropExperimentReport sei_dropout_experiment(const std::vector<DenseMatrix>& embedding_sets,
                                            const std::vector<CheckpointSeries>& series, double k_percent,
                                            double alpha, std::size_t trials, std::uint64_t seed) {
  if (embedding_sets.size() != series.size()) {
    throw DimensionError("sei_dropout_experiment: " + std::to_string(embedding_sets.size()) +
                         " embedding sets vs " + std::to_string(series.size()) + " series");
  }
  if (embedding_sets.empty()) throw InvalidArgumentError("sei_dropout_experiment: no inputs");
  if (trials < 1) throw InvalidArgumentError("sei_dropout_experiment: trials must be >= 1");
  if (!(k_percent >= 0.0 && k_percent < 100.0)) throw InvalidArgumentError("sei_dropout_experiment: k_percent must lie in [0, 100)");

  DropExperimentReport report;
  std::vector<double> all_sei;
  std::vector<double> all_random;
  for (std::size_t i = 0; i < embedding_sets.size(); ++i) {
    const DenseMatrix& e = embedding_sets[i];
    const CheckpointSeries& s = series[i];
    if (s.dims() != e.rows()) {
      throw DimensionError("sei_dropout_experiment: input " + std::to_string(i) + " has " + std::to_string(e.rows()) +
                           " embedding rows but its series has " + std::to_string(s.dims()) + " dims");
    }
    const std::size_t n = e.rows();
    DropoutMask sei_mask(n, {});
    if (k_percent > 0.0) {
      const Vector v = variability(s, s.size() - 1);
      sei_mask = select_sensitive(v, k_percent).mask();
    }
    report.mask_size = sei_mask.zeroed().size();

    const double before = scores::exact_eigenscore(e, alpha).value;
    const double sei_drop = before - scores::exact_eigenscore(mask_rows(e, sei_mask), alpha).value;

    std::vector<DropTrial> row;
    double sei_sum = 0.0;
    double random_sum = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const DropoutMask random_mask(n, random_indices(n, sei_mask.zeroed().size(), derive_seed(seed, i, t)));
      const double random_drop = before - scores::exact_eigenscore(mask_rows(e, random_mask), alpha).value;
      row.push_back({sei_drop, random_drop});
      all_sei.push_back(sei_drop);
      all_random.push_back(random_drop);
      sei_sum += sei_drop;
      random_sum += random_drop;
    }
    report.per_input_sei_mean.push_back(sei_sum / static_cast<double>(trials));
    report.per_input_random_mean.push_back(random_sum / static_cast<double>(trials));
    report.trials.push_back(std::move(row));
  }
  report.sei_mean = stats::mean(all_sei);
  report.sei_std = stats::stddev(all_sei);
  report.random_mean = stats::mean(all_random);
  report.random_std = stats::stddev(all_random);
  return report;
}

}  // namespace sendkit::sensitivity
