#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sendkit/linalg.hpp"

namespace sendkit::sensitivity {

using linalg::DenseMatrix;
using linalg::Vector;

/// Penultimate-layer activations of one input: one row per token, one column
/// per embedding dimension (m x n).
class TokenActivations {
 public:
  explicit TokenActivations(DenseMatrix tokens_by_dims);

  std::size_t tokens() const noexcept { return data_.rows(); }
  std::size_t dims() const noexcept { return data_.cols(); }
  const DenseMatrix& matrix() const noexcept { return data_; }

 private:
  DenseMatrix data_;
};

/// Sentence embeddings of one datapoint over an increasing run of checkpoints.
class CheckpointSeries {
 public:
  struct Point {
    std::size_t checkpoint = 0;
    Vector embedding;
  };

  explicit CheckpointSeries(std::string datapoint_id = {});

  /// Checkpoint indices must strictly increase and lengths must agree.
  void append(std::size_t checkpoint, Vector embedding);

  const std::string& id() const noexcept { return id_; }
  const std::vector<Point>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  std::size_t dims() const noexcept { return points_.empty() ? 0 : points_.front().embedding.size(); }

 private:
  std::string id_;
  std::vector<Point> points_;
};

/// Ascending index set of dimensions zeroed by deterministic dropout.
class DropoutMask {
 public:
  DropoutMask() = default;
  DropoutMask(std::size_t dims, std::vector<std::size_t> zeroed);

  std::size_t dims() const noexcept { return dims_; }
  const std::vector<std::size_t>& zeroed() const noexcept { return zeroed_; }
  bool empty() const noexcept { return zeroed_.empty(); }
  /// Per-dimension keep flags (1 kept, 0 dropped).
  std::vector<double> keep_flags() const;

  friend bool operator==(const DropoutMask&, const DropoutMask&) = default;

 private:
  std::size_t dims_ = 0;
  std::vector<std::size_t> zeroed_;
};

struct SensitivityProfile {
  Vector variability;
  std::vector<std::size_t> selected;
  double k_percent = 0.0;
  std::size_t window = 0;

  DropoutMask mask() const { return DropoutMask(variability.size(), selected); }
};

/// e = 0.5 * (mean over tokens + last token).
Vector sentence_embedding(const TokenActivations& h);

/// |e_t - e_prev| element-wise.
Vector net_change(const Vector& e_t, const Vector& e_prev);

/// V_i = Var(e_i over the last C+1 checkpoints) * sum of the last C net changes.
/// Population variance.
Vector variability(const CheckpointSeries& series, std::size_t window);

/// Element-wise mean of equal-length variability vectors.
Vector average_variability(const std::vector<Vector>& profiles);

/// Number of indices kept by a top-k% selection over n dimensions: ceil(k n / 100).
std::size_t selection_size(std::size_t n, double k_percent);

/// Top ceil(k n / 100) indices by V, ties broken toward the lower index,
/// returned ascending. k_percent must lie in (0, 100).
SensitivityProfile select_sensitive(const Vector& v, double k_percent);

/// Copy of `activations` with masked entries set to exactly zero.
Vector apply_mask(const Vector& activations, const DropoutMask& mask);

/// Copy of E (n x K) with the masked rows zeroed.
DenseMatrix mask_rows(const DenseMatrix& e, const DropoutMask& mask);

struct DropTrial {
  double sei_drop = 0.0;
  double random_drop = 0.0;
};

struct DropExperimentReport {
  /// trials[i][t] for input i and trial t.
  std::vector<std::vector<DropTrial>> trials;
  std::vector<double> per_input_sei_mean;
  std::vector<double> per_input_random_mean;
  double sei_mean = 0.0;
  double sei_std = 0.0;
  double random_mean = 0.0;
  double random_std = 0.0;
  std::size_t mask_size = 0;
};

/// For each input i, embedding_sets[i] is the n x K generation matrix scored at
/// the latest checkpoint and series[i] the same input's sentence embeddings over
/// the preceding checkpoints. Drop Value = exact score before masking minus
/// exact score after zeroing the SEI rows (window C = series length - 1) or a
/// size-matched uniformly random row set. Trial t of input i draws its random
/// set from a sub-seed of (seed, i, t). With k_percent == 0 both arms use the
/// empty mask.
DropExperimentReport sei_dropout_experiment(const std::vector<DenseMatrix>& embedding_sets,
                                            const std::vector<CheckpointSeries>& series, double k_percent,
                                            double alpha, std::size_t trials, std::uint64_t seed);

}  // namespace sendkit::sensitivity
