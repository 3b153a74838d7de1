#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string_view>
#include <utility>
#include <vector>

#include "sendkit/linalg.hpp"
#include "sendkit/scores.hpp"
#include "sendkit/sensitivity.hpp"
#include "sendkit/toy_model.hpp"

namespace sendkit::protocol {

using linalg::DenseMatrix;
using linalg::Vector;
using sensitivity::DropoutMask;
using toy::Corpus;
using toy::ToyModel;

struct SenDConfig {
  /// Loss threshold.
  double epsilon = 0.05;
  /// EES threshold.
  double delta = -1.0;
  /// Checkpoints per sensitivity window.
  std::size_t T = 3;
  double k_percent = 20.0;
  /// Train share of the corpus, in percent.
  double alpha_split = 95.0;
  std::size_t max_checkpoints = 30;
  scores::EesConfig ees;
  double gen_temperature = 0.5;
  std::size_t gen_count = 10;
  std::size_t gen_length = 8;
  /// Leading tokens of each tracking sequence used as the generation prompt.
  std::size_t prompt_length = 4;
  /// Covariance regularizer of the exact score logged next to EES.
  double score_alpha = scores::kDefaultAlpha;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Mode { send, normal };
std::string_view to_string(Mode m);

struct CheckpointRecord {
  std::size_t checkpoint_index = 0;
  double train_loss = 0.0;
  /// Mean over the tracking prompts.
  double ees = 0.0;
  double exact_score = 0.0;
  /// Mask in force while this checkpoint was trained.
  DropoutMask active_mask;
  double wall_seconds = 0.0;
  /// Tracking-set sentence embeddings after this checkpoint (send mode only).
  std::vector<Vector> representations;
  /// One n x K generation matrix per tracking prompt, sampled from the unmasked model.
  std::vector<DenseMatrix> generations;
};

struct RunLog {
  Mode mode = Mode::normal;
  std::uint64_t seed = 0;
  std::vector<CheckpointRecord> records;
  /// True when both thresholds were met before max_checkpoints.
  bool converged = false;
};

std::pair<Corpus, Corpus> split_dataset(const Corpus& corpus, double alpha_split, std::uint64_t seed);

/// One shuffled mini-batch pass over `train`; returns the mean next-token loss
/// seen during the pass. Throws DivergenceError on a non-finite loss.
double train_checkpoint(ToyModel& model, const Corpus& train, const DropoutMask& mask, std::uint64_t seed);

/// Per-token penultimate activations of `seq` (one row per token, m x n).
sensitivity::TokenActivations token_activations(const ToyModel& model, const toy::Sequence& seq,
                                                const DropoutMask& mask);

/// Sentence embedding of every tracking sequence under `mask`.
std::vector<Vector> record_representations(const ToyModel& model, const Corpus& tracking, const DropoutMask& mask);

/// Samples `count` continuations of `length` tokens after `prompt` and returns
/// the n x count matrix of their sentence embeddings.
DenseMatrix generate_k_outputs(const ToyModel& model, const toy::Sequence& prompt, std::size_t count,
                               std::size_t length, double temperature, std::uint64_t seed,
                               const DropoutMask& mask = {});

RunLog send_loop(const SenDConfig& cfg, const toy::ToyModelConfig& model_cfg, const Corpus& corpus);
RunLog normal_loop(const SenDConfig& cfg, const toy::ToyModelConfig& model_cfg, const Corpus& corpus);

struct ArmSummary {
  double mean_ees = 0.0;
  double ees_variance = 0.0;
  double final_ees = 0.0;
  double final_loss = 0.0;
  double total_wall_seconds = 0.0;
};

struct ComparisonReport {
  std::size_t checkpoints = 0;
  ArmSummary send;
  ArmSummary normal;
  /// 100 * (send wall / normal wall - 1)
  double overhead_percent = 0.0;
  double max_loss_difference = 0.0;
  double max_ees_difference = 0.0;
};

/// Both logs are truncated to the shorter one.
ComparisonReport compare_runs(const RunLog& send, const RunLog& normal);

}  // namespace sendkit::protocol
