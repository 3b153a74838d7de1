#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sendkit/linalg.hpp"
#include "sendkit/random.hpp"
#include "sendkit/sensitivity.hpp"

namespace sendkit::toy {

using Sequence = std::vector<std::uint32_t>;
using Corpus = std::vector<Sequence>;

/// Token 0 is reserved for left padding; corpora use tokens 1..vocab-1.
inline constexpr std::uint32_t kPadToken = 0;

struct ToyModelConfig {
  std::size_t vocab = 32;
  std::size_t context = 16;
  std::size_t token_dim = 8;
  std::size_t hidden_layers = 2;
  std::size_t hidden_width = 64;
  /// Width n of the penultimate layer, the layer SEIs index into.
  std::size_t embed_dim = 64;
  double learning_rate = 0.1;
  std::size_t batch_size = 16;
  std::uint64_t init_seed = 1;

  void validate() const;
};

/// Feed-forward next-token predictor:
/// token embeddings of the context window -> tanh hidden layers -> tanh
/// penultimate layer (width embed_dim) -> vocabulary logits.
class ToyModel {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;  ///< row-major out x in
    std::vector<double> bias;
  };

  explicit ToyModel(const ToyModelConfig& cfg);

  const ToyModelConfig& config() const noexcept { return cfg_; }
  std::size_t embed_dim() const noexcept { return cfg_.embed_dim; }

  /// Activations of one forward pass; `penultimate` already has the mask applied.
  struct Forward {
    std::vector<double> input;
    std::vector<std::vector<double>> hidden;  ///< post-activation, one per hidden layer
    std::vector<double> penultimate;
    std::vector<double> logits;
  };

  /// Predicts the token after `prefix` (only its last `context` tokens are used).
  Forward forward(std::span<const std::uint32_t> prefix, std::span<const double> keep) const;

  /// Mean cross-entropy over every next-token position of `data`.
  double evaluate_loss(const Corpus& data, const sensitivity::DropoutMask& mask) const;

  /// Accumulates the gradient of the cross-entropy of `target` into `grads`
  /// (same shapes as the parameters) and returns the loss.
  double backward(std::span<const std::uint32_t> prefix, std::uint32_t target, std::span<const double> keep,
                  ToyModel& grads) const;

  void zero();
  /// this -= step * grads
  void apply_update(const ToyModel& grads, double step);

  std::vector<double>& token_table() noexcept { return tokens_; }
  const std::vector<double>& token_table() const noexcept { return tokens_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  /// layers()[hidden_layers] is the penultimate layer, the last one the output projection.
  const Layer& penultimate_layer() const { return layers_[cfg_.hidden_layers]; }
  const Layer& output_layer() const { return layers_.back(); }

  friend bool operator==(const ToyModel& a, const ToyModel& b) {
    return a.tokens_ == b.tokens_ && a.layers_.size() == b.layers_.size() &&
           std::equal(a.layers_.begin(), a.layers_.end(), b.layers_.begin(), [](const Layer& x, const Layer& y) {
             return x.weight == y.weight && x.bias == y.bias;
           });
  }

 private:
  void embed_context(std::span<const std::uint32_t> prefix, std::vector<double>& out) const;

  ToyModelConfig cfg_;
  std::vector<double> tokens_;  ///< vocab x token_dim, row-major
  std::vector<Layer> layers_;
};

/// Synthetic corpus: each sequence follows one of `grammars` fixed random
/// permutations of the non-pad tokens from a random start token, and each token
/// is replaced by a uniform random token with probability `noise`.
struct CorpusSpec {
  std::size_t sequences = 240;
  std::size_t length = 20;
  std::size_t grammars = 3;
  double noise = 0.1;
  std::uint64_t seed = 7;
};

Corpus make_corpus(const CorpusSpec& spec, std::size_t vocab);

/// Two-token alternating corpus (1 2 1 2 ...), fully predictable.
Corpus alternating_corpus(std::size_t sequences, std::size_t length);

}  // namespace sendkit::toy
