#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "sendkit/errors.hpp"
#include "sendkit/protocol.hpp"
#include "sendkit/toy_model.hpp"

using namespace sendkit;
using namespace sendkit::toy;
using sensitivity::DropoutMask;

namespace {

ToyModelConfig small_config() {
  ToyModelConfig c;
  c.vocab = 7;
  c.context = 4;
  c.token_dim = 3;
  c.hidden_layers = 2;
  c.hidden_width = 5;
  c.embed_dim = 6;
  c.init_seed = 11;
  return c;
}

/// Sum of cross-entropies over every position of `seq`, by forward passes only.
double sequence_loss(const ToyModel& m, const Sequence& seq, const std::vector<double>& keep) {
  double total = 0.0;
  for (std::size_t t = 1; t < seq.size(); ++t) {
    const auto f = m.forward(std::span(seq).first(t), keep);
    double mx = f.logits[0];
    for (double l : f.logits) mx = std::max(mx, l);
    double z = 0.0;
    for (double l : f.logits) z += std::exp(l - mx);
    total += mx + std::log(z) - f.logits[seq[t]];
  }
  return total;
}

}  // namespace

TEST(ToyModel, ShapesFollowConfig) {
  const ToyModel m(small_config());
  EXPECT_EQ(m.token_table().size(), 7u * 3u);
  ASSERT_EQ(m.layers().size(), 4u);
  EXPECT_EQ(m.layers()[0].in, 4u * 3u);
  EXPECT_EQ(m.penultimate_layer().out, 6u);
  EXPECT_EQ(m.output_layer().out, 7u);
  const auto f = m.forward(Sequence{1, 2, 3, 4, 5, 6}, std::vector<double>(6, 1.0));
  EXPECT_EQ(f.input.size(), 12u);
  EXPECT_EQ(f.penultimate.size(), 6u);
  EXPECT_EQ(f.logits.size(), 7u);
}

TEST(ToyModel, SeededInitialization) {
  EXPECT_TRUE(ToyModel(small_config()) == ToyModel(small_config()));
  ToyModelConfig other = small_config();
  other.init_seed = 12;
  EXPECT_FALSE(ToyModel(small_config()) == ToyModel(other));
}

TEST(ToyModel, RejectsBadInput) {
  const ToyModel m(small_config());
  EXPECT_THROW(m.forward(Sequence{1, 9}, std::vector<double>(6, 1.0)), InvalidArgumentError);
  EXPECT_THROW(m.forward(Sequence{1}, std::vector<double>(5, 1.0)), DimensionError);
  ToyModelConfig bad = small_config();
  bad.hidden_width = 0;
  EXPECT_THROW(bad.validate(), InvalidArgumentError);
}

TEST(ToyModel, GradientMatchesFiniteDifferences) {
  const ToyModel m(small_config());
  const Sequence seq{3, 1, 4, 1, 5, 6, 2};
  std::vector<double> keep(6, 1.0);
  keep[2] = 0.0;

  ToyModel grads = m;
  grads.zero();
  for (std::size_t t = 1; t < seq.size(); ++t) m.backward(std::span(seq).first(t), seq[t], keep, grads);

  const double h = 1e-6;
  const auto check = [&](auto&& get) {
    ToyModel plus = m, minus = m;
    get(plus) += h;
    get(minus) -= h;
    const double numeric = (sequence_loss(plus, seq, keep) - sequence_loss(minus, seq, keep)) / (2.0 * h);
    ToyModel copy = grads;
    const double analytic = get(copy);
    EXPECT_NEAR(analytic, numeric, 1e-6 * std::max(1.0, std::abs(numeric)));
  };
  for (std::size_t i = 0; i < m.token_table().size(); i += 2) check([i](ToyModel& x) -> double& { return x.token_table()[i]; });
  for (std::size_t l = 0; l < m.layers().size(); ++l) {
    for (std::size_t i = 0; i < m.layers()[l].weight.size(); i += 3)
      check([l, i](ToyModel& x) -> double& { return x.layers()[l].weight[i]; });
    for (std::size_t i = 0; i < m.layers()[l].bias.size(); ++i)
      check([l, i](ToyModel& x) -> double& { return x.layers()[l].bias[i]; });
  }
}

TEST(ToyModel, MaskedUnitsReceiveNoGradient) {
  ToyModel m(small_config());
  const ToyModel before = m;
  const DropoutMask mask(6, {1, 4});
  Corpus data{{1, 2, 3, 4, 5, 6, 1, 2}, {2, 2, 5, 3, 1}, {6, 5, 4, 3, 2, 1}};
  for (std::uint64_t s = 0; s < 3; ++s) protocol::train_checkpoint(m, data, mask, s);

  const auto& p0 = before.penultimate_layer();
  const auto& p1 = m.penultimate_layer();
  const auto& o0 = before.output_layer();
  const auto& o1 = m.output_layer();
  bool others_moved = false;
  for (std::size_t i = 0; i < 6; ++i) {
    const bool masked = i == 1 || i == 4;
    for (std::size_t j = 0; j < p0.in; ++j) {
      if (masked) EXPECT_EQ(p1.weight[i * p0.in + j], p0.weight[i * p0.in + j]);
      else others_moved |= p1.weight[i * p0.in + j] != p0.weight[i * p0.in + j];
    }
    if (masked) EXPECT_EQ(p1.bias[i], p0.bias[i]);
    for (std::size_t r = 0; r < o0.out; ++r)
      if (masked) EXPECT_EQ(o1.weight[r * o0.in + i], o0.weight[r * o0.in + i]);
  }
  EXPECT_TRUE(others_moved);
}

TEST(ToyModel, MaskedPenultimateIsExactlyZero) {
  const ToyModel m(small_config());
  std::vector<double> keep(6, 1.0);
  keep[0] = keep[5] = 0.0;
  const auto f = m.forward(Sequence{2, 3}, keep);
  EXPECT_EQ(f.penultimate[0], 0.0);
  EXPECT_EQ(f.penultimate[5], 0.0);
  EXPECT_NE(f.penultimate[1], 0.0);
}

TEST(ToyModel, ContextUsesOnlyTheLastWindow) {
  const ToyModel m(small_config());
  const std::vector<double> keep(6, 1.0);
  const auto a = m.forward(Sequence{6, 6, 6, 1, 2, 3, 4}, keep);
  const auto b = m.forward(Sequence{5, 1, 2, 3, 4}, keep);
  EXPECT_EQ(a.logits, b.logits);
  const auto padded = m.forward(Sequence{1, 2}, keep);
  const auto explicit_pad = m.forward(Sequence{kPadToken, kPadToken, 1, 2}, keep);
  EXPECT_EQ(padded.logits, explicit_pad.logits);
}

TEST(Corpus, GeneratorContract) {
  CorpusSpec spec;
  const Corpus c = make_corpus(spec, 32);
  ASSERT_EQ(c.size(), 240u);
  std::set<std::uint32_t> seen;
  for (const auto& s : c) {
    ASSERT_EQ(s.size(), 20u);
    for (auto t : s) {
      EXPECT_GE(t, 1u);
      EXPECT_LT(t, 32u);
      seen.insert(t);
    }
  }
  EXPECT_GT(seen.size(), 20u);
  EXPECT_EQ(c, make_corpus(spec, 32));
  spec.seed = 8;
  EXPECT_NE(c, make_corpus(spec, 32));
}

TEST(Corpus, NoiselessGrammarIsAPermutationWalk) {
  CorpusSpec spec;
  spec.noise = 0.0;
  spec.grammars = 1;
  const Corpus c = make_corpus(spec, 10);
  // One permutation: every token has a single successor across the corpus.
  std::map<std::uint32_t, std::uint32_t> next;
  for (const auto& s : c)
    for (std::size_t t = 1; t < s.size(); ++t) {
      const auto it = next.emplace(s[t - 1], s[t]).first;
      EXPECT_EQ(it->second, s[t]);
    }
}

TEST(Corpus, Alternating) {
  const Corpus c = alternating_corpus(3, 5);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0], (Sequence{1, 2, 1, 2, 1}));
}

TEST(Training, AlternatingCorpusLossDecreasesMonotonically) {
  ToyModelConfig cfg;
  const Corpus data = alternating_corpus(32, 12);
  ToyModel m(cfg);
  double prev = m.evaluate_loss(data, {});
  for (std::uint64_t c = 0; c < 10; ++c) {
    protocol::train_checkpoint(m, data, DropoutMask(cfg.embed_dim, {}), c);
    const double loss = m.evaluate_loss(data, {});
    EXPECT_LT(loss, prev) << "checkpoint " << c;
    prev = loss;
  }
}
