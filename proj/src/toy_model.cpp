#include "sendkit/toy_model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "sendkit/errors.hpp"

namespace sendkit::toy {

void ToyModelConfig::validate() const {
  if (vocab < 3) throw InvalidArgumentError("toy model: vocab must be >= 3");
  if (context < 1 || token_dim < 1 || hidden_width < 1 || embed_dim < 1 || batch_size < 1) {
    throw InvalidArgumentError("toy model: all sizes must be positive");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgumentError("toy model: learning_rate must be finite and non-negative");
  }
}

namespace {

ToyModel::Layer make_layer(std::size_t in, std::size_t out, Rng& rng) {
  ToyModel::Layer l;
  l.in = in;
  l.out = out;
  l.weight.resize(in * out);
  l.bias.assign(out, 0.0);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
  for (double& w : l.weight) w = normal(rng);
  return l;
}

// y = W x + b
void affine(const ToyModel::Layer& l, std::span<const double> x, std::vector<double>& y) {
  y.resize(l.out);
  for (std::size_t o = 0; o < l.out; ++o) {
    const double* w = l.weight.data() + o * l.in;
    double s = l.bias[o];
    for (std::size_t i = 0; i < l.in; ++i) s += w[i] * x[i];
    y[o] = s;
  }
}

double softmax_xent(std::span<const double> logits, std::uint32_t target, std::vector<double>* probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double log_z = mx + std::log(z);
  if (probs != nullptr) {
    probs->resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) (*probs)[i] = std::exp(logits[i] - log_z);
  }
  return log_z - logits[target];
}

}  // namespace

ToyModel::ToyModel(const ToyModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.init_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  tokens_.resize(cfg_.vocab * cfg_.token_dim);
  for (double& t : tokens_) t = normal(rng);

  std::size_t in = cfg_.context * cfg_.token_dim;
  for (std::size_t l = 0; l < cfg_.hidden_layers; ++l) {
    layers_.push_back(make_layer(in, cfg_.hidden_width, rng));
    in = cfg_.hidden_width;
  }
  layers_.push_back(make_layer(in, cfg_.embed_dim, rng));
  layers_.push_back(make_layer(cfg_.embed_dim, cfg_.vocab, rng));
}

void ToyModel::embed_context(std::span<const std::uint32_t> prefix, std::vector<double>& out) const {
  const std::size_t ctx = cfg_.context;
  const std::size_t td = cfg_.token_dim;
  out.assign(ctx * td, 0.0);
  for (std::size_t slot = 0; slot < ctx; ++slot) {
    // slot ctx-1 holds the most recent token
    const std::size_t back = ctx - slot;
    const std::uint32_t tok = back <= prefix.size() ? prefix[prefix.size() - back] : kPadToken;
    if (tok >= cfg_.vocab) throw InvalidArgumentError("toy model: token " + std::to_string(tok) + " outside vocabulary");
    std::copy_n(tokens_.begin() + static_cast<std::ptrdiff_t>(tok * td), td,
                out.begin() + static_cast<std::ptrdiff_t>(slot * td));
  }
}

ToyModel::Forward ToyModel::forward(std::span<const std::uint32_t> prefix, std::span<const double> keep) const {
  if (keep.size() != cfg_.embed_dim) throw DimensionError("toy model: keep mask length mismatch");
  Forward f;
  embed_context(prefix, f.input);
  std::span<const double> x = f.input;
  f.hidden.resize(cfg_.hidden_layers);
  for (std::size_t l = 0; l < cfg_.hidden_layers; ++l) {
    affine(layers_[l], x, f.hidden[l]);
    for (double& v : f.hidden[l]) v = std::tanh(v);
    x = f.hidden[l];
  }
  affine(penultimate_layer(), x, f.penultimate);
  for (std::size_t i = 0; i < f.penultimate.size(); ++i) f.penultimate[i] = std::tanh(f.penultimate[i]) * keep[i];
  affine(output_layer(), f.penultimate, f.logits);
  return f;
}

double ToyModel::evaluate_loss(const Corpus& data, const sensitivity::DropoutMask& mask) const {
  const std::vector<double> keep = mask.dims() == 0 ? std::vector<double>(cfg_.embed_dim, 1.0) : mask.keep_flags();
  double total = 0.0;
  std::size_t count = 0;
  for (const Sequence& s : data) {
    for (std::size_t t = 1; t < s.size(); ++t) {
      const Forward f = forward(std::span(s).first(t), keep);
      total += softmax_xent(f.logits, s[t], nullptr);
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

double ToyModel::backward(std::span<const std::uint32_t> prefix, std::uint32_t target, std::span<const double> keep,
                          ToyModel& grads) const {
  const Forward f = forward(prefix, keep);
  std::vector<double> delta;
  const double loss = softmax_xent(f.logits, target, &delta);
  delta[target] -= 1.0;

  // Walk the layers backwards; `delta` is dL/d(pre-activation) of the current layer.
  const std::size_t n_layers = layers_.size();
  for (std::size_t li = n_layers; li-- > 0;) {
    const Layer& layer = layers_[li];
    Layer& g = grads.layers_[li];
    std::span<const double> in;
    if (li == n_layers - 1) {
      in = f.penultimate;
    } else if (li == cfg_.hidden_layers) {
      in = cfg_.hidden_layers == 0 ? std::span<const double>(f.input) : std::span<const double>(f.hidden.back());
    } else {
      in = li == 0 ? std::span<const double>(f.input) : std::span<const double>(f.hidden[li - 1]);
    }
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      g.bias[o] += d;
      double* gw = g.weight.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) gw[i] += d * in[i];
    }
    std::vector<double> back(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* w = layer.weight.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) back[i] += w[i] * d;
    }
    if (li == 0 && cfg_.hidden_layers > 0) {
      delta = std::move(back);
      break;
    }
    if (li == n_layers - 1) {
      // into the penultimate tanh, through the mask
      for (std::size_t i = 0; i < back.size(); ++i) {
        const double a = f.penultimate[i];
        back[i] = keep[i] == 0.0 ? 0.0 : back[i] * (1.0 - a * a);
      }
    } else if (li > 0) {
      const std::vector<double>& a = f.hidden[li - 1];
      for (std::size_t i = 0; i < back.size(); ++i) back[i] *= 1.0 - a[i] * a[i];
    } else {
      delta = std::move(back);
      break;
    }
    delta = std::move(back);
  }

  // `delta` is now dL/d(input); scatter into the token table.
  const std::size_t ctx = cfg_.context;
  const std::size_t td = cfg_.token_dim;
  for (std::size_t slot = 0; slot < ctx; ++slot) {
    const std::size_t back = ctx - slot;
    const std::uint32_t tok = back <= prefix.size() ? prefix[prefix.size() - back] : kPadToken;
    double* gt = grads.tokens_.data() + tok * td;
    for (std::size_t k = 0; k < td; ++k) gt[k] += delta[slot * td + k];
  }
  return loss;
}

void ToyModel::zero() {
  std::fill(tokens_.begin(), tokens_.end(), 0.0);
  for (Layer& l : layers_) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

void ToyModel::apply_update(const ToyModel& grads, double step) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) tokens_[i] -= step * grads.tokens_[i];
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Layer& p = layers_[l];
    const Layer& g = grads.layers_[l];
    for (std::size_t i = 0; i < p.weight.size(); ++i) p.weight[i] -= step * g.weight[i];
    for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= step * g.bias[i];
  }
}

Corpus make_corpus(const CorpusSpec& spec, std::size_t vocab) {
  if (vocab < 3) throw InvalidArgumentError("corpus: vocab must be >= 3");
  if (spec.grammars < 1 || spec.length < 2) throw InvalidArgumentError("corpus: need >= 1 grammar and length >= 2");
  Rng rng(spec.seed);
  const auto symbols = static_cast<std::uint32_t>(vocab - 1);

  std::vector<std::vector<std::uint32_t>> next(spec.grammars);
  for (auto& perm : next) {
    perm.resize(symbols);
    std::iota(perm.begin(), perm.end(), 1u);
    std::shuffle(perm.begin(), perm.end(), rng);
  }
  std::uniform_int_distribution<std::uint32_t> token(1, symbols);
  std::uniform_int_distribution<std::size_t> grammar(0, spec.grammars - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Corpus corpus(spec.sequences);
  for (Sequence& s : corpus) {
    const auto& perm = next[grammar(rng)];
    s.resize(spec.length);
    std::uint32_t cur = token(rng);
    for (std::size_t t = 0; t < spec.length; ++t) {
      s[t] = unit(rng) < spec.noise ? token(rng) : cur;
      cur = perm[cur - 1];
    }
  }
  return corpus;
}

Corpus alternating_corpus(std::size_t sequences, std::size_t length) {
  Corpus corpus(sequences, Sequence(length));
  for (Sequence& s : corpus)
    for (std::size_t t = 0; t < length; ++t) s[t] = t % 2 == 0 ? 1 : 2;
  return corpus;
}

}  // namespace sendkit::toy
