#include "sendkit/protocol.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "sendkit/errors.hpp"
#include "sendkit/random.hpp"
#include "sendkit/stats.hpp"

namespace sendkit::protocol {

namespace {

using Clock = std::chrono::steady_clock;

enum Stream : std::uint64_t { split_stream = 1, shuffle_stream = 2, generation_stream = 3 };

std::vector<double> keep_for(const ToyModel& model, const DropoutMask& mask) {
  if (mask.dims() == 0 && mask.empty()) return std::vector<double>(model.embed_dim(), 1.0);
  if (mask.dims() != model.embed_dim()) {
    throw DimensionError("mask over " + std::to_string(mask.dims()) + " dims, model penultimate width " +
                         std::to_string(model.embed_dim()));
  }
  return mask.keep_flags();
}

std::uint32_t sample_token(std::span<const double> logits, double temperature, Rng& rng) {
  std::vector<double> p(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    z += p[i];
  }
  const double u = std::uniform_real_distribution<double>(0.0, z)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<std::uint32_t>(i);
  }
  // u landed on the rounding slack at the top end
  for (std::size_t i = p.size(); i-- > 0;)
    if (p[i] > 0.0) return static_cast<std::uint32_t>(i);
  return 0;
}

}  // namespace

void SenDConfig::validate() const {
  if (!(epsilon > 0.0)) throw InvalidArgumentError("SenDConfig: epsilon must be positive");
  if (std::isnan(delta)) throw InvalidArgumentError("SenDConfig: delta must not be NaN");
  if (T < 2) throw InvalidArgumentError("SenDConfig: T must be >= 2");
  if (!(k_percent >= 0.0 && k_percent < 100.0)) throw InvalidArgumentError("SenDConfig: k_percent must lie in [0, 100)");
  if (!(alpha_split > 0.0 && alpha_split < 100.0)) throw InvalidArgumentError("SenDConfig: alpha_split must lie in (0, 100)");
  if (max_checkpoints < 1) throw InvalidArgumentError("SenDConfig: max_checkpoints must be >= 1");
  if (!(gen_temperature > 0.0) || !std::isfinite(gen_temperature)) {
    throw InvalidArgumentError("SenDConfig: gen_temperature must be positive");
  }
  if (gen_count < 2) throw InvalidArgumentError("SenDConfig: gen_count must be >= 2");
  if (gen_length < 1 || prompt_length < 1) throw InvalidArgumentError("SenDConfig: gen_length and prompt_length must be >= 1");
  if (!(score_alpha > 0.0)) throw InvalidArgumentError("SenDConfig: score_alpha must be positive");
  ees.validate();
}

std::string_view to_string(Mode m) { return m == Mode::send ? "send" : "normal"; }

std::pair<Corpus, Corpus> split_dataset(const Corpus& corpus, double alpha_split, std::uint64_t seed) {
  if (corpus.empty()) throw InvalidArgumentError("split_dataset: empty corpus");
  if (!(alpha_split > 0.0 && alpha_split < 100.0)) throw InvalidArgumentError("split_dataset: alpha_split must lie in (0, 100)");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, split_stream));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(alpha_split * static_cast<double>(corpus.size()) / 100.0 + 1e-9));

  std::pair<Corpus, Corpus> out;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? out.first : out.second).push_back(corpus[order[i]]);
  return out;
}

double train_checkpoint(ToyModel& model, const Corpus& train, const DropoutMask& mask, std::uint64_t seed) {
  if (train.empty()) throw InvalidArgumentError("train_checkpoint: empty training set");
  const std::vector<double> keep = keep_for(model, mask);
  const toy::ToyModelConfig& cfg = model.config();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  ToyModel grads = model;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
    grads.zero();
    std::size_t positions = 0;
    double batch_loss = 0.0;
    for (std::size_t b = start; b < stop; ++b) {
      const toy::Sequence& s = train[order[b]];
      for (std::size_t t = 1; t < s.size(); ++t) {
        batch_loss += model.backward(std::span(s).first(t), s[t], keep, grads);
        ++positions;
      }
    }
    if (!std::isfinite(batch_loss)) {
      throw DivergenceError("train_checkpoint: non-finite loss in batch starting at " + std::to_string(start) +
                            " (learning rate " + std::to_string(cfg.learning_rate) + ")");
    }
    if (positions == 0) continue;
    total += batch_loss;
    count += positions;
    model.apply_update(grads, cfg.learning_rate / static_cast<double>(positions));
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

sensitivity::TokenActivations token_activations(const ToyModel& model, const toy::Sequence& seq,
                                                const DropoutMask& mask) {
  if (seq.empty()) throw InvalidArgumentError("token_activations: empty sequence");
  const std::vector<double> keep = keep_for(model, mask);
  DenseMatrix acts(seq.size(), model.embed_dim());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const ToyModel::Forward f = model.forward(std::span(seq).first(t + 1), keep);
    for (std::size_t j = 0; j < f.penultimate.size(); ++j) acts(t, j) = f.penultimate[j];
  }
  return sensitivity::TokenActivations(std::move(acts));
}

std::vector<Vector> record_representations(const ToyModel& model, const Corpus& tracking, const DropoutMask& mask) {
  if (tracking.empty()) throw InvalidArgumentError("record_representations: empty tracking set");
  std::vector<Vector> out;
  out.reserve(tracking.size());
  for (const toy::Sequence& s : tracking) out.push_back(sensitivity::sentence_embedding(token_activations(model, s, mask)));
  return out;
}

DenseMatrix generate_k_outputs(const ToyModel& model, const toy::Sequence& prompt, std::size_t count,
                               std::size_t length, double temperature, std::uint64_t seed,
                               const DropoutMask& mask) {
  if (count < 2) throw InsufficientSamplesError("generate_k_outputs: need K >= 2, got " + std::to_string(count));
  if (!(temperature > 0.0)) throw InvalidArgumentError("generate_k_outputs: temperature must be positive");
  if (length < 1) throw InvalidArgumentError("generate_k_outputs: length must be >= 1");
  if (prompt.empty()) throw InvalidArgumentError("generate_k_outputs: degenerate prompt (empty)");
  for (std::uint32_t tok : prompt) {
    if (tok == toy::kPadToken || tok >= model.config().vocab) {
      throw InvalidArgumentError("generate_k_outputs: degenerate prompt (token " + std::to_string(tok) + ")");
    }
  }
  const std::vector<double> keep = keep_for(model, mask);
  const std::size_t n = model.embed_dim();

  DenseMatrix out(n, count);
  for (std::size_t k = 0; k < count; ++k) {
    Rng rng(derive_seed(seed, k));
    toy::Sequence text = prompt;
    DenseMatrix acts(length, n);
    for (std::size_t step = 0; step < length; ++step) {
      const ToyModel::Forward f = model.forward(text, keep);
      for (std::size_t j = 0; j < n; ++j) acts(step, j) = f.penultimate[j];
      text.push_back(sample_token(f.logits, temperature, rng));
    }
    const Vector e = sensitivity::sentence_embedding(sensitivity::TokenActivations(std::move(acts)));
    for (std::size_t j = 0; j < n; ++j) out(j, k) = e[j];
  }
  return out;
}

namespace {

RunLog run(const SenDConfig& cfg, const toy::ToyModelConfig& model_cfg, const Corpus& corpus, Mode mode) {
  cfg.validate();
  model_cfg.validate();
  auto [train, tracking] = split_dataset(corpus, cfg.alpha_split, cfg.seed);
  if (tracking.empty()) throw InvalidArgumentError("SenD: tracking split is empty; lower alpha_split or grow the corpus");

  std::vector<toy::Sequence> prompts;
  for (const toy::Sequence& s : tracking) {
    prompts.emplace_back(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(std::min(cfg.prompt_length, s.size())));
  }

  // Build the cached quadrature coefficients before any timed checkpoint.
  spectral::log_cheb_coefficients(cfg.ees.moments, cfg.ees.quad_points, cfg.ees.lambda_floor);

  ToyModel model(model_cfg);
  const std::size_t n = model.embed_dim();
  DropoutMask mask(n, {});
  std::vector<sensitivity::CheckpointSeries> window(tracking.size());
  const bool track = mode == Mode::send && cfg.k_percent > 0.0;

  RunLog log;
  log.mode = mode;
  log.seed = cfg.seed;
  for (std::size_t c = 0; c < cfg.max_checkpoints; ++c) {
    const auto start = Clock::now();
    CheckpointRecord rec;
    rec.checkpoint_index = c;
    rec.active_mask = mask;
    rec.train_loss = train_checkpoint(model, train, mask, derive_seed(cfg.seed, shuffle_stream, c));

    if (mode == Mode::send) {
      rec.representations = record_representations(model, tracking, mask);
      if (track) {
        for (std::size_t i = 0; i < tracking.size(); ++i) window[i].append(c, rec.representations[i]);
      }
    }

    double ees_sum = 0.0;
    double exact_sum = 0.0;
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      DenseMatrix g = generate_k_outputs(model, prompts[p], cfg.gen_count, cfg.gen_length, cfg.gen_temperature,
                                         derive_seed(cfg.seed, generation_stream, c * prompts.size() + p));
      ees_sum += scores::efficient_eigenscore(g, cfg.ees).value;
      exact_sum += scores::exact_eigenscore(g, cfg.score_alpha).value;
      rec.generations.push_back(std::move(g));
    }
    rec.ees = ees_sum / static_cast<double>(prompts.size());
    rec.exact_score = exact_sum / static_cast<double>(prompts.size());

    const bool window_end = (c + 1) % cfg.T == 0;
    if (window_end && track) {
      std::vector<Vector> v;
      v.reserve(window.size());
      for (sensitivity::CheckpointSeries& s : window) {
        v.push_back(sensitivity::variability(s, cfg.T - 1));
        s = sensitivity::CheckpointSeries(s.id());
      }
      mask = sensitivity::select_sensitive(sensitivity::average_variability(v), cfg.k_percent).mask();
    }
    rec.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    const bool done = window_end && rec.train_loss <= cfg.epsilon && rec.ees <= cfg.delta;
    log.records.push_back(std::move(rec));
    if (done) {
      log.converged = true;
      break;
    }
  }
  return log;
}

ArmSummary summarize(const RunLog& log, std::size_t count) {
  std::vector<double> ees;
  ArmSummary s;
  for (std::size_t i = 0; i < count; ++i) {
    ees.push_back(log.records[i].ees);
    s.total_wall_seconds += log.records[i].wall_seconds;
  }
  s.mean_ees = stats::mean(ees);
  s.ees_variance = stats::variance(ees);
  s.final_ees = ees.back();
  s.final_loss = log.records[count - 1].train_loss;
  return s;
}

}  // namespace

RunLog send_loop(const SenDConfig& cfg, const toy::ToyModelConfig& model_cfg, const Corpus& corpus) {
  return run(cfg, model_cfg, corpus, Mode::send);
}

RunLog normal_loop(const SenDConfig& cfg, const toy::ToyModelConfig& model_cfg, const Corpus& corpus) {
  return run(cfg, model_cfg, corpus, Mode::normal);
}

ComparisonReport compare_runs(const RunLog& send, const RunLog& normal) {
  if (send.records.empty() || normal.records.empty()) throw InvalidArgumentError("compare_runs: empty run log");
  ComparisonReport r;
  r.checkpoints = std::min(send.records.size(), normal.records.size());
  r.send = summarize(send, r.checkpoints);
  r.normal = summarize(normal, r.checkpoints);
  r.overhead_percent = r.normal.total_wall_seconds > 0.0
                           ? 100.0 * (r.send.total_wall_seconds / r.normal.total_wall_seconds - 1.0)
                           : 0.0;
  for (std::size_t i = 0; i < r.checkpoints; ++i) {
    r.max_loss_difference = std::max(r.max_loss_difference, std::abs(send.records[i].train_loss - normal.records[i].train_loss));
    r.max_ees_difference = std::max(r.max_ees_difference, std::abs(send.records[i].ees - normal.records[i].ees));
  }
  return r;
}

}  // namespace sendkit::protocol
