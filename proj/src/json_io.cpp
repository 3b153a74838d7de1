#include "sendkit/json_io.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <string>

#include "sendkit/errors.hpp"

namespace sendkit::json_io {

namespace {

/// Reads typed fields of one JSON object, tracking the path for error messages.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path, std::set<std::string> known)
      : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw SchemaError(path_ + ": expected object");
    for (const auto& [key, _] : obj_.items()) {
      if (!known.contains(key)) throw SchemaError(path_ + "." + key + ": unknown field");
    }
  }

  void real(const char* key, double& out, bool allow_infinite = false) const {
    if (!obj_.contains(key)) return;
    const json& v = obj_[key];
    if (v.is_number()) {
      out = v.get<double>();
    } else if (allow_infinite && v.is_string() && (v == "inf" || v == "-inf")) {
      out = v == "inf" ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    } else {
      throw SchemaError(at(key) + (allow_infinite ? ": expected number or \"inf\"/\"-inf\"" : ": expected number"));
    }
  }

  template <class U>
  void count(const char* key, U& out) const {
    if (!obj_.contains(key)) return;
    const json& v = obj_[key];
    if (!v.is_number_unsigned()) throw SchemaError(at(key) + ": expected non-negative integer");
    out = v.get<U>();
  }

  const json* object(const char* key) const { return obj_.contains(key) ? &obj_[key] : nullptr; }
  const json* value(const char* key) const { return object(key); }
  std::string at(const char* key) const { return path_ + "." + key; }

 private:
  const json& obj_;
  std::string path_;
};

template <class F>
void checked(const std::string& path, F&& validate) {
  try {
    validate();
  } catch (const InvalidArgumentError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

scores::EesConfig parse_ees(const json& doc, const std::string& path) {
  scores::EesConfig c;
  const ObjectReader r(doc, path,
                       {"moments", "trace_samples", "quad_points", "lambda_floor", "power_tol", "power_max_iter", "seed",
                        "probes"});
  r.count("moments", c.moments);
  r.count("trace_samples", c.trace_samples);
  r.count("quad_points", c.quad_points);
  r.real("lambda_floor", c.lambda_floor);
  r.real("power_tol", c.power_tol);
  r.count("power_max_iter", c.power_max_iter);
  r.count("seed", c.seed);
  if (const json* p = r.value("probes")) {
    if (*p == "gaussian") {
      c.probes = spectral::ProbeKind::gaussian;
    } else if (*p == "rademacher") {
      c.probes = spectral::ProbeKind::rademacher;
    } else {
      throw SchemaError(r.at("probes") + ": expected \"gaussian\" or \"rademacher\"");
    }
  }
  checked(path, [&] { c.validate(); });
  return c;
}

}  // namespace

SimConfig parse_sim_config(const json& doc) {
  SimConfig cfg;
  const ObjectReader top(doc, "$", {"send", "model", "corpus"});

  if (const json* s = top.object("send")) {
    const ObjectReader r(*s, "$.send",
                         {"epsilon", "delta", "T", "k_percent", "alpha_split", "max_checkpoints", "ees",
                          "gen_temperature", "gen_count", "gen_length", "prompt_length", "score_alpha", "seed"});
    protocol::SenDConfig& c = cfg.send;
    r.real("epsilon", c.epsilon, true);
    r.real("delta", c.delta, true);
    r.count("T", c.T);
    r.real("k_percent", c.k_percent);
    r.real("alpha_split", c.alpha_split);
    r.count("max_checkpoints", c.max_checkpoints);
    if (const json* e = r.object("ees")) c.ees = parse_ees(*e, "$.send.ees");
    r.real("gen_temperature", c.gen_temperature);
    r.count("gen_count", c.gen_count);
    r.count("gen_length", c.gen_length);
    r.count("prompt_length", c.prompt_length);
    r.real("score_alpha", c.score_alpha);
    r.count("seed", c.seed);
    checked("$.send", [&] { c.validate(); });
  }
  if (const json* m = top.object("model")) {
    const ObjectReader r(*m, "$.model",
                         {"vocab", "context", "token_dim", "hidden_layers", "hidden_width", "embed_dim", "learning_rate",
                          "batch_size", "init_seed"});
    toy::ToyModelConfig& c = cfg.model;
    r.count("vocab", c.vocab);
    r.count("context", c.context);
    r.count("token_dim", c.token_dim);
    r.count("hidden_layers", c.hidden_layers);
    r.count("hidden_width", c.hidden_width);
    r.count("embed_dim", c.embed_dim);
    r.real("learning_rate", c.learning_rate);
    r.count("batch_size", c.batch_size);
    r.count("init_seed", c.init_seed);
    checked("$.model", [&] { c.validate(); });
  }
  if (const json* k = top.object("corpus")) {
    const ObjectReader r(*k, "$.corpus", {"sequences", "length", "grammars", "noise", "seed"});
    toy::CorpusSpec& c = cfg.corpus;
    r.count("sequences", c.sequences);
    r.count("length", c.length);
    r.count("grammars", c.grammars);
    r.real("noise", c.noise);
    r.count("seed", c.seed);
    if (c.sequences < 1) throw SchemaError("$.corpus.sequences: must be >= 1");
    if (c.length < 2) throw SchemaError("$.corpus.length: must be >= 2");
    if (c.grammars < 1) throw SchemaError("$.corpus.grammars: must be >= 1");
    if (!(c.noise >= 0.0 && c.noise <= 1.0)) throw SchemaError("$.corpus.noise: must lie in [0, 1]");
  }
  return cfg;
}

namespace {

json real_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

json to_json(const scores::EesConfig& c) {
  return {{"moments", c.moments},
          {"trace_samples", c.trace_samples},
          {"quad_points", c.quad_points},
          {"lambda_floor", c.lambda_floor},
          {"power_tol", c.power_tol},
          {"power_max_iter", c.power_max_iter},
          {"seed", c.seed},
          {"probes", c.probes == spectral::ProbeKind::gaussian ? "gaussian" : "rademacher"}};
}

json to_json(const SimConfig& cfg) {
  const protocol::SenDConfig& s = cfg.send;
  const toy::ToyModelConfig& m = cfg.model;
  const toy::CorpusSpec& k = cfg.corpus;
  return {{"send",
           {{"epsilon", real_or_inf(s.epsilon)},
            {"delta", real_or_inf(s.delta)},
            {"T", s.T},
            {"k_percent", s.k_percent},
            {"alpha_split", s.alpha_split},
            {"max_checkpoints", s.max_checkpoints},
            {"ees", to_json(s.ees)},
            {"gen_temperature", s.gen_temperature},
            {"gen_count", s.gen_count},
            {"gen_length", s.gen_length},
            {"prompt_length", s.prompt_length},
            {"score_alpha", s.score_alpha},
            {"seed", s.seed}}},
          {"model",
           {{"vocab", m.vocab},
            {"context", m.context},
            {"token_dim", m.token_dim},
            {"hidden_layers", m.hidden_layers},
            {"hidden_width", m.hidden_width},
            {"embed_dim", m.embed_dim},
            {"learning_rate", m.learning_rate},
            {"batch_size", m.batch_size},
            {"init_seed", m.init_seed}}},
          {"corpus",
           {{"sequences", k.sequences},
            {"length", k.length},
            {"grammars", k.grammars},
            {"noise", k.noise},
            {"seed", k.seed}}}};
}

json to_json(const scores::ScoreReport& r) {
  json j = {{"method", std::string(scores::to_string(r.method))},
            {"value", r.value},
            {"elapsed_seconds", r.elapsed_seconds},
            {"rows", r.matrix_rows},
            {"cols", r.matrix_cols}};
  if (r.method == scores::Method::exact) {
    j["alpha"] = r.alpha;
  } else {
    j["config"] = to_json(r.config);
    j["spectrum_warning"] = r.spectrum_warning;
  }
  return j;
}

json to_json(const protocol::ComparisonReport& r) {
  auto arm = [](const protocol::ArmSummary& a) {
    return json{{"mean_ees", a.mean_ees},
                {"ees_variance", a.ees_variance},
                {"final_ees", a.final_ees},
                {"final_loss", a.final_loss},
                {"total_wall_seconds", a.total_wall_seconds}};
  };
  return {{"checkpoints", r.checkpoints},
          {"send", arm(r.send)},
          {"normal", arm(r.normal)},
          {"overhead_percent", r.overhead_percent},
          {"max_loss_difference", r.max_loss_difference},
          {"max_ees_difference", r.max_ees_difference}};
}

void write_run_log(std::ostream& out, const protocol::RunLog& log) {
  for (const protocol::CheckpointRecord& rec : log.records) {
    const json j = {{"mode", std::string(protocol::to_string(log.mode))},
                    {"seed", log.seed},
                    {"checkpoint", rec.checkpoint_index},
                    {"train_loss", rec.train_loss},
                    {"ees", rec.ees},
                    {"exact_score", rec.exact_score},
                    {"mask_dims", rec.active_mask.dims()},
                    {"active_mask", rec.active_mask.zeroed()},
                    {"wall_seconds", rec.wall_seconds}};
    out << j.dump() << '\n';
  }
}

protocol::RunLog read_run_log(std::istream& in) {
  protocol::RunLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      log.mode = j.at("mode") == "send" ? protocol::Mode::send : protocol::Mode::normal;
      log.seed = j.at("seed").get<std::uint64_t>();
      protocol::CheckpointRecord rec;
      rec.checkpoint_index = j.at("checkpoint").get<std::size_t>();
      rec.train_loss = j.at("train_loss").get<double>();
      rec.ees = j.at("ees").get<double>();
      rec.exact_score = j.at("exact_score").get<double>();
      rec.active_mask = sensitivity::DropoutMask(j.at("mask_dims").get<std::size_t>(), j.at("active_mask").get<std::vector<std::size_t>>());
      rec.wall_seconds = j.at("wall_seconds").get<double>();
      log.records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw FormatError("run log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

json run_summary(const protocol::RunLog& log) {
  json j = {{"mode", std::string(protocol::to_string(log.mode))},
            {"seed", log.seed},
            {"checkpoints", log.records.size()},
            {"converged", log.converged}};
  if (!log.records.empty()) {
    double wall = 0.0;
    for (const auto& r : log.records) wall += r.wall_seconds;
    j["final_loss"] = log.records.back().train_loss;
    j["final_ees"] = log.records.back().ees;
    j["final_exact_score"] = log.records.back().exact_score;
    j["total_wall_seconds"] = wall;
  }
  return j;
}

}  // namespace sendkit::json_io
