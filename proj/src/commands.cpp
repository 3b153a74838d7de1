#include "sendkit/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <new>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "sendkit/io.hpp"
#include "sendkit/json_io.hpp"
#include "sendkit/protocol.hpp"
#include "sendkit/sensitivity.hpp"
#include "sendkit/stats.hpp"

namespace sendkit::cli {

using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return usage;
    case ErrorKind::io: return io_failure;
    case ErrorKind::format: return format;
    case ErrorKind::convergence: return convergence;
    case ErrorKind::divergence: return divergence;
    case ErrorKind::manifest:
    case ErrorKind::schema: return document;
    case ErrorKind::dimension:
    case ErrorKind::insufficient_samples:
    case ErrorKind::symmetry:
    case ErrorKind::degenerate_spectrum: return numeric;
  }
  return internal;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0' || env[0] == '-') throw InvalidArgumentError(std::string(kSeedEnv) + ": not an unsigned integer: '" + env + "'");
    return v;
  }
  return fallback;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

void emit(const std::optional<std::filesystem::path>& path, const json& doc, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (path) {
    write_file(*path, text);
  } else {
    out << text;
  }
}

template <class F>
int guarded(const char* command, std::ostream& err, F&& body) {
  try {
    body();
    return ok;
  } catch (const Error& e) {
    err << command << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::bad_alloc&) {
    err << command << ": out of memory\n";
    return numeric;
  } catch (const std::exception& e) {
    err << command << ": internal error: " << e.what() << '\n';
    return internal;
  }
}

}  // namespace

int cmd_score(const ScoreOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded("score", err, [&] {
    if (opt.method != "exact" && opt.method != "ees" && opt.method != "both") {
      throw InvalidArgumentError("method must be exact, ees or both, got '" + opt.method + "'");
    }
    const linalg::DenseMatrix e = io::read_snapshot(opt.input);
    json reports = json::array();
    if (opt.method != "ees") {
      json r = json_io::to_json(scores::exact_eigenscore(e, opt.alpha, opt.orientation));
      r["orientation"] = std::string(scores::to_string(opt.orientation));
      reports.push_back(std::move(r));
    }
    if (opt.method != "exact") {
      const scores::ScoreReport r = scores::efficient_eigenscore(e, opt.ees);
      if (r.spectrum_warning) err << "score: warning: Chebyshev iterates left the expected range\n";
      reports.push_back(json_io::to_json(r));
    }
    emit(opt.output, json{{"input", opt.input.string()}, {"reports", reports}}, out);
  });
}

int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded("bench", err, [&] {
    opt.grid.validate();
    std::ofstream csv(opt.output, std::ios::trunc);
    if (!csv) throw IoError("cannot open " + opt.output.string() + " for writing");
    const auto rows = bench::run_bench(opt.grid, csv, err);
    if (!csv) throw IoError("write failed for " + opt.output.string());
    out << "bench: wrote " << rows.size() << " rows to " << opt.output.string() << '\n';
  });
}

int cmd_sei(const SeiOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded("sei", err, [&] {
    const io::CheckpointManifest manifest = io::read_manifest(opt.manifest);
    const std::size_t available = manifest.checkpoints.size();
    if (available < 2) throw ManifestError("$.checkpoints: need at least 2 checkpoints, manifest lists " + std::to_string(available));
    const std::size_t window = opt.window.value_or(available - 1);
    if (window < 1) throw InvalidArgumentError("window must be >= 1");
    if (available < window + 1) {
      throw ManifestError("$.checkpoints: window " + std::to_string(window) + " needs " + std::to_string(window + 1) +
                          " checkpoints, manifest lists " + std::to_string(available));
    }
    const auto series = io::load_series(manifest);

    json per = json::array();
    std::vector<linalg::Vector> profiles;
    for (const auto& s : series) {
      profiles.push_back(sensitivity::variability(s, window));
      per.push_back({{"id", s.id()}, {"variability", profiles.back().values()}});
    }
    const linalg::Vector avg = sensitivity::average_variability(profiles);
    const auto profile = sensitivity::select_sensitive(avg, opt.k_percent);

    json warnings = json::array();
    bool all_zero = true;
    for (double v : avg) all_zero = all_zero && v == 0.0;
    if (all_zero) {
      warnings.push_back("degenerate variability: V is zero in every dimension; selection follows the index tie rule");
      err << "sei: warning: " << warnings.back().get<std::string>() << '\n';
    }
    emit(opt.output,
         json{{"window", window},
              {"k_percent", opt.k_percent},
              {"dims", avg.size()},
              {"datapoints", per},
              {"average_variability", avg.values()},
              {"selected", profile.selected},
              {"warnings", warnings}},
         out);
  });
}

int cmd_send_sim(const SendSimOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded("send-sim", err, [&] {
    if (opt.mode != "send" && opt.mode != "normal" && opt.mode != "both") {
      throw InvalidArgumentError("mode must be send, normal or both, got '" + opt.mode + "'");
    }
    if (opt.replicates < 1) throw InvalidArgumentError("replicates must be >= 1");

    json_io::SimConfig cfg;
    bool config_has_seed = false;
    if (opt.config) {
      json doc;
      try {
        doc = json::parse(io::read_text_file(*opt.config));
      } catch (const json::parse_error& e) {
        throw SchemaError("$: " + opt.config->string() + " is not valid JSON: " + e.what());
      }
      cfg = json_io::parse_sim_config(doc);
      config_has_seed = doc.contains("send") && doc["send"].is_object() && doc["send"].contains("seed");
    }
    cfg.send.seed = config_has_seed && !opt.seed ? cfg.send.seed : resolve_seed(opt.seed, cfg.send.seed);

    std::filesystem::create_directories(opt.output_dir);
    const toy::Corpus corpus = toy::make_corpus(cfg.corpus, cfg.model.vocab);

    json runs = json::array();
    std::vector<double> final_send, final_normal, overheads;
    std::size_t lower_variance = 0;
    for (std::size_t i = 0; i < opt.replicates; ++i) {
      json_io::SimConfig rc = cfg;
      rc.send.seed += i;
      rc.model.init_seed += i;
      const std::string suffix = opt.replicates == 1 ? "" : "_" + std::to_string(i);
      json entry = {{"replicate", i}, {"seed", rc.send.seed}, {"init_seed", rc.model.init_seed}};

      std::optional<protocol::RunLog> send_log, normal_log;
      auto run_arm = [&](protocol::Mode m) {
        protocol::RunLog log = m == protocol::Mode::send ? protocol::send_loop(rc.send, rc.model, corpus)
                                                         : protocol::normal_loop(rc.send, rc.model, corpus);
        std::ostringstream lines;
        json_io::write_run_log(lines, log);
        const std::string name = std::string(protocol::to_string(m)) + suffix + ".jsonl";
        write_file(opt.output_dir / name, lines.str());
        entry[std::string(protocol::to_string(m))] = json_io::run_summary(log);
        if (!log.converged) {
          err << "send-sim: " << protocol::to_string(m) << " run (seed " << rc.send.seed << ") stopped at max_checkpoints without meeting the thresholds\n";
        }
        return log;
      };
      if (opt.mode != "normal") send_log = run_arm(protocol::Mode::send);
      if (opt.mode != "send") normal_log = run_arm(protocol::Mode::normal);
      if (send_log && normal_log) {
        const protocol::ComparisonReport cmp = protocol::compare_runs(*send_log, *normal_log);
        entry["comparison"] = json_io::to_json(cmp);
        if (cmp.send.ees_variance < cmp.normal.ees_variance) ++lower_variance;
        final_send.push_back(cmp.send.final_ees);
        final_normal.push_back(cmp.normal.final_ees);
        overheads.push_back(cmp.overhead_percent);
      }
      runs.push_back(std::move(entry));
    }

    json summary = {{"config", json_io::to_json(cfg)}, {"mode", opt.mode}, {"replicates", opt.replicates}, {"runs", runs}};
    if (!final_send.empty()) {
      summary["aggregate"] = {{"pairs", final_send.size()},
                              {"send_lower_ees_variance", lower_variance},
                              {"mean_final_ees_send", stats::mean(final_send)},
                              {"mean_final_ees_normal", stats::mean(final_normal)},
                              {"mean_overhead_percent", stats::mean(overheads)}};
    }
    write_file(opt.output_dir / "summary.json", summary.dump(2) + "\n");
    out << "send-sim: wrote " << opt.replicates << " replicate(s) to " << opt.output_dir.string() << '\n';
  });
}

}  // namespace sendkit::cli
