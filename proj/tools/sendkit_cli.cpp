#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sendkit/commands.hpp"

using namespace sendkit;

namespace {

void add_ees_flags(CLI::App* app, scores::EesConfig& ees) {
  app->add_option("-M,--moments", ees.moments, "Chebyshev moments")->check(CLI::PositiveNumber);
  app->add_option("--probes", ees.trace_samples, "trace probes N_z")->check(CLI::PositiveNumber);
  app->add_option("--quad-points", ees.quad_points, "quadrature nodes N_q");
  app->add_option("--floor", ees.lambda_floor, "eigenvalue floor inside the log");
  app->add_option("--power-tol", ees.power_tol, "relative tolerance of the power method");
  app->add_option("--power-max-iter", ees.power_max_iter, "power method iteration cap");
  app->add_option_function<std::string>(
         "--probe-kind",
         [&ees](const std::string& k) {
           ees.probes = k == "rademacher" ? spectral::ProbeKind::rademacher : spectral::ProbeKind::gaussian;
         },
         "gaussian or rademacher")
      ->check(CLI::IsMember({"gaussian", "rademacher"}));
}

const std::map<std::string, scores::Orientation> kOrientations{{"generations", scores::Orientation::generations},
                                                               {"hidden", scores::Orientation::hidden}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EigenScore, efficient EigenScore and sensitivity-dropout toolkit"};
  app.require_subcommand(1);

  cli::ScoreOptions score;
  std::optional<std::uint64_t> score_seed;
  std::string score_out;
  auto* sc = app.add_subcommand("score", "score an EMB1 embedding snapshot");
  sc->add_option("input", score.input, "EMB1 snapshot (d x K)")->required();
  sc->add_option("-m,--method", score.method, "exact, ees or both")->check(CLI::IsMember({"exact", "ees", "both"}));
  sc->add_option("-a,--alpha", score.alpha, "covariance regularizer of the exact score");
  sc->add_option_function<std::string>(
        "--orientation", [&score](const std::string& o) { score.orientation = kOrientations.at(o); },
        "covariance for the exact score: generations or hidden")
      ->check(CLI::IsMember({"generations", "hidden"}));
  sc->add_option("-s,--seed", score_seed, "probe seed (default: $SENDKIT_SEED or 0)");
  sc->add_option("-o,--output", score_out, "JSON output path (default: stdout)");
  add_ees_flags(sc, score.ees);

  cli::BenchOptions bench;
  std::optional<std::uint64_t> bench_seed;
  std::vector<std::string> bench_orient{"generations"};
  auto* bc = app.add_subcommand("bench", "time exact vs efficient scoring over a size grid");
  bc->add_option("--rows", bench.grid.rows, "row sizes")->delimiter(',');
  bc->add_option("--cols", bench.grid.cols, "column sizes")->delimiter(',');
  bc->add_option("--moments", bench.grid.moments, "moment counts")->delimiter(',');
  bc->add_option("--repeats", bench.grid.repeats, "timed repeats per cell (>= 3)");
  bc->add_flag("--zip", bench.grid.zip, "pair rows[i] with cols[i] instead of the cross product");
  bc->add_option("--orientation", bench_orient, "generations, hidden or both")
      ->delimiter(',')
      ->check(CLI::IsMember({"generations", "hidden"}));
  bc->add_option("-a,--alpha", bench.grid.alpha, "covariance regularizer");
  bc->add_option("--probes", bench.grid.ees.trace_samples, "trace probes N_z");
  bc->add_option("--power-tol", bench.grid.ees.power_tol, "relative tolerance of the power method");
  bc->add_option("-s,--seed", bench_seed, "matrix seed (default: $SENDKIT_SEED or 0)");
  bc->add_option("-o,--output", bench.output, "CSV output path")->required();

  cli::SeiOptions sei;
  std::string sei_out;
  auto* ec = app.add_subcommand("sei", "sensitive embedding indices from a checkpoint manifest");
  ec->add_option("manifest", sei.manifest, "manifest JSON")->required();
  ec->add_option("-C,--window", sei.window, "variability window (default: all checkpoints)");
  ec->add_option("-k,--k-percent", sei.k_percent, "percentage of indices to select");
  ec->add_option("-o,--output", sei_out, "JSON output path (default: stdout)");

  cli::SendSimOptions sim;
  std::string sim_config;
  auto* mc = app.add_subcommand("send-sim", "train the toy model with and without sensitivity dropout");
  mc->add_option("-c,--config", sim_config, "JSON config (defaults apply to missing keys)");
  mc->add_option("-m,--mode", sim.mode, "send, normal or both")->check(CLI::IsMember({"send", "normal", "both"}));
  mc->add_option("-o,--output-dir", sim.output_dir, "directory for run logs and summary.json");
  mc->add_option("-s,--seed", sim.seed, "run seed (default: config, then $SENDKIT_SEED, then 0)");
  mc->add_option("-r,--replicates", sim.replicates, "seed-matched replicates")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::ok : cli::usage;
  }

  try {
    if (sc->parsed()) {
      score.ees.seed = cli::resolve_seed(score_seed, 0);
      if (!score_out.empty()) score.output = score_out;
      return cli::cmd_score(score, std::cout, std::cerr);
    }
    if (bc->parsed()) {
      bench.grid.seed = cli::resolve_seed(bench_seed, 0);
      bench.grid.ees.seed = bench.grid.seed;
      bench.grid.orientations.clear();
      for (const auto& o : bench_orient) bench.grid.orientations.push_back(kOrientations.at(o));
      return cli::cmd_bench(bench, std::cout, std::cerr);
    }
    if (ec->parsed()) {
      if (!sei_out.empty()) sei.output = sei_out;
      return cli::cmd_sei(sei, std::cout, std::cerr);
    }
    if (mc->parsed()) {
      if (!sim_config.empty()) sim.config = sim_config;
      return cli::cmd_send_sim(sim, std::cout, std::cerr);
    }
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return cli::exit_code_for(e.kind());
  }
  return cli::usage;
}
