#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "sendkit/commands.hpp"
#include "sendkit/io.hpp"
#include "sendkit/sensitivity.hpp"
#include <sys/wait.h>

using namespace sendkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sendkit_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

/// Runs the built CLI and returns its exit status.
int run_cli(const std::string& args) {
  const int status = std::system((std::string(SENDKIT_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Writes a manifest over `checkpoints` random 64-dim embeddings for three datapoints.
fs::path sei_fixture(const fs::path& dir, std::size_t checkpoints, bool constant = false) {
  json dps = json::array();
  for (int d = 0; d < 3; ++d) {
    json files = json::array();
    for (std::size_t c = 0; c < checkpoints; ++c) {
      const std::string name = "d" + std::to_string(d) + "_" + std::to_string(c) + ".emb";
      const auto v = constant ? linalg::Vector(64, 1.0) : oracle::random_vector(64, 10 * d + c);
      io::write_snapshot(dir / name, linalg::DenseMatrix(64, 1, v.values()));
      files.push_back(name);
    }
    dps.push_back({{"id", "p" + std::to_string(d)}, {"files", files}});
  }
  json cps = json::array();
  for (std::size_t c = 0; c < checkpoints; ++c) cps.push_back(c);
  std::ofstream(dir / "manifest.json") << json{{"checkpoints", cps}, {"datapoints", dps}}.dump();
  return dir / "manifest.json";
}

/// JSONL run log with the timing field removed from every line.
std::string without_timings(const fs::path& p) {
  std::ifstream f(p);
  std::string out;
  for (std::string line; std::getline(f, line);) {
    json j = json::parse(line);
    j.erase("wall_seconds");
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace

TEST(ExitCodes, DistinctPerFailureClass) {
  EXPECT_EQ(cli::exit_code_for(ErrorKind::io), cli::io_failure);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::format), cli::format);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::convergence), cli::convergence);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::divergence), cli::divergence);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::invalid_argument), cli::usage);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::schema), cli::document);
  const std::set<int> codes{cli::ok, cli::usage, cli::io_failure, cli::format, cli::convergence, cli::divergence};
  EXPECT_EQ(codes.size(), 6u);
}

TEST(Seed, FlagBeatsEnvironmentBeatsFallback) {
  unsetenv(cli::kSeedEnv);
  EXPECT_EQ(cli::resolve_seed(std::nullopt, 7), 7u);
  setenv(cli::kSeedEnv, "99", 1);
  EXPECT_EQ(cli::resolve_seed(std::nullopt, 7), 99u);
  EXPECT_EQ(cli::resolve_seed(3, 7), 3u);
  setenv(cli::kSeedEnv, "abc", 1);
  EXPECT_THROW(cli::resolve_seed(std::nullopt, 7), InvalidArgumentError);
  unsetenv(cli::kSeedEnv);
}

TEST(Score, WritesBothReports) {
  const fs::path dir = scratch_dir("score");
  io::write_snapshot(dir / "e.emb", oracle::random_matrix(64, 10, 1));
  cli::ScoreOptions opt;
  opt.input = dir / "e.emb";
  opt.output = dir / "out.json";
  std::stringstream out, err;
  ASSERT_EQ(cli::cmd_score(opt, out, err), cli::ok) << err.str();
  const json doc = json::parse(slurp(dir / "out.json"));
  ASSERT_EQ(doc["reports"].size(), 2u);
  EXPECT_EQ(doc["reports"][0]["method"], "exact");
  EXPECT_EQ(doc["reports"][0]["value"].get<double>(),
            scores::exact_eigenscore(io::read_snapshot(dir / "e.emb")).value);
  EXPECT_EQ(doc["reports"][1]["method"], "ees");

  std::stringstream again;
  opt.output.reset();
  ASSERT_EQ(cli::cmd_score(opt, again, err), cli::ok);
  const json printed = json::parse(again.str());
  EXPECT_EQ(printed["reports"][0]["value"], doc["reports"][0]["value"]);
  EXPECT_EQ(printed["reports"][1]["value"], doc["reports"][1]["value"]);
}

TEST(Score, FailuresLeaveNoOutput) {
  const fs::path dir = scratch_dir("score_fail");
  cli::ScoreOptions opt;
  opt.input = dir / "missing.emb";
  opt.output = dir / "out.json";
  std::stringstream out, err;
  EXPECT_EQ(cli::cmd_score(opt, out, err), cli::io_failure);
  EXPECT_FALSE(fs::exists(dir / "out.json"));
  EXPECT_NE(err.str().find("missing.emb"), std::string::npos);

  std::ofstream(dir / "bad.emb") << "XXXXjunk";
  opt.input = dir / "bad.emb";
  EXPECT_EQ(cli::cmd_score(opt, out, err), cli::format);
  EXPECT_FALSE(fs::exists(dir / "out.json"));

  io::write_snapshot(dir / "one.emb", oracle::random_matrix(8, 1, 2));
  opt.input = dir / "one.emb";
  EXPECT_EQ(cli::cmd_score(opt, out, err), cli::numeric);

  io::write_snapshot(dir / "ok.emb", oracle::random_matrix(64, 10, 3));
  opt.input = dir / "ok.emb";
  opt.ees.power_max_iter = 1;
  opt.method = "ees";
  EXPECT_EQ(cli::cmd_score(opt, out, err), cli::convergence);
  EXPECT_FALSE(fs::exists(dir / "out.json"));
}

TEST(Sei, SelectsCeilingOfKPercent) {
  const fs::path dir = scratch_dir("sei");
  cli::SeiOptions opt;
  opt.manifest = sei_fixture(dir, 4);
  opt.output = dir / "sei.json";
  std::stringstream out, err;
  ASSERT_EQ(cli::cmd_sei(opt, out, err), cli::ok) << err.str();
  const json doc = json::parse(slurp(dir / "sei.json"));
  EXPECT_EQ(doc["window"], 3);
  EXPECT_EQ(doc["dims"], 64);
  EXPECT_EQ(doc["selected"].size(), 13u);
  EXPECT_EQ(doc["datapoints"].size(), 3u);
  EXPECT_TRUE(doc["warnings"].empty());

  // Same selection as the library on the same series.
  const auto series = io::load_series(io::read_manifest(opt.manifest));
  std::vector<linalg::Vector> v;
  for (const auto& s : series) v.push_back(sensitivity::variability(s, 3));
  const auto want = sensitivity::select_sensitive(sensitivity::average_variability(v), 20).selected;
  EXPECT_EQ(doc["selected"].get<std::vector<std::size_t>>(), want);
}

TEST(Sei, DegenerateVariabilityWarns) {
  const fs::path dir = scratch_dir("sei_const");
  cli::SeiOptions opt;
  opt.manifest = sei_fixture(dir, 3, true);
  std::stringstream out, err;
  ASSERT_EQ(cli::cmd_sei(opt, out, err), cli::ok);
  const json doc = json::parse(out.str());
  EXPECT_EQ(doc["warnings"].size(), 1u);
  EXPECT_EQ(doc["selected"].get<std::vector<std::size_t>>(),
            (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}));
}

TEST(Sei, TooFewCheckpoints) {
  const fs::path dir = scratch_dir("sei_short");
  cli::SeiOptions opt;
  opt.manifest = sei_fixture(dir, 3);
  opt.window = 3;
  std::stringstream out, err;
  EXPECT_EQ(cli::cmd_sei(opt, out, err), cli::document);
}

TEST(SendSim, ZeroKGivesZeroDifferenceAndReplayIsExact) {
  const fs::path dir = scratch_dir("sim");
  std::ofstream(dir / "cfg.json") << R"({"send": {"k_percent": 0, "max_checkpoints": 4, "seed": 11}})";
  cli::SendSimOptions opt;
  opt.config = dir / "cfg.json";
  opt.output_dir = dir / "a";
  std::stringstream out, err;
  ASSERT_EQ(cli::cmd_send_sim(opt, out, err), cli::ok) << err.str();
  const json summary = json::parse(slurp(dir / "a" / "summary.json"));
  EXPECT_EQ(summary["runs"][0]["seed"], 11);
  EXPECT_EQ(summary["runs"][0]["comparison"]["max_loss_difference"], 0.0);
  EXPECT_EQ(summary["runs"][0]["comparison"]["max_ees_difference"], 0.0);

  opt.output_dir = dir / "b";
  ASSERT_EQ(cli::cmd_send_sim(opt, out, err), cli::ok);
  EXPECT_EQ(without_timings(dir / "a" / "send.jsonl"), without_timings(dir / "b" / "send.jsonl"));
  EXPECT_EQ(without_timings(dir / "a" / "normal.jsonl"), without_timings(dir / "b" / "normal.jsonl"));
}

TEST(SendSim, SeedPrecedence) {
  const fs::path dir = scratch_dir("sim_seed");
  std::ofstream(dir / "cfg.json") << R"({"send": {"max_checkpoints": 3, "seed": 11}})";
  cli::SendSimOptions opt;
  opt.config = dir / "cfg.json";
  opt.mode = "normal";
  opt.output_dir = dir;
  opt.seed = 4;
  std::stringstream out, err;
  ASSERT_EQ(cli::cmd_send_sim(opt, out, err), cli::ok);
  EXPECT_EQ(json::parse(slurp(dir / "summary.json"))["runs"][0]["seed"], 4);
  EXPECT_TRUE(fs::exists(dir / "normal.jsonl"));
  EXPECT_FALSE(fs::exists(dir / "send.jsonl"));
}

TEST(SendSim, SchemaErrorsReportPath) {
  const fs::path dir = scratch_dir("sim_bad");
  std::ofstream(dir / "cfg.json") << R"({"send": {"T": "x"}})";
  cli::SendSimOptions opt;
  opt.config = dir / "cfg.json";
  opt.output_dir = dir / "out";
  std::stringstream out, err;
  EXPECT_EQ(cli::cmd_send_sim(opt, out, err), cli::document);
  EXPECT_NE(err.str().find("$.send.T"), std::string::npos) << err.str();
  EXPECT_FALSE(fs::exists(dir / "out" / "summary.json"));
}

TEST(Bench, WritesParseableCsv) {
  const fs::path dir = scratch_dir("bench");
  cli::BenchOptions opt;
  opt.grid.rows = {32, 64};
  opt.grid.cols = {8};
  opt.grid.moments = {10, 20};
  opt.output = dir / "b.csv";
  std::stringstream out, err;
  ASSERT_EQ(cli::cmd_bench(opt, out, err), cli::ok) << err.str();
  std::ifstream f(opt.output);
  EXPECT_EQ(io::read_bench_csv(f).size(), 4u);
  opt.grid.repeats = 1;
  EXPECT_EQ(cli::cmd_bench(opt, out, err), cli::usage);
}

TEST(Binary, SubcommandsAndUsageErrors) {
  const fs::path dir = scratch_dir("binary");
  io::write_snapshot(dir / "e.emb", oracle::random_matrix(32, 6, 4));
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), cli::usage);
  EXPECT_EQ(run_cli("frobnicate"), cli::usage);
  EXPECT_EQ(run_cli("score " + (dir / "e.emb").string() + " --method nope"), cli::usage);
  EXPECT_EQ(run_cli("score " + (dir / "e.emb").string() + " -o " + (dir / "s.json").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "s.json"));
  EXPECT_EQ(run_cli("score " + (dir / "nope.emb").string()), cli::io_failure);
  EXPECT_EQ(run_cli("sei " + sei_fixture(dir, 3).string() + " -k 20"), 0);
  EXPECT_EQ(run_cli("bench --rows 16 --cols 4 --moments 5 -o " + (dir / "b.csv").string()), 0);
  EXPECT_EQ(run_cli("bench --repeats 2 -o " + (dir / "b.csv").string()), cli::usage);
}

TEST(Binary, EnvironmentSeedAppliesWithoutFlag) {
  const fs::path dir = scratch_dir("binary_env");
  io::write_snapshot(dir / "e.emb", oracle::random_matrix(64, 10, 5));
  const std::string base = std::string(SENDKIT_CLI_PATH) + " score " + (dir / "e.emb").string() + " -m ees";
  ASSERT_EQ(std::system((base + " -s 5 -o " + (dir / "flag.json").string()).c_str()), 0);
  ASSERT_EQ(std::system(("SENDKIT_SEED=5 " + base + " -o " + (dir / "env.json").string()).c_str()), 0);
  ASSERT_EQ(std::system(("SENDKIT_SEED=5 " + base + " -s 6 -o " + (dir / "both.json").string()).c_str()), 0);
  const auto value = [&](const char* f) { return json::parse(slurp(dir / f))["reports"][0]["value"].get<double>(); };
  EXPECT_EQ(value("flag.json"), value("env.json"));
  EXPECT_NE(value("flag.json"), value("both.json"));
}
