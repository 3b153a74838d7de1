#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "sendkit/bench.hpp"
#include "sendkit/errors.hpp"
#include "sendkit/scores.hpp"

namespace sendkit::cli {

/// Process exit codes.
enum ExitCode : int {
  ok = 0,
  internal = 1,
  usage = 2,
  io_failure = 3,
  format = 4,
  convergence = 5,
  divergence = 6,
  document = 7,  ///< manifest or config validation
  numeric = 8,   ///< dimension, sample-count, symmetry or spectrum failures
};

int exit_code_for(ErrorKind kind);

/// Environment variable consulted for the default seed when no flag is given.
inline constexpr const char* kSeedEnv = "SENDKIT_SEED";
/// Flag value if present, else the environment variable, else `fallback`.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback);

struct ScoreOptions {
  std::filesystem::path input;
  std::string method = "both";  ///< exact | ees | both
  double alpha = scores::kDefaultAlpha;
  scores::Orientation orientation = scores::Orientation::generations;
  scores::EesConfig ees;
  std::optional<std::filesystem::path> output;
};

struct BenchOptions {
  bench::BenchGrid grid;
  std::filesystem::path output;
};

struct SeiOptions {
  std::filesystem::path manifest;
  /// Defaults to (number of checkpoints - 1).
  std::optional<std::size_t> window;
  double k_percent = 20.0;
  std::optional<std::filesystem::path> output;
};

struct SendSimOptions {
  std::optional<std::filesystem::path> config;
  std::string mode = "both";  ///< send | normal | both
  std::filesystem::path output_dir = ".";
  std::optional<std::uint64_t> seed;
  /// Seed-matched repetitions; replicate i adds i to the run and model seeds.
  std::size_t replicates = 1;
};

/// Each command writes its result (or, without an output path, prints it to
/// `out`), reports failures on `err` and returns an ExitCode.
int cmd_score(const ScoreOptions& opt, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& err);
int cmd_sei(const SeiOptions& opt, std::ostream& out, std::ostream& err);
int cmd_send_sim(const SendSimOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace sendkit::cli
