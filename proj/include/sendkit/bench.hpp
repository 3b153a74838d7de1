#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "sendkit/io.hpp"
#include "sendkit/scores.hpp"

namespace sendkit::bench {

struct BenchGrid {
  std::vector<std::size_t> rows{512};
  std::vector<std::size_t> cols{10};
  std::vector<std::size_t> moments{20};
  /// Timed repeats after one warm-up run.
  std::size_t repeats = 3;
  std::uint64_t seed = 0;
  /// Pair rows[i] with cols[i] instead of sweeping the cross product.
  bool zip = false;
  std::vector<scores::Orientation> orientations{scores::Orientation::generations};
  double alpha = scores::kDefaultAlpha;
  /// Base EES settings; `moments` is overridden per cell.
  scores::EesConfig ees;

  void validate() const;
  std::vector<std::pair<std::size_t, std::size_t>> shapes() const;
};

struct Timing {
  double median_seconds = 0.0;
  std::vector<double> samples;
  double value = 0.0;
};

/// One untimed warm-up call, then `repeats` timed calls run back to back.
/// `fn` returns the computed value, which must be identical across calls.
Timing time_median(const std::function<double()>& fn, std::size_t repeats);

/// Seeded standard Gaussian rows x cols matrix.
linalg::DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// Runs the sweep, streaming one CSV row per (shape, orientation, M) cell as it
/// finishes. A cell that fails is reported on `log` and written with NaN fields.
std::vector<io::BenchRow> run_bench(const BenchGrid& grid, std::ostream& csv, std::ostream& log);

}  // namespace sendkit::bench
