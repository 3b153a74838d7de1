#include "sendkit/bench.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <new>
#include <ostream>
#include <string>

#include "sendkit/errors.hpp"
#include "sendkit/random.hpp"
#include "sendkit/stats.hpp"

namespace sendkit::bench {

void BenchGrid::validate() const {
  if (rows.empty() || cols.empty() || moments.empty()) throw InvalidArgumentError("bench grid: empty axis");
  for (auto r : rows)
    if (r < 1) throw InvalidArgumentError("bench grid: row sizes must be positive");
  for (auto c : cols)
    if (c < 2) throw InvalidArgumentError("bench grid: column sizes must be >= 2");
  for (auto m : moments)
    if (m < 1) throw InvalidArgumentError("bench grid: moment counts must be positive");
  if (repeats < 3) throw InvalidArgumentError("bench grid: repeats must be >= 3");
  if (zip && rows.size() != cols.size()) throw InvalidArgumentError("bench grid: zipped axes need equal lengths");
  if (orientations.empty()) throw InvalidArgumentError("bench grid: no orientation");
}

std::vector<std::pair<std::size_t, std::size_t>> BenchGrid::shapes() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (zip) {
    for (std::size_t i = 0; i < rows.size(); ++i) out.emplace_back(rows[i], cols[i]);
  } else {
    for (auto r : rows)
      for (auto c : cols) out.emplace_back(r, c);
  }
  return out;
}

Timing time_median(const std::function<double()>& fn, std::size_t repeats) {
  using Clock = std::chrono::steady_clock;
  Timing t;
  t.value = fn();
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto start = Clock::now();
    const double v = fn();
    t.samples.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    if (v != t.value) throw Error(ErrorKind::invalid_argument, "time_median: repeated call returned a different value");
  }
  t.median_seconds = stats::median(t.samples);
  return t;
}

linalg::DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  linalg::DenseMatrix m(rows, cols);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : m.data()) x = normal(rng);
  return m;
}

std::vector<io::BenchRow> run_bench(const BenchGrid& grid, std::ostream& csv, std::ostream& log) {
  grid.validate();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<io::BenchRow> out;
  io::write_bench_header(csv);
  for (const auto& [rows, cols] : grid.shapes()) {
    for (scores::Orientation orient : grid.orientations) {
      io::BenchRow base;
      base.rows = rows;
      base.cols = cols;
      base.orientation = std::string(scores::to_string(orient));

      auto emit = [&](io::BenchRow r) {
        io::write_bench_row(csv, r);
        csv.flush();
        out.push_back(std::move(r));
      };
      auto fail_all = [&](const std::string& why) {
        log << "bench cell " << rows << "x" << cols << " (" << base.orientation << "): " << why << '\n';
        for (auto m : grid.moments) {
          io::BenchRow r = base;
          r.moments = m;
          r.exact_seconds = r.ees_seconds = r.exact_value = r.ees_value = nan;
          emit(r);
        }
      };

      try {
        const linalg::DenseMatrix e = gaussian_matrix(rows, cols, derive_seed(grid.seed, rows, cols));
        const Timing exact = time_median([&] { return scores::exact_eigenscore(e, grid.alpha, orient).value; }, grid.repeats);
        for (auto m : grid.moments) {
          io::BenchRow r = base;
          r.moments = m;
          r.exact_seconds = exact.median_seconds;
          r.exact_value = exact.value;
          try {
            scores::EesConfig cfg = grid.ees;
            cfg.moments = m;
            if (cfg.quad_points < 4 * (m + 1)) cfg.quad_points = 4 * (m + 1);
            const Timing ees = time_median([&] { return scores::efficient_eigenscore(e, cfg).value; }, grid.repeats);
            r.ees_seconds = ees.median_seconds;
            r.ees_value = ees.value;
          } catch (const std::bad_alloc&) {
            log << "bench cell " << rows << "x" << cols << " M=" << m << ": out of memory\n";
            r.ees_seconds = r.ees_value = nan;
          } catch (const Error& err) {
            log << "bench cell " << rows << "x" << cols << " M=" << m << ": " << err.what() << '\n';
            r.ees_seconds = r.ees_value = nan;
          }
          emit(r);
        }
      } catch (const std::bad_alloc&) {
        fail_all("out of memory");
      } catch (const Error& err) {
        fail_all(err.what());
      }
    }
  }
  return out;
}

}  // namespace sendkit::bench
