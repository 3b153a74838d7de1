// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sendkit/bench.hpp"
#include "sendkit/json_io.hpp"
#include "sendkit/linalg.hpp"
#include "sendkit/protocol.hpp"
#include "sendkit/scores.hpp"
#include "sendkit/sensitivity.hpp"
#include "sendkit/spectral.hpp"
#include "sendkit/stats.hpp"

using namespace sendkit;
using linalg::DenseMatrix;
using linalg::Vector;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// d x K Gaussian matrix around a shared random column; column j has spread r^j
/// with a per-matrix decay r in [0.2, 1].
DenseMatrix decaying_spread_matrix(std::size_t d, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double r = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
  std::normal_distribution<double> normal;
  std::vector<double> base(d);
  for (double& x : base) x = normal(rng);
  DenseMatrix e(d, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < d; ++i) e(i, j) = base[i] + std::pow(r, static_cast<double>(j)) * normal(rng);
  return e;
}

Outcome trace_log_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> spectrum(20);
    for (double& x : spectrum) x = u(rng);
    const auto a = oracle::spd_with_spectrum(spectrum, 1000 + s);
    const Vector eig = linalg::symmetric_eigenvalues(oracle::from_rows(a));
    double sum_log = 0.0;
    for (double l : eig) sum_log += std::log(l);
    const double logdet = oracle::lu_log_abs_det(a);
    worst = std::max(worst, std::abs(sum_log - logdet) / std::abs(logdet));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0, fmt("max relative gap %.3g, %.2f s", worst, secs)};
}

Outcome ees_tracks_exact() {
  const auto t0 = std::chrono::steady_clock::now();
  scores::EesConfig cfg;
  cfg.moments = 20;
  cfg.trace_samples = 32;
  std::vector<double> exact, ees, iid_exact, iid_ees;
  for (std::uint64_t s = 0; s < 500; ++s) {
    cfg.seed = s;
    const DenseMatrix e = decaying_spread_matrix(512, 10, s);
    exact.push_back(scores::exact_eigenscore(e).value);
    ees.push_back(scores::efficient_eigenscore(e, cfg).value);
    const DenseMatrix g = bench::gaussian_matrix(512, 10, s);
    iid_exact.push_back(scores::exact_eigenscore(g).value);
    iid_ees.push_back(scores::efficient_eigenscore(g, cfg).value);
  }
  const double rho = stats::spearman(exact, ees);
  const double secs = seconds_since(t0);
  return {rho >= 0.90 && secs < 300.0,
          fmt("spearman %.4f over 500 decaying-spread matrices (iid draws: %.4f), %.1f s", rho,
              stats::spearman(iid_exact, iid_ees), secs)};
}

Outcome runtime_crossover() {
  const auto t0 = std::chrono::steady_clock::now();
  const scores::EesConfig cfg;
  struct Cell {
    std::size_t rows, cols;
    double exact, ees;
  };
  std::vector<Cell> cells;
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{3200, 3200}, {12500, 8000}}) {
    const DenseMatrix e = bench::gaussian_matrix(rows, cols, 0);
    const auto exact = bench::time_median([&] { return scores::exact_eigenscore(e).value; }, 3);
    const auto ees = bench::time_median([&] { return scores::efficient_eigenscore(e, cfg).value; }, 3);
    cells.push_back({rows, cols, exact.median_seconds, ees.median_seconds});
    std::printf("  crossover cell %zux%zu: exact %.2f s, ees %.2f s\n", rows, cols, exact.median_seconds,
                ees.median_seconds);
    std::fflush(stdout);
  }
  const double secs = seconds_since(t0);
  const bool small_ok = cells[0].ees < cells[0].exact;
  const double ratio = cells[1].ees / cells[1].exact;
  return {small_ok && ratio <= 0.7 && secs < 900.0,
          fmt("1e7: ees/exact %.3f; 1e8: ees/exact %.3f; %.0f s total", cells[0].ees / cells[0].exact, ratio,
              secs)};
}

Outcome moments_monotone() {
  const DenseMatrix e = bench::gaussian_matrix(4096, 1024, 1);
  std::vector<double> medians;
  std::string detail;
  for (std::size_t m : {20, 50, 100, 200}) {
    scores::EesConfig cfg;
    cfg.moments = m;
    medians.push_back(bench::time_median([&] { return scores::efficient_eigenscore(e, cfg).value; }, 3).median_seconds);
    detail += fmt("M=%zu %.3f s; ", m, medians.back());
  }
  bool ok = true;
  for (std::size_t i = 1; i < medians.size(); ++i) ok &= medians[i] >= 0.95 * medians[i - 1];
  return {ok, detail + "at 4096x1024"};
}

Outcome hutchinson_quality() {
  std::vector<double> spectrum(50);
  for (std::size_t i = 0; i < 50; ++i) spectrum[i] = 0.1 + 0.05 * static_cast<double>(i);
  const auto a = oracle::spd_with_spectrum(spectrum, 77);
  double trace = 0.0;
  for (std::size_t i = 0; i < 50; ++i) trace += a[i][i];

  double sum = 0.0;
  for (std::size_t j = 0; j < 100000; ++j) sum += oracle::quadratic_form(a, spectral::probe_vector(50, 78, j).values());
  const double rel = std::abs(sum / 100000.0 - trace) / trace;

  // Empirical standard error of the N_z-probe mean over 300 disjoint replications.
  const std::size_t reps = 300;
  std::vector<double> se;
  for (std::size_t nz : {10, 100, 1000}) {
    std::vector<double> estimates;
    for (std::size_t r = 0; r < reps; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < nz; ++j)
        s += oracle::quadratic_form(a, spectral::probe_vector(50, 79 + nz, r * nz + j).values());
      estimates.push_back(s / static_cast<double>(nz));
    }
    se.push_back(stats::stddev(estimates));
  }
  bool scaling_ok = true;
  std::string detail = fmt("relative error %.4f%% with 1e5 probes; SE ratio vs 1/sqrt(N_z):", 100.0 * rel);
  for (std::size_t i = 0; i < 3; ++i) {
    const double predicted = se[0] * std::sqrt(10.0 / std::pow(10.0, static_cast<double>(i + 1)));
    const double factor = se[i] / predicted;
    scaling_ok &= factor >= 0.5 && factor <= 2.0;
    detail += fmt(" %.3f", factor);
  }
  return {rel < 0.01 && scaling_ok, detail};
}

Outcome quadrature_correctness() {
  const double floor = 1e-8;
  const auto c = spectral::log_cheb_coefficients(20, 2048, floor);
  const double knee = 2.0 * std::acos(std::sqrt(floor));
  double worst = 0.0;
  std::size_t worst_m = 0;
  for (std::size_t m = 0; m <= 20; ++m) {
    const double md = static_cast<double>(m);
    const auto f = [md](double theta) { return 2.0 * std::log(std::cos(theta / 2.0)) * std::cos(md * theta); };
    const double tail = m == 0 ? (std::numbers::pi - knee) * std::log(floor) : -std::log(floor) * std::sin(md * knee) / md;
    const double integral = oracle::adaptive_simpson(f, 0.0, knee, 1e-12) + tail;
    const double want = (m == 0 ? 1.0 : 2.0) / std::numbers::pi * integral;
    const double rel = std::abs(c.coeffs[m] - want) / std::abs(want);
    if (rel > worst) worst = rel, worst_m = m;
  }

  const auto nodes = spectral::gauss_chebyshev_nodes(2048);
  double ortho = 0.0;
  for (std::size_t n = 0; n <= 30; ++n) {
    std::vector<double> tn(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) tn[j] = spectral::cheb_eval(n, nodes[j]);
    for (std::size_t m = 0; m <= 30; ++m)
      ortho = std::max(ortho, std::abs(spectral::chebyshev_coefficient(tn, m) - (m == n ? 1.0 : 0.0)));
  }
  return {worst <= 1e-4 && ortho <= 1e-6,
          fmt("coefficient max relative error %.3g (m=%zu); orthogonality max error %.3g", worst, worst_m, ortho)};
}

Outcome sei_exactness() {
  std::mt19937_64 rng(2024);
  std::size_t value_mismatch = 0, selection_mismatch = 0, mask_mismatch = 0;
  double worst = 0.0;
  for (std::size_t trial = 0; trial < 1000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 2048)(rng);
    const std::size_t window = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
    const std::size_t checkpoints = window + 1 + std::uniform_int_distribution<std::size_t>(0, 2)(rng);
    const int k = std::uniform_int_distribution<int>(1, 99)(rng);

    std::vector<std::vector<double>> trace;
    sensitivity::CheckpointSeries series("s");
    for (std::size_t t = 0; t < checkpoints; ++t) {
      trace.push_back(oracle::random_vector(n, trial * 16 + t).values());
      series.append(t, Vector(trace.back()));
    }
    const Vector v = sensitivity::variability(series, window);
    const auto want = oracle::brute_variability(trace, window);
    for (std::size_t i = 0; i < n; ++i) {
      const double gap = std::abs(v[i] - want[i]);
      worst = std::max(worst, gap);
      value_mismatch += gap > 1e-12;
    }

    const auto sel = sensitivity::select_sensitive(v, k).selected;
    selection_mismatch += sel != oracle::sort_select(v.values(), oracle::ceil_percent(n, k));

    const Vector masked = sensitivity::apply_mask(Vector(trace.back()), sensitivity::DropoutMask(n, sel));
    std::vector<double> manual = trace.back();
    for (auto i : sel) manual[i] = 0.0;
    mask_mismatch += masked.values() != manual;
  }
  return {value_mismatch == 0 && selection_mismatch == 0 && mask_mismatch == 0,
          fmt("1000 series: max value gap %.3g, %zu value / %zu selection / %zu mask mismatches", worst, value_mismatch,
              selection_mismatch, mask_mismatch)};
}

json_io::SimConfig default_sim(std::size_t replicate) {
  json_io::SimConfig cfg;
  cfg.send.seed += replicate;
  cfg.model.init_seed += replicate;
  return cfg;
}

Outcome sei_beats_random() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> differences;
  std::string detail = "per-seed mean sei-random:";
  double sei_total = 0.0, random_total = 0.0;
  for (std::size_t s = 0; s < 5; ++s) {
    json_io::SimConfig cfg = default_sim(s);
    cfg.send.k_percent = 0.0;
    const auto corpus = toy::make_corpus(cfg.corpus, cfg.model.vocab);
    const protocol::RunLog log = protocol::send_loop(cfg.send, cfg.model, corpus);

    // Series over the last window of checkpoints, scored on the final generations.
    std::vector<sensitivity::CheckpointSeries> series;
    const std::size_t tracked = log.records.back().representations.size();
    for (std::size_t p = 0; p < tracked; ++p) {
      sensitivity::CheckpointSeries one("p" + std::to_string(p));
      for (std::size_t r = log.records.size() - cfg.send.T; r < log.records.size(); ++r)
        one.append(log.records[r].checkpoint_index, log.records[r].representations[p]);
      series.push_back(std::move(one));
    }
    const auto report = sensitivity::sei_dropout_experiment(log.records.back().generations, series, 20.0,
                                                            cfg.send.score_alpha, 20, 100 + s);
    double seed_diff = 0.0;
    for (std::size_t i = 0; i < report.trials.size(); ++i) {
      double d = 0.0;
      for (const auto& t : report.trials[i]) d += t.sei_drop - t.random_drop;
      differences.push_back(d / static_cast<double>(report.trials[i].size()));
      seed_diff += differences.back();
    }
    sei_total += report.sei_mean;
    random_total += report.random_mean;
    detail += fmt(" %.4f", seed_diff / static_cast<double>(report.trials.size()));
  }
  const double lower = stats::bootstrap_mean_lower_bound(differences, 0.95, 10000, 9);
  const double secs = seconds_since(t0);
  return {sei_total > random_total && lower > 0.0 && secs < 1200.0,
          detail + fmt("; mean sei %.4f vs random %.4f; 95%% lower bound %.4f; %.0f s", sei_total / 5.0,
                       random_total / 5.0, lower, secs)};
}

struct PairRuns {
  std::vector<protocol::ComparisonReport> reports;
  double seconds = 0.0;
};

PairRuns seed_matched_pairs() {
  const auto t0 = std::chrono::steady_clock::now();
  PairRuns out;
  for (std::size_t i = 0; i < 5; ++i) {
    const json_io::SimConfig cfg = default_sim(i);
    const auto corpus = toy::make_corpus(cfg.corpus, cfg.model.vocab);
    const auto send = protocol::send_loop(cfg.send, cfg.model, corpus);
    const auto normal = protocol::normal_loop(cfg.send, cfg.model, corpus);
    out.reports.push_back(protocol::compare_runs(send, normal));
  }
  out.seconds = seconds_since(t0);
  return out;
}

Outcome variance_reduction(const PairRuns& runs) {
  std::size_t lower = 0;
  double final_send = 0.0, final_normal = 0.0;
  std::string detail = "variance send/normal:";
  for (const auto& r : runs.reports) {
    lower += r.send.ees_variance < r.normal.ees_variance;
    final_send += r.send.final_ees / 5.0;
    final_normal += r.normal.final_ees / 5.0;
    detail += fmt(" %.4g/%.4g", r.send.ees_variance, r.normal.ees_variance);
  }
  return {lower >= 4 && final_send <= final_normal && runs.seconds < 1800.0,
          detail + fmt("; lower in %zu of 5; mean final EES send %.4f vs normal %.4f; %.0f s", lower, final_send,
                       final_normal, runs.seconds)};
}

Outcome overhead(const PairRuns& runs) {
  double send = 0.0, normal = 0.0;
  for (const auto& r : runs.reports) send += r.send.total_wall_seconds, normal += r.normal.total_wall_seconds;
  const double pct = 100.0 * (send / normal - 1.0);
  return {pct <= 25.0, fmt("send %.2f s vs normal %.2f s, overhead %.2f%%", send, normal, pct)};
}

std::string log_without_timings(const protocol::RunLog& log) {
  std::ostringstream s;
  json_io::write_run_log(s, log);
  std::string out;
  std::istringstream in(s.str());
  for (std::string line; std::getline(in, line);) {
    auto j = json_io::json::parse(line);
    j.erase("wall_seconds");
    out += j.dump() + "\n";
  }
  return out;
}

bool same_records(const protocol::RunLog& a, const protocol::RunLog& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.train_loss != y.train_loss || x.ees != y.ees || x.exact_score != y.exact_score ||
        x.active_mask.zeroed() != y.active_mask.zeroed() || x.generations != y.generations)
      return false;
  }
  return true;
}

Outcome determinism_and_degenerate() {
  std::string detail;
  bool ok = true;

  const DenseMatrix e = bench::gaussian_matrix(300, 12, 5);
  scores::EesConfig cfg;
  cfg.seed = 3;
  const bool scores_repeat = scores::exact_eigenscore(e).value == scores::exact_eigenscore(e).value &&
                             scores::efficient_eigenscore(e, cfg).value == scores::efficient_eigenscore(e, cfg).value;
  ok &= scores_repeat;

  json_io::SimConfig sim;
  sim.send.max_checkpoints = 6;
  const auto corpus = toy::make_corpus(sim.corpus, sim.model.vocab);
  const auto a = protocol::send_loop(sim.send, sim.model, corpus);
  const auto b = protocol::send_loop(sim.send, sim.model, corpus);
  const bool logs_repeat = same_records(a, b) && log_without_timings(a) == log_without_timings(b);
  ok &= logs_repeat;
  detail += fmt("repeat scores %s, run logs %s", scores_repeat ? "identical" : "differ", logs_repeat ? "identical" : "differ");

  DenseMatrix same(64, 10);
  const Vector col = oracle::random_vector(64, 6);
  for (std::size_t j = 0; j < 10; ++j)
    for (std::size_t i = 0; i < 64; ++i) same(i, j) = col[i];
  const double exact = scores::exact_eigenscore(same).value;
  const double gap = std::abs(exact - std::log(1e-3));
  const double ees_same = scores::efficient_eigenscore(same, cfg).value;
  double ees_min_other = 1e300;
  for (std::uint64_t s = 0; s < 50; ++s) {
    ees_min_other = std::min(ees_min_other, scores::efficient_eigenscore(bench::gaussian_matrix(64, 10, 200 + s), cfg).value);
    ees_min_other = std::min(ees_min_other, scores::efficient_eigenscore(decaying_spread_matrix(64, 10, 300 + s), cfg).value);
  }
  ok &= gap <= 1e-9 && ees_same <= ees_min_other;
  detail += fmt("; identical columns: exact %.6f (gap %.2g), EES %.4f vs min over 100 others %.4f", exact, gap,
                ees_same, ees_min_other);

  sim.send.k_percent = 0.0;
  const auto send0 = protocol::send_loop(sim.send, sim.model, corpus);
  const auto normal = protocol::normal_loop(sim.send, sim.model, corpus);
  const auto cmp = protocol::compare_runs(send0, normal);
  const bool k0 = same_records(send0, normal) && cmp.max_loss_difference == 0.0 && cmp.max_ees_difference == 0.0;
  ok &= k0;
  detail += fmt("; k=0 send vs normal %s", k0 ? "identical" : "differ");
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments restrict the run to the listed criterion numbers.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

  int failures = 0;
  const auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "trace-log identity", trace_log_identity);
  report(2, "EES tracks exact score", ees_tracks_exact);
  report(3, "runtime crossover", runtime_crossover);
  report(4, "moments monotonicity", moments_monotone);
  report(5, "Hutchinson quality", hutchinson_quality);
  report(6, "quadrature correctness", quadrature_correctness);
  report(7, "SEI pipeline exactness", sei_exactness);
  report(8, "SEI vs random dropout", sei_beats_random);
  PairRuns pairs;
  std::string pair_error;
  try {
    if (wanted(9) || wanted(10)) pairs = seed_matched_pairs();
  } catch (const std::exception& e) {
    pair_error = e.what();
  }
  const auto with_pairs = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!pair_error.empty()) return {false, "threw: " + pair_error};
      return fn(pairs);
    };
  };
  report(9, "SenD variance reduction", with_pairs(variance_reduction));
  report(10, "SenD overhead", with_pairs(overhead));
  report(11, "determinism and degenerate inputs", determinism_and_degenerate);

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
