#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sendkit::stats {

double mean(std::span<const double> x);
/// Population variance (divide by n).
double variance(std::span<const double> x);
double stddev(std::span<const double> x);
double median(std::vector<double> x);

/// Ranks 1..n with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> x);
/// Spearman rank correlation (Pearson correlation of average ranks).
double spearman(std::span<const double> a, std::span<const double> b);

/// Lower endpoint of the one-sided percentile-bootstrap confidence interval
/// for the mean of `x` at the given confidence level.
double bootstrap_mean_lower_bound(std::span<const double> x, double confidence, std::size_t resamples,
                                  std::uint64_t seed);

}  // namespace sendkit::stats
