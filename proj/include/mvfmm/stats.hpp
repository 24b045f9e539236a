#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mvfmm {

/// Standard normal quantile. Rational approximation refined by one Halley
/// step against erfc; absolute error well below 1e-12 on (1e-300, 1 - 1e-16).
double normal_quantile(double p);

double normal_cdf(double x);

/// Independent engine for stream `index` under `seed`. Streams are keyed by
/// (seed, index, tag) only, so results never depend on thread scheduling.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag = 0);

/// 1-based order statistic at ceil(n * prob), clamped to [1, n]. `sorted`
/// must be ascending.
double order_statistic_ceiling(std::span<const double> sorted, double prob);

/// Sample mean and (n-1)-denominator standard deviation.
double mean(std::span<const double> xs);
double sample_sd(std::span<const double> xs);
double median(std::vector<double> xs);

}  // namespace mvfmm
