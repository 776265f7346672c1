#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "inttower/serving.hpp"

namespace inttower {

struct LatencyRow {
  std::string model;
  std::size_t k = 0;
  double median_us = 0.0;
  double p95_us = 0.0;
};

double median(std::vector<double> samples);
// Nearest-rank percentile, q in (0, 100].
double percentile(std::vector<double> samples, double q);

struct BenchConfig {
  std::vector<std::size_t> ks{10, 20, 100, 1000, 2000};
  std::size_t repetitions = 20;
  std::size_t warmup = 2;
  std::uint64_t seed = 3;
};

// Times scorer.score() on requests of k candidates drawn (with
// replacement) from `pool`, for every k. Single-threaded.
std::vector<LatencyRow> bench_scorer(const std::string& name, const Scorer& scorer,
                                     const std::vector<std::string>& user_values,
                                     const std::vector<std::uint64_t>& pool, const BenchConfig& config);

void write_latency_csv(std::ostream& out, const std::vector<LatencyRow>& rows);

}  // namespace inttower
