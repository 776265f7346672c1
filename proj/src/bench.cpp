#include "inttower/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "inttower/errors.hpp"
#include "inttower/kernels.hpp"
#include "inttower/rng.hpp"

namespace inttower {

double median(std::vector<double> samples) {
  if (samples.empty()) throw ContractError("median of no samples");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

double percentile(std::vector<double> samples, double q) {
  if (samples.empty()) throw ContractError("percentile of no samples");
  if (!(q > 0.0 && q <= 100.0)) throw ContractError("percentile must be in (0, 100]");
  std::sort(samples.begin(), samples.end());
  auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(samples.size())));
  return samples[std::max<std::size_t>(rank, 1) - 1];
}

std::vector<LatencyRow> bench_scorer(const std::string& name, const Scorer& scorer,
                                     const std::vector<std::string>& user_values,
                                     const std::vector<std::uint64_t>& pool, const BenchConfig& config) {
  if (pool.empty()) throw ContractError("bench needs a non-empty candidate pool");
  if (config.repetitions == 0) throw ConfigError("bench repetitions must be positive");
  const int prev_threads = kernels::max_threads();
  kernels::set_num_threads(1);
  Rng rng(config.seed);
  std::vector<LatencyRow> rows;
  for (std::size_t k : config.ks) {
    if (k == 0) throw ConfigError("bench k values must be positive");
    ScoreRequest req{user_values, {}};
    req.candidates.resize(k);
    for (auto& id : req.candidates) id = pool[rng.index(pool.size())];
    for (std::size_t w = 0; w < config.warmup; ++w) scorer.score(req);
    std::vector<double> samples;
    samples.reserve(config.repetitions);
    for (std::size_t r = 0; r < config.repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      auto resp = scorer.score(req);
      const auto t1 = std::chrono::steady_clock::now();
      if (resp.ranking.empty()) throw DataError("bench request scored no candidates");
      samples.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    }
    rows.push_back({name, k, median(samples), percentile(samples, 95.0)});
  }
  kernels::set_num_threads(prev_threads);
  return rows;
}

void write_latency_csv(std::ostream& out, const std::vector<LatencyRow>& rows) {
  out << "model,k,median_us,p95_us\n";
  for (const auto& r : rows) out << r.model << ',' << r.k << ',' << r.median_us << ',' << r.p95_us << '\n';
}

}  // namespace inttower
