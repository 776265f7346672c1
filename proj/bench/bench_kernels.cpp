// Serial reference kernels vs their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <vector>

#include "inttower/kernels.hpp"
#include "inttower/rng.hpp"

namespace k = inttower::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  inttower::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <auto Fn>
void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Fn(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <auto Fn>
void bm_matmul_tn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_values(n * n, 1), g = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Fn(a.data(), g.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
}

template <auto Fn>
void bm_maxsim_rows(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const std::size_t h = 4, p = 64;
  auto u = random_values(batch * h * p, 1), v = random_values(batch * h * p, 2);
  std::vector<double> score(batch);
  std::vector<std::int32_t> arg(batch * h);
  for (auto _ : state) {
    Fn(u.data(), v.data(), score.data(), arg.data(), batch, h, h, p);
    benchmark::DoNotOptimize(score.data());
  }
}

template <auto Fn>
void bm_maxsim_candidates(benchmark::State& state) {
  const auto count = static_cast<std::size_t>(state.range(0));
  const std::size_t layers = 3, h = 4, p = 64;
  auto user = random_values(layers * h * p, 1);
  auto raw = random_values(count * h * p, 2);
  std::vector<float> items(raw.begin(), raw.end());
  std::vector<const float*> ptrs(count);
  for (std::size_t j = 0; j < count; ++j) ptrs[j] = items.data() + j * h * p;
  std::vector<double> out(count);
  for (auto _ : state) {
    Fn(user.data(), layers, h, ptrs.data(), count, h, p, out.data());
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(bm_matmul<k::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_matmul<k::omp::matmul>)->Name("matmul/omp")->Arg(64)->Arg(256);
BENCHMARK(bm_matmul_tn<k::serial::matmul_tn_acc>)->Name("matmul_tn_acc/serial")->Arg(256);
BENCHMARK(bm_matmul_tn<k::omp::matmul_tn_acc>)->Name("matmul_tn_acc/omp")->Arg(256);
BENCHMARK(bm_maxsim_rows<k::serial::maxsim_rows>)->Name("maxsim_rows/serial")->Arg(2048);
BENCHMARK(bm_maxsim_rows<k::omp::maxsim_rows>)->Name("maxsim_rows/omp")->Arg(2048);
BENCHMARK(bm_maxsim_candidates<k::serial::maxsim_candidates>)->Name("maxsim_candidates/serial")->Arg(20)->Arg(2000);
BENCHMARK(bm_maxsim_candidates<k::omp::maxsim_candidates>)->Name("maxsim_candidates/omp")->Arg(20)->Arg(2000);

BENCHMARK_MAIN();
