#include "inttower/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <limits>
#include <vector>

namespace inttower::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelThreshold = 1 << 15;

bool worth_parallel(std::size_t work) { return work >= kParallelThreshold && omp_get_max_threads() > 1; }

}  // namespace

void set_num_threads(int threads) {
  static const int runtime_default = omp_get_max_threads();
  omp_set_num_threads(threads > 0 ? threads : runtime_default);
}

int max_threads() { return omp_get_max_threads(); }

namespace omp {

void matmul(const double* a, const double* b, double* c, std::size_t r, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(r);
#pragma omp parallel for schedule(static) if (worth_parallel(r * k * n))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* ci = c + i * n;
    std::fill(ci, ci + n, 0.0);
    const double* ai = a + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const double at = ai[t];
      const double* bt = b + t * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += at * bt[j];
    }
  }
}

void matmul_nt_acc(const double* a, const double* b, double* c, std::size_t r, std::size_t k, std::size_t n) {
  // b^T first so the inner loop runs over contiguous outputs; each output
  // still sums t = 0..k-1 in order.
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t t = 0; t < k; ++t) bt[t * n + j] = b[j * k + t];
  const auto rows = static_cast<std::ptrdiff_t>(r);
#pragma omp parallel if (worth_parallel(r * k * n))
  {
    std::vector<double> acc(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const double* ai = a + i * k;
      for (std::size_t t = 0; t < k; ++t) {
        const double at = ai[t];
        const double* row = bt.data() + t * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += at * row[j];
      }
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += acc[j];
    }
  }
}

void matmul_tn_acc(const double* a, const double* g, double* c, std::size_t r, std::size_t k, std::size_t n) {
  const auto inner = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel if (worth_parallel(r * k * n))
  {
    std::vector<double> acc(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t t = 0; t < inner; ++t) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < r; ++i) {
        const double ait = a[i * k + t];
        if (ait == 0.0) continue;
        const double* gi = g + i * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += ait * gi[j];
      }
      double* ct = c + t * n;
      for (std::size_t j = 0; j < n; ++j) ct[j] += acc[j];
    }
  }
}

void maxsim_rows(const double* u, const double* v, double* score, std::int32_t* argmax, std::size_t batch,
                 std::size_t hu, std::size_t hv, std::size_t p) {
  const auto rows = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static) if (worth_parallel(batch * hu * hv * p))
  for (std::ptrdiff_t b = 0; b < rows; ++b) {
    const double* ub = u + b * hu * p;
    const double* vb = v + b * hv * p;
    double total = 0.0;
    for (std::size_t h = 0; h < hu; ++h) {
      double best = -std::numeric_limits<double>::infinity();
      std::int32_t best_idx = 0;
      for (std::size_t g = 0; g < hv; ++g) {
        double s = 0.0;
        for (std::size_t t = 0; t < p; ++t) s += ub[h * p + t] * vb[g * p + t];
        if (s > best) {
          best = s;
          best_idx = static_cast<std::int32_t>(g);
        }
      }
      total += best;
      if (argmax != nullptr) argmax[b * hu + h] = best_idx;
    }
    score[b] = total;
  }
}

namespace {

// Dots of N consecutive user heads (t-major layout, stride q) with one item
// head. Fixed N keeps the accumulators in registers.
template <std::size_t N>
inline void dot_block(const double* ut, std::size_t q, const float* v, std::size_t p, double* out) {
  double a[N] = {};
  for (std::size_t t = 0; t < p; ++t) {
    const double vt = static_cast<double>(v[t]);
    const double* row = ut + t * q;
    for (std::size_t i = 0; i < N; ++i) a[i] += row[i] * vt;
  }
  for (std::size_t i = 0; i < N; ++i) out[i] = a[i];
}

// One candidate. The avx2 clone only widens the vectors (no fma), so the
// rounding is the same as the baseline build.
__attribute__((target_clones("avx2", "default"))) double score_item(const double* ut, std::size_t q, std::size_t qp,
                                                                     const float* item, std::size_t hv, std::size_t p,
                                                                     double* dots, double* best) {
  std::fill(best, best + q, -std::numeric_limits<double>::infinity());
  for (std::size_t g = 0; g < hv; ++g) {
    const float* vg = item + g * p;
    std::size_t i = 0;
    for (; i + 8 <= qp; i += 8) dot_block<8>(ut + i, qp, vg, p, dots + i);
    for (; i < qp; i += 4) dot_block<4>(ut + i, qp, vg, p, dots + i);
    for (std::size_t h = 0; h < q; ++h) best[h] = std::max(best[h], dots[h]);
  }
  double total = 0.0;
  for (std::size_t h = 0; h < q; ++h) total += best[h];
  return total;
}

}  // namespace

void maxsim_candidates(const double* user, std::size_t layers, std::size_t hu, const float* const* items,
                       std::size_t k, std::size_t hv, std::size_t p, double* out) {
  // All layers*hu user heads against one item head at a time, user heads
  // stored t-major and zero-padded to a multiple of 4. Every dot product
  // still sums t = 0..p-1 in order.
  const std::size_t q = layers * hu;
  const std::size_t qp = (q + 3) / 4 * 4;
  std::vector<double> ut(p * qp, 0.0);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t t = 0; t < p; ++t) ut[t * qp + i] = user[i * p + t];
  const auto count = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel if (worth_parallel(k * q * hv * p))
  {
    std::vector<double> dots(qp), best(q);
#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < count; ++j)
      out[j] = score_item(ut.data(), q, qp, items[j], hv, p, dots.data(), best.data());
  }
}

}  // namespace omp
}  // namespace inttower::kernels
