#include "inttower/kernels.hpp"

#include <algorithm>
#include <limits>

namespace inttower::kernels::serial {

void matmul(const double* a, const double* b, double* c, std::size_t r, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += a[i * k + t] * b[t * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nt_acc(const double* a, const double* b, double* c, std::size_t r, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += a[i * k + t] * b[j * k + t];
      c[i * n + j] += acc;
    }
  }
}

void matmul_tn_acc(const double* a, const double* g, double* c, std::size_t r, std::size_t k, std::size_t n) {
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < r; ++i) acc += a[i * k + t] * g[i * n + j];
      c[t * n + j] += acc;
    }
  }
}

void maxsim_rows(const double* u, const double* v, double* score, std::int32_t* argmax, std::size_t batch,
                 std::size_t hu, std::size_t hv, std::size_t p) {
  for (std::size_t b = 0; b < batch; ++b) {
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

void maxsim_candidates(const double* user, std::size_t layers, std::size_t hu, const float* const* items,
                       std::size_t k, std::size_t hv, std::size_t p, double* out) {
  for (std::size_t j = 0; j < k; ++j) {
    const float* item = items[j];
    double total = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t h = 0; h < hu; ++h) {
        const double* uh = user + (l * hu + h) * p;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < hv; ++g) {
          double s = 0.0;
          for (std::size_t t = 0; t < p; ++t) s += uh[t] * static_cast<double>(item[g * p + t]);
          best = std::max(best, s);
        }
        total += best;
      }
    }
    out[j] = total;
  }
}

}  // namespace inttower::kernels::serial
