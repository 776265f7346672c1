#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops. Every kernel exists twice: a serial reference
// and an OpenMP version that partitions independent outputs across threads.
// Neither variant reorders a floating-point reduction, so both produce the
// same bits for the same inputs regardless of thread count.
//
//   matmul             c[r x n]  = a[r x k] * b[k x n]
//   matmul_nt_acc      c[r x n] += a[r x k] * b[n x k]^T
//   matmul_tn_acc      c[k x n] += a[r x k]^T * g[r x n]
//   maxsim_rows        per batch row: sum over user heads of the max inner
//                      product against that row's item heads; argmax holds
//                      the winning item head (lowest index on ties)
//   maxsim_candidates  one user (layers x hu x p heads) against k float32
//                      item records (hv x p each), summed over layers
namespace inttower::kernels {

namespace serial {

void matmul(const double* a, const double* b, double* c, std::size_t r, std::size_t k, std::size_t n);
void matmul_nt_acc(const double* a, const double* b, double* c, std::size_t r, std::size_t k, std::size_t n);
void matmul_tn_acc(const double* a, const double* g, double* c, std::size_t r, std::size_t k, std::size_t n);
void maxsim_rows(const double* u, const double* v, double* score, std::int32_t* argmax, std::size_t batch,
                 std::size_t hu, std::size_t hv, std::size_t p);
void maxsim_candidates(const double* user, std::size_t layers, std::size_t hu, const float* const* items,
                       std::size_t k, std::size_t hv, std::size_t p, double* out);

}  // namespace serial

namespace omp {

void matmul(const double* a, const double* b, double* c, std::size_t r, std::size_t k, std::size_t n);
void matmul_nt_acc(const double* a, const double* b, double* c, std::size_t r, std::size_t k, std::size_t n);
void matmul_tn_acc(const double* a, const double* g, double* c, std::size_t r, std::size_t k, std::size_t n);
void maxsim_rows(const double* u, const double* v, double* score, std::int32_t* argmax, std::size_t batch,
                 std::size_t hu, std::size_t hv, std::size_t p);
void maxsim_candidates(const double* user, std::size_t layers, std::size_t hu, const float* const* items,
                       std::size_t k, std::size_t hv, std::size_t p, double* out);

}  // namespace omp

// Thread control for the OpenMP variants; 0 restores the runtime default.
void set_num_threads(int threads);
int max_threads();

}  // namespace inttower::kernels
