#pragma once

// Dense inner loops used by autodiff and metrics. Two backends share one
// signature set: `serial` is the plain reference kept for tests and the
// benchmark; `parallel` is the OpenMP version the library runs. Parallel
// kernels split work by output row only, so every output element is produced
// by one thread in a fixed order and results do not depend on thread count.

#include <cstddef>

namespace gla::kernels {

struct MatDims {
  std::size_t m;  // output rows
  std::size_t n;  // output cols
  std::size_t k;  // reduction length
};

#define GLA_KERNEL_DECLS                                                                  \
  /* C(m×n) (+)= A(m×k) · B(k×n) */                                                       \
  void gemm_nn(MatDims d, const double* a, const double* b, double* c, bool accumulate);  \
  /* C(m×n) (+)= A(m×k) · B(n×k)ᵀ */                                                      \
  void gemm_nt(MatDims d, const double* a, const double* b, double* c, bool accumulate);  \
  /* C(m×n) (+)= A(k×m)ᵀ · B(k×n) */                                                      \
  void gemm_tn(MatDims d, const double* a, const double* b, double* c, bool accumulate);  \
  /* Σ_i Σ_j ‖a_i − b_j‖₂ over rows of A(na×dim) and B(nb×dim) */                         \
  double pairwise_distance_sum(const double* a, std::size_t na, const double* b,          \
                               std::size_t nb, std::size_t dim);

namespace serial {
GLA_KERNEL_DECLS
}  // namespace serial

namespace parallel {
GLA_KERNEL_DECLS
}  // namespace parallel

#undef GLA_KERNEL_DECLS

using parallel::gemm_nn;
using parallel::gemm_nt;
using parallel::gemm_tn;
using parallel::pairwise_distance_sum;

}  // namespace gla::kernels
