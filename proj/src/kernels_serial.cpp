#include <cmath>

#include "gla/kernels.hpp"

namespace gla::kernels::serial {

void gemm_nn(MatDims d, const double* a, const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < d.k; ++p) s += a[i * d.k + p] * b[p * d.n + j];
      c[i * d.n + j] = accumulate ? c[i * d.n + j] + s : s;
    }
}

void gemm_nt(MatDims d, const double* a, const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < d.k; ++p) s += a[i * d.k + p] * b[j * d.k + p];
      c[i * d.n + j] = accumulate ? c[i * d.n + j] + s : s;
    }
}

void gemm_tn(MatDims d, const double* a, const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < d.k; ++p) s += a[p * d.m + i] * b[p * d.n + j];
      c[i * d.n + j] = accumulate ? c[i * d.n + j] + s : s;
    }
}

double pairwise_distance_sum(const double* a, std::size_t na, const double* b, std::size_t nb,
                             std::size_t dim) {
  double total = 0.0;
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < dim; ++p) {
        const double diff = a[i * dim + p] - b[j * dim + p];
        s += diff * diff;
      }
      total += std::sqrt(s);
    }
  return total;
}

}  // namespace gla::kernels::serial
