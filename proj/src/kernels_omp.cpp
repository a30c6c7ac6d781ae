#include <algorithm>
#include <cmath>
#include <vector>

#include "gla/kernels.hpp"

namespace gla::kernels::parallel {

namespace {

// Rows below this many multiply-adds run on the calling thread.
constexpr std::size_t kParallelWork = 1u << 15;

constexpr std::size_t kMr = 4;  // output rows per micro-tile
constexpr std::size_t kNr = 8;  // output cols per micro-tile (two AVX2 registers)

// B repacked into column panels of width kNr: panel q holds B[p, q·kNr + jj]
// at [q][p][jj], zero-padded past n. Every micro-tile then streams one
// contiguous panel. The buffer is reused across calls.
template <typename BAt>
const double* pack_b(std::size_t n, std::size_t k, BAt b_at) {
  thread_local std::vector<double> buf;
  const std::size_t panels = (n + kNr - 1) / kNr;
  if (buf.size() < panels * k * kNr) buf.resize(panels * k * kNr);
  for (std::size_t q = 0; q < panels; ++q) {
    double* dst = buf.data() + q * k * kNr;
    const std::size_t j0 = q * kNr, w = std::min(kNr, n - j0);
    for (std::size_t p = 0; p < k; ++p) {
      std::size_t jj = 0;
      for (; jj < w; ++jj) dst[p * kNr + jj] = b_at(p, j0 + jj);
      for (; jj < kNr; ++jj) dst[p * kNr + jj] = 0.0;
    }
  }
  return buf.data();
}

// s = Σ_p A[r, p] · panel[p, :] kept in registers over the whole reduction,
// then C (+)= s. Each element's sum runs over p in order from zero.
template <std::size_t MR, typename AAt>
inline void micro(std::size_t k, AAt a_at, const double* panel, double* c, std::size_t ldc,
                  std::size_t nr, bool accumulate) {
  double s[MR][kNr] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const double* bv = panel + p * kNr;
    for (std::size_t r = 0; r < MR; ++r) {
      const double av = a_at(r, p);
#pragma omp simd
      for (std::size_t jj = 0; jj < kNr; ++jj) s[r][jj] += av * bv[jj];
    }
  }
  for (std::size_t r = 0; r < MR; ++r)
    for (std::size_t jj = 0; jj < nr; ++jj)
      c[r * ldc + jj] = accumulate ? c[r * ldc + jj] + s[r][jj] : s[r][jj];
}

// a_at(i, p) reads A[i, p] in logical (m×k) coordinates.
template <typename AAt>
void gemm_packed(MatDims d, AAt a_at, const double* packed, double* c, bool accumulate) {
  const std::size_t panels = (d.n + kNr - 1) / kNr;
  const long blocks = static_cast<long>((d.m + kMr - 1) / kMr);
#pragma omp parallel for schedule(static) if (d.m * d.n * d.k > kParallelWork)
  for (long blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * kMr;
    const std::size_t mr = std::min(kMr, d.m - i0);
    auto a_blk = [&](std::size_t r, std::size_t p) { return a_at(i0 + r, p); };
    for (std::size_t q = 0; q < panels; ++q) {
      const std::size_t j0 = q * kNr, nr = std::min(kNr, d.n - j0);
      const double* panel = packed + q * d.k * kNr;
      double* ct = c + i0 * d.n + j0;
      switch (mr) {
        case 4: micro<4>(d.k, a_blk, panel, ct, d.n, nr, accumulate); break;
        case 3: micro<3>(d.k, a_blk, panel, ct, d.n, nr, accumulate); break;
        case 2: micro<2>(d.k, a_blk, panel, ct, d.n, nr, accumulate); break;
        default: micro<1>(d.k, a_blk, panel, ct, d.n, nr, accumulate); break;
      }
    }
  }
}

}  // namespace

void gemm_nn(MatDims d, const double* a, const double* b, double* c, bool accumulate) {
  const double* packed = pack_b(d.n, d.k, [&](std::size_t p, std::size_t j) { return b[p * d.n + j]; });
  gemm_packed(d, [&](std::size_t i, std::size_t p) { return a[i * d.k + p]; }, packed, c, accumulate);
}

void gemm_nt(MatDims d, const double* a, const double* b, double* c, bool accumulate) {
  const double* packed = pack_b(d.n, d.k, [&](std::size_t p, std::size_t j) { return b[j * d.k + p]; });
  gemm_packed(d, [&](std::size_t i, std::size_t p) { return a[i * d.k + p]; }, packed, c, accumulate);
}

void gemm_tn(MatDims d, const double* a, const double* b, double* c, bool accumulate) {
  const double* packed = pack_b(d.n, d.k, [&](std::size_t p, std::size_t j) { return b[p * d.n + j]; });
  gemm_packed(d, [&](std::size_t i, std::size_t p) { return a[p * d.m + i]; }, packed, c, accumulate);
}

double pairwise_distance_sum(const double* a, std::size_t na, const double* b, std::size_t nb,
                             std::size_t dim) {
  // Per-row partial sums combined serially keep the result thread-count invariant.
  std::vector<double> partial(na, 0.0);
  const long rows = static_cast<long>(na);
#pragma omp parallel for schedule(static) if (na * nb * dim > kParallelWork)
  for (long i = 0; i < rows; ++i) {
    const double* ai = a + i * dim;
    double s_row = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      const double* bj = b + j * dim;
      double s = 0.0;
      for (std::size_t p = 0; p < dim; ++p) {
        const double diff = ai[p] - bj[p];
        s += diff * diff;
      }
      s_row += std::sqrt(s);
    }
    partial[i] = s_row;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace gla::kernels::parallel
