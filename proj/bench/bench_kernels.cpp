// Serial reference vs OpenMP kernels at the shapes the models actually hit.
#include <benchmark/benchmark.h>

#include "gla/kernels.hpp"
#include "gla/rng.hpp"

using namespace gla;

namespace {

template <auto Kernel>
void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto k = static_cast<std::size_t>(state.range(2));
  Rng rng = make_rng(1, 0);
  // Sized for the largest operand layout any variant reads.
  const Tensor a = normal_tensor(rng, std::max(m, k), std::max(m, k));
  const Tensor b = normal_tensor(rng, std::max(n, k), std::max(n, k));
  Tensor c(m, n);
  for (auto _ : state) {
    Kernel({m, n, k}, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * m * n * k, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

template <auto Kernel>
void BM_Pairwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(2, 0);
  const Tensor a = normal_tensor(rng, n, 2), b = normal_tensor(rng, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(a.data(), n, b.data(), n, 2));
}

// Encoder layer 3 forward (x·Wᵀ), decoder stage 1 forward (z·W), weight gradient.
#define SHAPES ->Args({500, 256, 128})->Args({500, 128, 256})->Args({128, 256, 500})

}  // namespace

BENCHMARK(BM_Gemm<kernels::serial::gemm_nn>) SHAPES;
BENCHMARK(BM_Gemm<kernels::parallel::gemm_nn>) SHAPES;
BENCHMARK(BM_Gemm<kernels::serial::gemm_nt>) SHAPES;
BENCHMARK(BM_Gemm<kernels::parallel::gemm_nt>) SHAPES;
BENCHMARK(BM_Gemm<kernels::serial::gemm_tn>) SHAPES;
BENCHMARK(BM_Gemm<kernels::parallel::gemm_tn>) SHAPES;
BENCHMARK(BM_Pairwise<kernels::serial::pairwise_distance_sum>)->Arg(500);
BENCHMARK(BM_Pairwise<kernels::parallel::pairwise_distance_sum>)->Arg(500);

BENCHMARK_MAIN();
