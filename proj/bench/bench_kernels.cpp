// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS / INVARIA_THREADS.

#include "invaria/kernels.hpp"

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

namespace {

using namespace invaria;

Coords random_coords(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Coords c(n, 3);
  for (Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
  return c;
}

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

template <auto Kernel>
void BM_Knn(benchmark::State& state) {
  const Coords pts = random_coords(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(pts, pts, 16));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_NearestDistinct(benchmark::State& state) {
  const Coords pts = random_coords(state.range(0), 2);
  std::vector<int> anchors(1024);
  std::iota(anchors.begin(), anchors.end(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(pts, anchors));
  state.SetItemsProcessed(state.iterations() * 1024);
}

template <auto Kernel>
void BM_EdgeMaxRelu(benchmark::State& state) {
  const Index p = state.range(0);
  constexpr int k = 16;
  constexpr Index h = 64;
  const Matrix u = random_matrix(p, h, 3);
  const Matrix rel = random_matrix(p * k, 3, 4);
  const Matrix w_rel = random_matrix(3, h, 5);
  const Matrix bias = random_matrix(1, h, 6);
  const kernels::NeighborTable nbr = kernels::knn_parallel(random_coords(p, 7), random_coords(p, 7), k);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(u, nbr.indices, k, rel, w_rel, bias));
  state.SetItemsProcessed(state.iterations() * p);
}

}  // namespace

BENCHMARK(BM_Knn<kernels::knn_serial>)->Name("knn/serial")->Arg(4096)->Arg(32768)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Knn<kernels::knn_parallel>)->Name("knn/parallel")->Arg(4096)->Arg(32768)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NearestDistinct<kernels::nearest_distinct_serial>)
    ->Name("nearest_distinct/serial")->Arg(32768)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NearestDistinct<kernels::nearest_distinct_parallel>)
    ->Name("nearest_distinct/parallel")->Arg(32768)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EdgeMaxRelu<kernels::edge_max_relu_serial>)
    ->Name("edge_max_relu/serial")->Arg(32768)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EdgeMaxRelu<kernels::edge_max_relu_parallel>)
    ->Name("edge_max_relu/parallel")->Arg(32768)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  invaria::kernels::configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
