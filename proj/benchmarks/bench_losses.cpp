// Microbenchmarks for the batch-level hot path: pairwise similarities, the
// batch losses, and the total gradient, across batch sizes 2N in
// {64, 256, 1024}.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "supcon/batch.hpp"
#include "supcon/embedding.hpp"
#include "supcon/gradients.hpp"
#include "supcon/losses.hpp"
#include "supcon/rng.hpp"

namespace {

using namespace supcon;

constexpr std::size_t kDim = 16;
constexpr int kClasses = 4;

struct BenchBatch {
  Matrix z;
  BatchStructure structure;
};

BenchBatch make_bench_batch(std::size_t rows) {
  Rng rng(12345);
  const std::size_t sources = rows / 2;
  std::vector<int> labels(sources);
  for (auto& l : labels) l = static_cast<int>(rng.uniform_index(kClasses));
  labels[0] = labels[1];  // no singleton-only degenerate case
  Matrix w(rows, kDim);
  for (double& v : w.data) v = rng.normal();
  return {normalize_rows(w).matrix(), make_batch_structure(labels, true)};
}

void BM_PairwiseInner(benchmark::State& state) {
  const BenchBatch b = make_bench_batch(static_cast<std::size_t>(state.range(0)));
  const UnitRows z{b.z};
  for (auto _ : state) {
    Matrix g = pairwise_inner(z);
    benchmark::DoNotOptimize(g.data.data());
  }
}

void BM_LossSupOut(benchmark::State& state) {
  const BenchBatch b = make_bench_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const LossOutput out = loss_sup_out(b.z, b.structure, 0.1);
    benchmark::DoNotOptimize(out.total);
  }
}

void BM_LossSupIn(benchmark::State& state) {
  const BenchBatch b = make_bench_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const LossOutput out = loss_sup_in(b.z, b.structure, 0.1);
    benchmark::DoNotOptimize(out.total);
  }
}

void BM_GradTotalZ(benchmark::State& state) {
  const BenchBatch b = make_bench_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Matrix g = grad_total_z(b.z, b.structure, 0.1, LossVariant::kSupOut);
    benchmark::DoNotOptimize(g.data.data());
  }
}

void BM_GradTotalW(benchmark::State& state) {
  Rng rng(777);
  const std::size_t rows = static_cast<std::size_t>(state.range(0));
  const BenchBatch b = make_bench_batch(rows);
  Matrix w(rows, kDim);
  for (double& v : w.data) v = rng.normal();
  for (auto _ : state) {
    Matrix g = grad_total_w(w, b.structure, 0.1, LossVariant::kSupOut);
    benchmark::DoNotOptimize(g.data.data());
  }
}

BENCHMARK(BM_PairwiseInner)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_LossSupOut)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_LossSupIn)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_GradTotalZ)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_GradTotalW)->Arg(64)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
