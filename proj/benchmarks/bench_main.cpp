#include <benchmark/benchmark.h>

#include "muse/manifold.hpp"
#include "muse/subgraph.hpp"
#include "muse/training.hpp"
#include "synth.hpp"

namespace muse {
namespace {

DenseMatrix random_dense(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed, 0);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-1, 1);
  return m;
}

GraphDataset sbm(std::size_t per_block) {
  tools::SbmOptions o;
  o.per_block = per_block;
  return tools::make_sbm(o);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix a = random_dense(n, 64, 1), b = random_dense(64, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * 64 * 64));
}
BENCHMARK(BM_Matmul)->Arg(256)->Arg(1024)->Arg(4096);

void BM_Spmm(benchmark::State& state) {
  const GraphDataset ds = sbm(static_cast<std::size_t>(state.range(0)));
  const SparseMatrix a = symmetric_normalized(ds.adjacency);
  const DenseMatrix x = random_dense(ds.node_count, 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(spmm(a, x));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(a.nnz() * 64));
}
BENCHMARK(BM_Spmm)->Arg(100)->Arg(500);

void BM_Isomap(benchmark::State& state) {
  const GraphDataset ds = sbm(static_cast<std::size_t>(state.range(0)));
  IsomapOptions o;
  for (auto _ : state) benchmark::DoNotOptimize(build_latent_graph(ds.features, o));
}
BENCHMARK(BM_Isomap)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_MaskOptimization(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const DenseMatrix members = random_dense(m, 16, 4);
  const DenseMatrix psi = random_dense(1, 16, 5);
  for (auto _ : state) benchmark::DoNotOptimize(optimize_mask(psi.row(0), members, {}, MaskOptimizerOptions{}));
}
BENCHMARK(BM_MaskOptimization)->Arg(8)->Arg(64)->Arg(512);

void BM_Epoch(benchmark::State& state) {
  const GraphDataset ds = sbm(100);
  TrainConfig cfg;
  cfg.use_cache = false;
  cfg.threads = 1;
  const PreparedData data = prepare(ds, cfg);
  Rng rng(0, 1);
  const Split split = sample_labels(ds, cfg.per_class, rng);
  TrainState st = init_state(data, cfg, split, 0);
  for (auto _ : state) benchmark::DoNotOptimize(train_epoch(st, data, cfg));
}
BENCHMARK(BM_Epoch)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace muse

BENCHMARK_MAIN();
