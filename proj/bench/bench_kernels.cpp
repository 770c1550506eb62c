// Serial reference vs OpenMP path for the three batch kernels.
// Arg 0 runs Exec::serial, arg 1 runs Exec::parallel.

#include <benchmark/benchmark.h>

#include "semwm/mapping_model.hpp"
#include "semwm/watermark_engine.hpp"
#include "world.hpp"

using namespace semwm;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

struct Batch {
  MappingModel model;
  std::vector<SparseVec> xs;
  std::vector<ForwardCache> caches;
  std::vector<std::vector<double>> d_out;
  std::vector<double> grad;

  Batch() {
    const auto& w = test::world();
    model = MappingModel::random({1024, 64, w.vocab.size()}, w.vocab.hash(), 3);
    Rng rng(11);
    for (std::size_t i = 0; i < 256; ++i) {
      const auto d = w.doc(i);
      xs.push_back(featurize(d.ids, 1024));
      d_out.emplace_back(w.vocab.size());
      for (auto& g : d_out.back()) g = standard_normal(rng);
    }
    forward_batch(model, xs, caches, Exec::serial);
    grad.resize(model.params().size());
  }
};

const Batch& batch() {
  static const Batch b;
  return b;
}

void BM_ForwardBatch(benchmark::State& st) {
  const auto& b = batch();
  std::vector<ForwardCache> caches;
  for (auto _ : st) {
    forward_batch(b.model, b.xs, caches, exec_of(st));
    benchmark::DoNotOptimize(caches.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(b.xs.size()));
}

void BM_BackwardBatch(benchmark::State& st) {
  const auto& b = batch();
  std::vector<double> grad(b.grad.size());
  for (auto _ : st) {
    backward_batch(b.model, b.xs, b.caches, b.d_out, grad, exec_of(st));
    benchmark::DoNotOptimize(grad.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(b.xs.size()));
}

void BM_WatermarkBatch(benchmark::State& st) {
  const auto& w = test::world();
  std::vector<TokenSeq> texts;
  for (std::size_t i = 0; i < 32; ++i) texts.push_back(w.doc(i));
  WatermarkParams p;
  p.delta = 4;
  p.fidelity_weight = 2;
  const auto ctx = w.ctx();
  for (auto _ : st) {
    auto out = watermark_batch(ctx, texts, p, exec_of(st));
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(texts.size()));
}

}  // namespace

BENCHMARK(BM_ForwardBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WatermarkBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
