// Timings for the forward pass, gradient rows, mask fitting and the dense
// reference gradient on sparse block graphs of growing size.

#include <benchmark/benchmark.h>

#include "geattack/attack/attack.hpp"
#include "geattack/eval/synth.hpp"

namespace {

using namespace geattack;

struct Setup {
  graph::Graph g;
  gcn::GcnModel model;
  ad::DenseMatrix xw1;
  ad::DenseMatrix mask0;
  std::size_t v = 0;
};

/// Six blocks with average in-block degree near 2.8, about n nodes in total.
Setup make_setup(std::size_t n) {
  Setup s;
  const std::size_t m = n / 6;
  s.g = eval::clique_blocks({.k = 6, .m = m, .intra_p = 2.8 / static_cast<double>(m), .bridges = 20}, 1).graph;
  gcn::TrainConfig tc;
  tc.seed = 1;
  s.model = gcn::init_model(s.g.features->cols(), 6, tc);
  s.xw1 = gcn::input_projection(s.model, *s.g.features);
  s.mask0 = explain::initial_mask(s.g.n(), 1);
  while (graph::node_degree(s.g, s.v) == 0) ++s.v;
  return s;
}

void BM_Forward(benchmark::State& state) {
  const Setup s = make_setup(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(gcn::forward_values(s.model, s.g.adjacency, *s.g.features));
  state.counters["n"] = static_cast<double>(s.g.n());
}
BENCHMARK(BM_Forward)->Arg(256)->Arg(1024)->Arg(2112)->Unit(benchmark::kMillisecond);

void BM_NllRowGradient(benchmark::State& state) {
  const Setup s = make_setup(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(attack::nll_row_gradient(s.model, s.g.adjacency, s.xw1, s.v, 1));
  state.counters["n"] = static_cast<double>(s.g.n());
}
BENCHMARK(BM_NllRowGradient)->Arg(256)->Arg(1024)->Arg(2112)->Unit(benchmark::kMillisecond);

void BM_GeattackRowGradient(benchmark::State& state) {
  const Setup s = make_setup(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        attack::geattack_row_gradient(s.model, s.g.adjacency, s.xw1, s.mask0, s.v, 1, 20.0, 3, 0.01));
  state.counters["n"] = static_cast<double>(s.g.n());
}
BENCHMARK(BM_GeattackRowGradient)->Arg(256)->Arg(1024)->Arg(2112)->Unit(benchmark::kMillisecond);

// Dense reference; memory grows with n^2 per recorded op, so sizes stay small.
void BM_DenseGeattackGradient(benchmark::State& state) {
  const Setup s = make_setup(static_cast<std::size_t>(state.range(0)));
  const ad::DenseMatrix b = attack::penalty_mask(s.g.adjacency);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        attack::geattack_gradient(s.model, s.g.adjacency, s.xw1, b, s.mask0, s.v, 1, 20.0, 3, 0.01));
  state.counters["n"] = static_cast<double>(s.g.n());
}
BENCHMARK(BM_DenseGeattackGradient)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_FitMask(benchmark::State& state) {
  const Setup s = make_setup(static_cast<std::size_t>(state.range(0)));
  explain::ExplainerConfig ec;
  for (auto _ : state) benchmark::DoNotOptimize(explain::fit_mask(s.model, s.g, s.v, 0, ec));
  state.counters["n"] = static_cast<double>(s.g.n());
}
BENCHMARK(BM_FitMask)->Arg(256)->Arg(2112)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
