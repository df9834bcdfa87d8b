#include <benchmark/benchmark.h>

#include "geco/bridge.hpp"
#include "geco/metrics.hpp"
#include "geco/models.hpp"
#include "geco/rng.hpp"
#include "geco/sampler.hpp"
#include "geco/specfun.hpp"

namespace {

void BM_ExpintEi(benchmark::State& state) {
  double x = -30.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(geco::expint_ei(x));
    x = x < 60.0 ? x + 0.37 : -30.0;
    if (x == 0.0) x = 0.1;
  }
}
BENCHMARK(BM_ExpintEi);

void BM_Sigma(benchmark::State& state) {
  const geco::BridgeConfig cfg;
  double t = 0.03;
  for (auto _ : state) {
    benchmark::DoNotOptimize(geco::sigma(t, cfg));
    t = t < 0.99 ? t + 0.001 : 0.03;
  }
}
BENCHMARK(BM_Sigma);

void BM_SiSnr(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = geco::standard_normal(1, n), b = geco::standard_normal(2, n);
  for (auto _ : state) benchmark::DoNotOptimize(geco::si_snr(a, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SiSnr)->Arg(8000);

void BM_PitAssign(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  std::vector<std::vector<double>> est, ref;
  for (int k = 0; k < K; ++k) {
    est.push_back(geco::standard_normal(10 + k, 4000));
    ref.push_back(geco::standard_normal(20 + k, 4000));
  }
  for (auto _ : state) benchmark::DoNotOptimize(geco::pit_assign(est, ref));
}
BENCHMARK(BM_PitAssign)->Arg(2)->Arg(3)->Arg(4);

void BM_SeparatorForward(benchmark::State& state) {
  const auto m = geco::make_separator({}, 1);
  const auto y = geco::standard_normal(3, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(geco::separator_forward(m, y));
}
BENCHMARK(BM_SeparatorForward)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_ScoreForward(benchmark::State& state) {
  const auto m = geco::make_score_model({}, {}, 1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = geco::standard_normal(1, n), s = geco::standard_normal(2, n), y = geco::standard_normal(3, n);
  for (auto _ : state) benchmark::DoNotOptimize(geco::score_forward(m, x, s, y, 0.3));
}
BENCHMARK(BM_ScoreForward)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_ScoreBackward(benchmark::State& state) {
  const auto m = geco::make_score_model({}, {}, 1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = geco::standard_normal(1, n), s = geco::standard_normal(2, n), y = geco::standard_normal(3, n);
  const auto d = geco::standard_normal(4, n);
  for (auto _ : state) {
    geco::ScoreTapePtr tape;
    geco::score_forward(m, x, s, y, 0.3, tape);
    benchmark::DoNotOptimize(geco::score_backward(m, *tape, d));
  }
}
BENCHMARK(BM_ScoreBackward)->Arg(8000)->Unit(benchmark::kMillisecond);

/// One corrected speaker: M score evaluations for GeCo, one for Fast-GeCo.
void BM_Correction(benchmark::State& state) {
  geco::BridgeConfig cfg;
  cfg.M = static_cast<int>(state.range(0));
  const auto m = geco::make_score_model({}, cfg, 1);
  const auto fn = geco::model_score_fn(m);
  const auto s = geco::standard_normal(2, 2400), y = geco::standard_normal(3, 2400);
  for (auto _ : state) benchmark::DoNotOptimize(geco::reverse_geco(s, y, fn, cfg, 7).x0);
}
BENCHMARK(BM_Correction)->Arg(1)->Arg(30)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
