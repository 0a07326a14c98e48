#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "bpr/eval.hpp"
#include "bpr/objective.hpp"
#include "bpr/optim.hpp"
#include "bpr/sampling.hpp"
#include "bpr/synthetic.hpp"

using namespace bpr;

namespace {

ModelParams<double> bench_model(std::uint32_t users, std::uint32_t items, std::uint32_t f,
                                bool bias) {
  return init_model<double>(users, items, f, InitSpec::normal(0.0, 0.1, 17), bias);
}

const InteractionLog& bench_log() {
  static const InteractionLog log = [] {
    SyntheticSpec spec;
    return synthesize_log(spec);
  }();
  return log;
}

}  // namespace

static void BM_ScoreAllItems(benchmark::State& state) {
  const auto items = static_cast<std::uint32_t>(state.range(0));
  const auto params = bench_model(64, items, 64, true);
  std::vector<double> out;
  std::uint32_t u = 0;
  for (auto _ : state) {
    score_all_items(params, u, out);
    benchmark::DoNotOptimize(out.data());
    u = (u + 1) % params.user_count;
  }
  state.SetItemsProcessed(state.iterations() * items);
}
BENCHMARK(BM_ScoreAllItems)->Arg(1682)->Arg(20000);

static void BM_BprGradInto(benchmark::State& state) {
  const auto params = bench_model(256, 512, static_cast<std::uint32_t>(state.range(0)), true);
  const RegScheme reg = RegScheme::separate(0.01, 0.02, 0.003, 0.0004);
  TripleGrad<double> grad;
  std::uint32_t n = 0;
  for (auto _ : state) {
    bpr_grad_into(params, n % 256, n % 512, (n + 7) % 512, reg, grad);
    benchmark::DoNotOptimize(grad.g_pu.data());
    ++n;
  }
}
BENCHMARK(BM_BprGradInto)->Arg(16)->Arg(64)->Arg(256);

static void BM_ApplyUpdate(benchmark::State& state) {
  const auto kind = static_cast<OptimizerKind>(state.range(0));
  const std::uint32_t width = 64;
  std::vector<double> theta(2000 * width, 0.05);
  std::vector<double> grad(width, 0.01);
  OptimizerState<double> opt(2000, width, kind);
  OptimizerConfig cfg;
  cfg.kind = kind;
  cfg.learning_rate = 1e-4;
  std::uint64_t step = 0;
  std::uint32_t row = 0;
  for (auto _ : state) {
    opt.apply_update(row, theta.data() + std::size_t(row) * width, grad.data(), cfg, step++);
    benchmark::DoNotOptimize(theta.data());
    row = (row + 1) % 2000;
  }
}
BENCHMARK(BM_ApplyUpdate)
    ->Arg(static_cast<int>(OptimizerKind::sgd))
    ->Arg(static_cast<int>(OptimizerKind::momentum_sgd))
    ->Arg(static_cast<int>(OptimizerKind::rmsprop))
    ->Arg(static_cast<int>(OptimizerKind::adam));

static void BM_SampleNegativeUniform(benchmark::State& state) {
  const UserHistoryIndex history = UserHistoryIndex::build(bench_log());
  Rng rng = make_rng(3, "bench-uniform");
  std::uint32_t u = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_negative_uniform(u, history, rng));
    u = (u + 1) % history.user_count;
  }
}
BENCHMARK(BM_SampleNegativeUniform);

static void BM_SampleNegativeAdaptive(benchmark::State& state) {
  const InteractionLog& log = bench_log();
  const UserHistoryIndex history = UserHistoryIndex::build(log);
  const auto params = bench_model(log.user_count, log.item_count, 64, false);
  auto sampler_state = make_adaptive_state<double>(log.item_count, 64, 16.82, 1);
  refresh_adaptive_state(params, sampler_state);
  Rng rng = make_rng(4, "bench-adaptive");
  std::uint32_t u = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_negative_adaptive(u, params, sampler_state, history, rng));
    u = (u + 1) % history.user_count;
  }
}
BENCHMARK(BM_SampleNegativeAdaptive);

static void BM_AdaptiveRefresh(benchmark::State& state) {
  const InteractionLog& log = bench_log();
  const auto params = bench_model(log.user_count, log.item_count, 64, false);
  auto sampler_state = make_adaptive_state<double>(log.item_count, 64, 16.82, 1);
  for (auto _ : state) {
    refresh_adaptive_state(params, sampler_state);
    benchmark::DoNotOptimize(sampler_state.order.data());
  }
}
BENCHMARK(BM_AdaptiveRefresh)->Unit(benchmark::kMillisecond);

static void BM_RankTopn(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> scores(state.range(0));
  for (double& s : scores) s = unit(rng);
  const std::vector<std::uint32_t> exclude = {3, 99, 512};
  for (auto _ : state) {
    benchmark::DoNotOptimize(rank_topn(scores, exclude, 100));
  }
}
BENCHMARK(BM_RankTopn)->Arg(1682)->Arg(20000);

static void BM_FitEase(benchmark::State& state) {
  const auto items = static_cast<std::uint32_t>(state.range(0));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  InteractionLog log;
  log.user_count = 500;
  log.item_count = items;
  for (std::uint32_t u = 0; u < 500; ++u) log.users.intern("u" + std::to_string(u));
  for (std::uint32_t i = 0; i < items; ++i) log.items.intern("i" + std::to_string(i));
  for (std::uint32_t i = 0; i < items; ++i) log.events.push_back({0, i, 0});
  for (std::uint32_t u = 1; u < 500; ++u) {
    for (std::uint32_t i = 0; i < items; ++i) {
      if (unit(rng) < 0.05) log.events.push_back({u, i, 0});
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_ease(log, 10.0).B.data());
  }
  state.SetLabel(std::to_string(log.events.size()) + " events");
}
BENCHMARK(BM_FitEase)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
