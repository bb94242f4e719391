// SPDX-License-Identifier: Apache-2.0
#include <random>

#include <benchmark/benchmark.h>

#include "wardseq/metrics.hpp"

namespace {

void scores(std::size_t n, std::vector<double>& s, std::vector<int>& y) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    s.resize(n);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = u(rng) < 0.05 ? 1 : 0;
        s[i] = 0.5 * u(rng) + 0.3 * y[i];
    }
}

void auroc(benchmark::State& state) {
    std::vector<double> s;
    std::vector<int> y;
    scores(static_cast<std::size_t>(state.range(0)), s, y);
    for (auto _ : state) benchmark::DoNotOptimize(wardseq::auroc(s, y));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void auprc(benchmark::State& state) {
    std::vector<double> s;
    std::vector<int> y;
    scores(static_cast<std::size_t>(state.range(0)), s, y);
    for (auto _ : state) benchmark::DoNotOptimize(wardseq::auprc(s, y));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(auroc)->Arg(1000)->Arg(100000);
BENCHMARK(auprc)->Arg(1000)->Arg(100000);

BENCHMARK_MAIN();
