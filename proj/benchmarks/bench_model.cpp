// SPDX-License-Identifier: Apache-2.0
#include <random>

#include <benchmark/benchmark.h>

#include "wardseq/seqnet.hpp"

using namespace wardseq;

namespace {

struct Input {
    Tensor3 x;
    MaskMatrix mask;
};

Input make_input(std::size_t batch, std::size_t time, std::size_t width) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    Input in{Tensor3(batch, time, width), MaskMatrix(batch, time)};
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t pad = b % 4;
        in.mask.set_valid_suffix(b, time - pad);
        for (std::size_t t = pad; t < time; ++t)
            for (double& v : in.x.step(b, t)) v = n(rng);
    }
    return in;
}

ModelParams model_for(Architecture arch, std::size_t width) {
    ModelConfig cfg = arch == Architecture::lstm_stack ? ModelConfig::lstm(width, {{16, true, 0.2}, {16, true, 0.2}})
                                                       : ModelConfig::transformer(width, 2, 6, 16, 64, 0.2);
    cfg.init_seed = 3;
    return init_model(cfg);
}

void forward(benchmark::State& state, Architecture arch) {
    const auto time = static_cast<std::size_t>(state.range(0));
    const Input in = make_input(32, time, 12);
    const ModelParams m = model_for(arch, 12);
    for (auto _ : state) benchmark::DoNotOptimize(model_forward(m, in.x, in.mask, false, nullptr));
    state.SetItemsProcessed(state.iterations() * 32);
}

void forward_backward(benchmark::State& state, Architecture arch) {
    const auto time = static_cast<std::size_t>(state.range(0));
    const Input in = make_input(32, time, 12);
    const ModelParams m = model_for(arch, 12);
    std::mt19937_64 rng(5);
    const std::vector<double> d(32, 0.01);
    for (auto _ : state) {
        ForwardCache cache;
        benchmark::DoNotOptimize(model_forward(m, in.x, in.mask, true, &rng, &cache));
        benchmark::DoNotOptimize(model_backward(m, cache, d));
    }
    state.SetItemsProcessed(state.iterations() * 32);
}

}  // namespace

BENCHMARK_CAPTURE(forward, lstm, Architecture::lstm_stack)->Arg(8)->Arg(21);
BENCHMARK_CAPTURE(forward, transformer, Architecture::transformer_encoder)->Arg(8)->Arg(21);
BENCHMARK_CAPTURE(forward_backward, lstm, Architecture::lstm_stack)->Arg(8)->Arg(21);
BENCHMARK_CAPTURE(forward_backward, transformer, Architecture::transformer_encoder)->Arg(8)->Arg(21);
