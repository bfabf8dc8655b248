#include <benchmark/benchmark.h>

#include "risfarm/neural.hpp"

using namespace risfarm;
using nn::Activation;
using nn::Mlp;
using nn::RMatrix;

namespace {

void BM_mlp_forward(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    Mlp net({104, 128, 128, 64}, Activation::relu);
    net.init(rng);
    RMatrix x(batch, 104);
    for (double& v : x.v) v = rng.uniform(-1, 1);
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}

void BM_mlp_forward_backward(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    Mlp net({104, 128, 128, 64}, Activation::relu);
    net.init(rng);
    RMatrix x(batch, 104);
    for (double& v : x.v) v = rng.uniform(-1, 1);
    RMatrix dy(batch, 64);
    for (double& v : dy.v) v = rng.uniform(-1, 1);
    for (auto _ : state) {
        net.forward(x);
        net.zero_grad();
        benchmark::DoNotOptimize(net.backward(dy));
    }
}

}  // namespace

BENCHMARK(BM_mlp_forward)->Arg(1)->Arg(128);
BENCHMARK(BM_mlp_forward_backward)->Arg(128);
