#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "risfarm/channel.hpp"

using namespace risfarm;

namespace {

void BM_draw_h1(benchmark::State& state) {
    const SystemConfig cfg = bench::with_n(bench::table1(), static_cast<int>(state.range(0)));
    Rng rng(1);
    for (auto _ : state) benchmark::DoNotOptimize(draw_h1(cfg, rng));
}

void BM_ar_step(benchmark::State& state) {
    const SystemConfig cfg = bench::with_n(bench::table1(), static_cast<int>(state.range(0)));
    Rng rng(2);
    ChannelState s = draw_initial_state(cfg, rng);
    for (auto _ : state) {
        s = ar_step(s, cfg, rng);
        benchmark::DoNotOptimize(s);
    }
}

}  // namespace

BENCHMARK(BM_draw_h1)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(BM_ar_step)->Arg(16)->Arg(32)->Arg(64);
