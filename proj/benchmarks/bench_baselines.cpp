#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "risfarm/baselines.hpp"

using namespace risfarm;

namespace {

// per-decision cost of the classical solvers at Table-I scale
void BM_zfr_decision(benchmark::State& state) {
    const SystemConfig cfg = bench::with_n(bench::table1(), static_cast<int>(state.range(0)));
    Rng rng(1);
    const ChannelState s = draw_initial_state(cfg, rng);
    for (auto _ : state) benchmark::DoNotOptimize(zfr_policy(s, rng, cfg));
}

void BM_sfp_decision(benchmark::State& state) {
    const SystemConfig cfg = bench::with_n(bench::table1(), static_cast<int>(state.range(0)));
    Rng rng(2);
    const ChannelState s = draw_initial_state(cfg, rng);
    SfpSettings settings;
    settings.seed = 7;
    for (auto _ : state) benchmark::DoNotOptimize(sfp_policy(s, settings, cfg));
}

}  // namespace

BENCHMARK(BM_zfr_decision)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(BM_sfp_decision)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
