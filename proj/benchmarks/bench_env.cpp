#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "risfarm/env.hpp"

using namespace risfarm;

namespace {

void BM_env_step(benchmark::State& state) {
    const SystemConfig cfg = bench::desk();
    RisEnv env(cfg, EnvOptions{1000000, false});
    const auto tasks = make_task_batch(1, 1, cfg);
    env.reset(tasks[0]);
    Rng rng(2);
    ActionVector a;
    a.values.resize(action_dim(cfg));
    for (double& v : a.values) v = rng.uniform(-1, 1);
    for (auto _ : state) benchmark::DoNotOptimize(env.step(a));
}

void BM_encode_state(benchmark::State& state) {
    const SystemConfig cfg = bench::table1();
    Rng rng(3);
    const ChannelState s = draw_initial_state(cfg, rng);
    for (auto _ : state) benchmark::DoNotOptimize(encode_state(s, cfg, true));
}

}  // namespace

BENCHMARK(BM_env_step);
BENCHMARK(BM_encode_state);
