#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "risfarm/link.hpp"

using namespace risfarm;

namespace {

void BM_effective_channel(benchmark::State& state) {
    const SystemConfig cfg = bench::with_n(bench::table1(), static_cast<int>(state.range(0)));
    Rng rng(1);
    const ChannelState s = draw_initial_state(cfg, rng);
    PhaseShift phase;
    for (int n = 0; n < cfg.n_ris; ++n) phase.theta.push_back(rng.uniform(0.0, 6.28));
    for (auto _ : state) benchmark::DoNotOptimize(effective_channel(s, phase));
}

void BM_evaluate_link(benchmark::State& state) {
    const SystemConfig cfg = bench::with_n(bench::table1(), static_cast<int>(state.range(0)));
    Rng rng(2);
    const ChannelState s = draw_initial_state(cfg, rng);
    PhaseShift phase;
    for (int n = 0; n < cfg.n_ris; ++n) phase.theta.push_back(rng.uniform(0.0, 6.28));
    CMatrix w_raw(cfg.m_antennas, cfg.k_users);
    for (std::size_t i = 0; i < w_raw.size(); ++i)
        w_raw.data()[i] = cdouble(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Beamformer w = normalize_power(w_raw, cfg.p_max);
    const double noise = cfg.noise_power_w();
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_link(s, w, phase, noise));
}

}  // namespace

BENCHMARK(BM_effective_channel)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(BM_evaluate_link)->Arg(16)->Arg(32)->Arg(64);
