#include <benchmark/benchmark.h>

#include "risfarm/numerics.hpp"

using namespace risfarm;

namespace {

CMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    CMatrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = cdouble(rng.uniform(-1, 1), rng.uniform(-1, 1));
    return m;
}

void BM_matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const CMatrix a = random_matrix(rng, n, n);
    const CMatrix b = random_matrix(rng, n, n);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * n * n * n);
}

void BM_solve_hermitian(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const CMatrix a = random_matrix(rng, n, n);
    CMatrix gram = matmul(hermitian(a), a);
    for (std::size_t i = 0; i < n; ++i) gram.at(i, i) += 0.1;
    const CMatrix b = random_matrix(rng, n, 4);
    for (auto _ : state) benchmark::DoNotOptimize(solve_hermitian_system(gram, b));
}

void BM_draw_cn(benchmark::State& state) {
    Rng rng(3);
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(draw_cn(rng, n, n));
    state.SetItemsProcessed(state.iterations() * n * n);
}

}  // namespace

BENCHMARK(BM_matmul)->Arg(8)->Arg(32)->Arg(64);
BENCHMARK(BM_solve_hermitian)->Arg(4)->Arg(8);
BENCHMARK(BM_draw_cn)->Arg(8)->Arg(32);
