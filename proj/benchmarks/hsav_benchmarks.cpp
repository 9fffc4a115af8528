#include "hsav/models.hpp"
#include "hsav/stepper.hpp"
#include "hsav/tableau.hpp"

#include <benchmark/benchmark.h>

#include <numbers>

namespace {

using namespace hsav;

Grid2D square(std::size_t n) { return Grid2D(n, n, 4.0 * std::numbers::pi, 4.0 * std::numbers::pi); }

void BM_ForwardInverse(benchmark::State& state) {
    const Grid2D grid = square(static_cast<std::size_t>(state.range(0)));
    const Field f = initial_condition(RandomInit{1.0, 0.0, 1}, grid);
    for (auto _ : state) benchmark::DoNotOptimize(inverse(forward(f)));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(grid.size()));
}
BENCHMARK(BM_ForwardInverse)->Arg(64)->Arg(128)->Arg(256);

void BM_Laplacian(benchmark::State& state) {
    const Grid2D grid = square(static_cast<std::size_t>(state.range(0)));
    const Field f = initial_condition(RandomInit{1.0, 0.0, 1}, grid);
    const auto lap = make_operator_symbol(grid, SymbolKind::linear, OperatorRecipe::polynomial({0.0, 1.0}));
    for (auto _ : state) benchmark::DoNotOptimize(apply_symbol(lap, f));
}
BENCHMARK(BM_Laplacian)->Arg(64)->Arg(128)->Arg(256);

void BM_GaussTableau(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(gauss_tableau(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_GaussTableau)->DenseRange(1, 5);

// One step of the coarsening problem after a short spinodal transient.
void BM_CahnHilliardStep(benchmark::State& state) {
    const Grid2D grid = square(128);
    const auto model = cahn_hilliard({0.1, 0.025, 1.0, std::nullopt}, grid);
    const int stages = static_cast<int>(state.range(0));
    const double dt = 1e-2;
    const SavState st = integrate(init_consistent(initial_condition(RandomInit{1e-3, 0.0, 7}, grid), model), model,
                                  Method::gauss(2), dt, 0.5);
    HsavStepper stepper(model, gauss_tableau(stages));
    int iterations = 0;
    for (auto _ : state) {
        const StepResult r = stepper.step(st, dt);
        iterations = r.report.iterations_used;
        benchmark::DoNotOptimize(r.state.q);
    }
    state.counters["sweeps"] = iterations;
}
BENCHMARK(BM_CahnHilliardStep)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

void BM_CrankNicolsonStep(benchmark::State& state) {
    const Grid2D grid = square(128);
    const auto model = cahn_hilliard({0.1, 0.025, 1.0, std::nullopt}, grid);
    const SavState st = init_consistent(initial_condition(RandomInit{1e-3, 0.0, 7}, grid), model);
    const CnHistory history{st.phi, 1e-2};
    for (auto _ : state) benchmark::DoNotOptimize(sav_cn_step(st, model, 1e-2, history).state.q);
}
BENCHMARK(BM_CrankNicolsonStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
