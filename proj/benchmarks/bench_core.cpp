#include <memory>

#include <benchmark/benchmark.h>

#include "rotgyro/basis.hpp"
#include "rotgyro/dynamics.hpp"
#include "rotgyro/frame.hpp"
#include "rotgyro/hamiltonian.hpp"
#include "rotgyro/spectrum.hpp"
#include "rotgyro/states.hpp"

using namespace rotgyro;

namespace {

ModelParams params(int n) { return ModelParams::from_reduced_coupling(n, 1.0); }

// shared across benchmarks; building it is measured separately
const HamiltonianModel& model(int n) {
    static std::unique_ptr<HamiltonianModel> cache[13];
    if (!cache[n]) {
        const ModelParams p = params(n);
        cache[n] = std::make_unique<HamiltonianModel>(p, std::make_shared<const ManyBodyBasis>(p.spec));
    }
    return *cache[n];
}

void BM_BuildBasis(benchmark::State& state) {
    const ModelParams p = params(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        ManyBodyBasis b(p.spec);
        benchmark::DoNotOptimize(b.dimension());
    }
}
BENCHMARK(BM_BuildBasis)->Arg(6)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_BuildModel(benchmark::State& state) {
    const ModelParams p = params(static_cast<int>(state.range(0)));
    const auto basis = std::make_shared<const ManyBodyBasis>(p.spec);
    for (auto _ : state) {
        HamiltonianModel m(p, basis);
        benchmark::DoNotOptimize(m.dimension());
    }
}
BENCHMARK(BM_BuildModel)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Assemble(benchmark::State& state) {
    const auto& m = model(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(m.assemble(0.82).matrix.nonZeros());
}
BENCHMARK(BM_Assemble)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_LowestTwo(benchmark::State& state) {
    const auto& m = model(static_cast<int>(state.range(0)));
    SolverOptions s;
    s.dense_threshold = 0;
    for (auto _ : state) benchmark::DoNotOptimize(solve_at(m, 0.82, 2, s).values(0));
}
BENCHMARK(BM_LowestTwo)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_TwoModeProjection(benchmark::State& state) {
    const auto& m = model(8);
    const ManyBodyState gs = ground_state(m, solve_at(m, 0.82, 2));
    const NaturalOrbitals no = spdm(gs);
    for (auto _ : state) benchmark::DoNotOptimize(two_mode_project(gs, no).fidelity);
}
BENCHMARK(BM_TwoModeProjection)->Unit(benchmark::kMillisecond);

void BM_FreeEvolution(benchmark::State& state) {
    const auto& m = model(8);
    FrameOptions fo;
    fo.energy_window = 2.45;
    fo.omega_min = 0.8;
    fo.omega_max = 0.85;
    const IsotropicFrame frame(m, fo);
    ComplexVector v = ComplexVector::Zero(frame.size());
    v(0) = 1.0;
    const double tau = static_cast<double>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(free_evolution(frame, v, 0.82, tau)(0));
    state.counters["frame"] = static_cast<double>(frame.size());
}
BENCHMARK(BM_FreeEvolution)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
