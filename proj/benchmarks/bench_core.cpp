#include <benchmark/benchmark.h>

#include "lsc/presets.hpp"
#include "lsc/solver.hpp"

namespace {

lsc::JetPoint sample_jet(int np) {
    lsc::JetPoint j;
    j.t = 0.5;
    j.z = lsc::Vector::Constant(1, 1.0);
    j.p = lsc::Vector::Constant(np, 0.8);
    j.m = 0.7;
    const int n = j.dim();
    j.q = lsc::Vector::LinSpaced(n, 0.3, -0.4);
    lsc::Matrix r = lsc::Matrix::Identity(n, n);
    for (int i = 0; i + 1 < n; ++i) r(i, i + 1) = r(i + 1, i) = 0.1;
    j.A = r;
    j.c = -0.05;
    return j;
}

void BM_SlStep(benchmark::State& state) {
    const lsc::Preset p = lsc::make_preset("gbm1");
    const int n = p.spec.grid.n();
    const lsc::VariantKey root = lsc::root_variant(n - 1, n);
    const lsc::ValueSlice terminal = lsc::terminal_slice(root, p.grid, p.spec);
    const lsc::StepContext ctx = lsc::StepContext::make(p.spec, p.grid, p.grid.dt);
    const double s = p.spec.grid.horizon() - p.grid.dt;
    for (auto _ : state) benchmark::DoNotOptimize(lsc::sl_step(terminal, s, ctx));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(terminal.values.size()));
}
BENCHMARK(BM_SlStep)->Unit(benchmark::kMillisecond);

void BM_EvalH(benchmark::State& state) {
    const lsc::Preset p = lsc::make_preset("gbm2");
    const lsc::JetPoint j = sample_jet(2);
    const auto sphere = lsc::sphere_sample(j.sphere_dim(), 8);
    const lsc::Vector u = p.spec.controls.discretize(1).front();
    const lsc::ScalingFns scaling = lsc::ScalingFns::one_vee();
    std::size_t k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(lsc::eval_H(j, u, sphere[k], scaling, p.spec.sde));
        k = (k + 1) % sphere.size();
    }
}
BENCHMARK(BM_EvalH);

void BM_SupHamiltonian(benchmark::State& state) {
    const lsc::Preset p = lsc::make_preset("gbm2");
    const lsc::JetPoint j = sample_jet(2);
    const lsc::ScalingFns scaling = lsc::ScalingFns::unit();
    const int resolution = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(lsc::sup_hamiltonian(j, p.spec.controls, scaling, p.spec.sde, resolution));
}
BENCHMARK(BM_SupHamiltonian)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_Interpolate(benchmark::State& state) {
    const lsc::Preset p = lsc::make_preset("gbm1");
    const int n = p.spec.grid.n();
    const lsc::ValueSlice s = lsc::terminal_slice(lsc::root_variant(n - 1, n), p.grid, p.spec);
    lsc::Vector x = lsc::Vector::Constant(s.grid.rank(), 0.9);
    for (auto _ : state) {
        x[0] = x[0] > 1.5 ? 0.7 : x[0] + 0.013;
        benchmark::DoNotOptimize(s.interpolate(x));
    }
}
BENCHMARK(BM_Interpolate);

} // namespace

BENCHMARK_MAIN();
