// Serial reference vs OpenMP kernels. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "dirtytx/kernels.hpp"
#include "dirtytx/units.hpp"

using namespace dirtytx;

namespace {

Exec exec_of(const benchmark::State& s) { return s.range(0) ? Exec::parallel : Exec::serial; }

HardwareConfig bench_hardware() {
  HardwareConfig hw;
  const double g = std::sqrt(1000.0), k = std::sqrt(units::db_to_linear(-50.0));
  hw.gamma = {g, g};
  hw.kappa = {k, k};
  hw.rho = {-0.025, -0.025};
  hw.sigma_w2 = units::dbm_to_watt(-10.0);
  return hw;
}

void BM_gaussian(benchmark::State& s) {
  const auto chol = ComplexMat2::diag(1.0, 1.0);
  for (auto _ : s)
    benchmark::DoNotOptimize(kernels::gaussian_blocks(exec_of(s), chol, 1 << 18, 1, Stream::inputs));
}

void BM_feedback(benchmark::State& s) {
  const auto hw = bench_hardware();
  const auto x = kernels::gaussian_blocks(Exec::serial, ComplexMat2::diag(1e-4, 1e-4), 1 << 15,
                                          2, Stream::inputs);
  for (auto _ : s)
    benchmark::DoNotOptimize(kernels::feedback_batch(exec_of(s), hw, std::span(x), FeedbackOptions{}));
}

void BM_minmax_grid(benchmark::State& s) {
  const auto hw = bench_hardware();
  const auto curves = nmse_curves(hw, {1.0, 1.0, 0.0});
  const auto grid = log_power_grid({-40.0, 20.0, 1 << 20});
  for (auto _ : s)
    benchmark::DoNotOptimize(kernels::minmax_grid(exec_of(s), curves, std::span(grid)));
}

void BM_precoder_grid(benchmark::State& s) {
  const auto hw = bench_hardware();
  const ChannelSpec ch{{cplx{1.0, 0.0}, cplx{0.0, 1.0}}, 1.0};
  for (auto _ : s)
    benchmark::DoNotOptimize(kernels::precoder_grid(exec_of(s), ch, hw, 0.0, 3.0, 3.0, 400));
}

}  // namespace

BENCHMARK(BM_gaussian)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_feedback)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_minmax_grid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_precoder_grid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
