// Side-by-side timing of the serial reference kernels and their OpenMP
// counterparts. Both produce bitwise-identical outputs (asserted in the unit
// tests); this target shows what the parallel versions buy at various sizes.

#include <benchmark/benchmark.h>

#include <cstddef>
#include <random>
#include <vector>

#include "mixpro/kernels.hpp"

namespace {

std::vector<double> random_vec(std::size_t n, std::uint32_t seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = dist(gen);
    return v;
}

template <typename Fn>
void bench_matmul(benchmark::State& state, Fn fn) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<double> a = random_vec(n * n, 1);
    std::vector<double> b = random_vec(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        fn(a.data(), b.data(), c.data(), n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n * n * n));
}

void BM_matmul_serial(benchmark::State& state) {
    bench_matmul(state, mixpro::kernels::serial::matmul);
}

void BM_matmul_parallel(benchmark::State& state) {
    bench_matmul(state, mixpro::kernels::parallel::matmul);
}

template <typename Fn>
void bench_elementwise(benchmark::State& state, Fn fn) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<double> a = random_vec(n, 3);
    std::vector<double> b = random_vec(n, 4);
    std::vector<double> c(n);
    for (auto _ : state) {
        fn(1.3, a.data(), -0.7, b.data(), c.data(), n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n));
}

void BM_axpby_serial(benchmark::State& state) {
    bench_elementwise(state, mixpro::kernels::serial::axpby);
}

void BM_axpby_parallel(benchmark::State& state) {
    bench_elementwise(state, mixpro::kernels::parallel::axpby);
}

template <typename Fn>
void bench_gelu(benchmark::State& state, Fn fn) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<double> x = random_vec(n, 5);
    std::vector<double> y(n);
    for (auto _ : state) {
        fn(x.data(), y.data(), n);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n));
}

void BM_gelu_serial(benchmark::State& state) { bench_gelu(state, mixpro::kernels::serial::gelu); }

void BM_gelu_parallel(benchmark::State& state) {
    bench_gelu(state, mixpro::kernels::parallel::gelu);
}

template <typename Fn>
void bench_softmax(benchmark::State& state, Fn fn) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const std::size_t cols = 128;
    std::vector<double> x = random_vec(rows * cols, 6);
    std::vector<double> y(rows * cols);
    for (auto _ : state) {
        fn(x.data(), y.data(), rows, cols);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(rows * cols));
}

void BM_softmax_rows_serial(benchmark::State& state) {
    bench_softmax(state, mixpro::kernels::serial::softmax_rows);
}

void BM_softmax_rows_parallel(benchmark::State& state) {
    bench_softmax(state, mixpro::kernels::parallel::softmax_rows);
}

template <typename Fn>
void bench_layer_norm(benchmark::State& state, Fn fn) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const std::size_t cols = 128;
    std::vector<double> x = random_vec(rows * cols, 7);
    std::vector<double> gamma(cols, 1.0), beta(cols, 0.0);
    std::vector<double> y(rows * cols), xhat(rows * cols), rstd(rows);
    for (auto _ : state) {
        fn(x.data(), gamma.data(), beta.data(), 1e-5, y.data(), xhat.data(), rstd.data(), rows,
           cols);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(rows * cols));
}

void BM_layer_norm_rows_serial(benchmark::State& state) {
    bench_layer_norm(state, mixpro::kernels::serial::layer_norm_rows);
}

void BM_layer_norm_rows_parallel(benchmark::State& state) {
    bench_layer_norm(state, mixpro::kernels::parallel::layer_norm_rows);
}

}  // namespace

BENCHMARK(BM_matmul_serial)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_matmul_parallel)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_axpby_serial)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_axpby_parallel)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_gelu_serial)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_gelu_parallel)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_softmax_rows_serial)->Arg(16)->Arg(256)->Arg(2048);
BENCHMARK(BM_softmax_rows_parallel)->Arg(16)->Arg(256)->Arg(2048);
BENCHMARK(BM_layer_norm_rows_serial)->Arg(16)->Arg(256)->Arg(2048);
BENCHMARK(BM_layer_norm_rows_parallel)->Arg(16)->Arg(256)->Arg(2048);

BENCHMARK_MAIN();
