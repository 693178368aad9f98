// Serial reference kernels against the OpenMP versions.

#include <benchmark/benchmark.h>

#include "longreg/ffd.hpp"
#include "longreg/kern/bending.hpp"
#include "longreg/kern/blur.hpp"
#include "longreg/kern/common.hpp"
#include "longreg/kern/conv.hpp"
#include "longreg/kern/interp.hpp"
#include "longreg/rng.hpp"

using namespace longreg;

namespace {

constexpr Dims3 kDims = {64, 64, 64};

std::vector<float> random_field(std::size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = float(rng.uniform(-1, 1));
    return v;
}

void bm_warp_omp(benchmark::State& state) {
    const std::size_t n = voxel_count(kDims);
    const auto vol = random_field(n, 1);
    const auto disp = random_field(3 * n, 2);
    const auto view = kern::ConstVecFieldView<float>::interleaved(disp.data());
    std::vector<float> out(n);
    for (auto _ : state) {
        kern::warp_fwd(vol.data(), kDims, view, out.data());
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_warp_ref(benchmark::State& state) {
    const std::size_t n = voxel_count(kDims);
    const auto vol = random_field(n, 1);
    const auto disp = random_field(3 * n, 2);
    const auto view = kern::ConstVecFieldView<float>::interleaved(disp.data());
    std::vector<float> out(n);
    for (auto _ : state) {
        kern::ref::warp_fwd(vol.data(), kDims, view, out.data());
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_conv_omp(benchmark::State& state) {
    const Dims3 din = {32, 32, 32};
    const int cin = 8, cout = 8, k = 3;
    const auto in = random_field(cin * voxel_count(din), 1);
    const auto w = random_field(std::size_t(cout) * cin * k * k * k, 2);
    const auto b = random_field(cout, 3);
    const Dims3 dout = kern::conv_out_dims(din, k, 1);
    std::vector<float> out(cout * voxel_count(dout));
    for (auto _ : state) {
        kern::conv3_fwd(in.data(), cin, din, w.data(), b.data(), cout, k, 1,
                        out.data(), dout);
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_conv_ref(benchmark::State& state) {
    const Dims3 din = {32, 32, 32};
    const int cin = 8, cout = 8, k = 3;
    const auto in = random_field(cin * voxel_count(din), 1);
    const auto w = random_field(std::size_t(cout) * cin * k * k * k, 2);
    const auto b = random_field(cout, 3);
    const Dims3 dout = kern::conv_out_dims(din, k, 1);
    std::vector<float> out(cout * voxel_count(dout));
    for (auto _ : state) {
        kern::ref::conv3_fwd(in.data(), cin, din, w.data(), b.data(), cout, k,
                             1, out.data(), dout);
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_blur_omp(benchmark::State& state) {
    const std::size_t n = voxel_count(kDims);
    const auto in = random_field(n, 1);
    std::vector<float> out(n);
    for (auto _ : state) {
        kern::gauss_blur(in.data(), out.data(), kDims, 2.0);
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_blur_ref(benchmark::State& state) {
    const Dims3 d = {24, 24, 24}; // direct 3-D blur is cubic in the radius
    const std::size_t n = voxel_count(d);
    const auto in = random_field(n, 1);
    std::vector<float> out(n);
    for (auto _ : state) {
        kern::ref::gauss_blur(in.data(), out.data(), d, 2.0);
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_bending_omp(benchmark::State& state) {
    const auto u = random_field(3 * voxel_count(kDims), 1);
    const auto view = kern::ConstVecFieldView<float>::interleaved(u.data());
    for (auto _ : state) {
        double e = kern::bending_fwd(view, kDims);
        benchmark::DoNotOptimize(e);
    }
}

void bm_bending_ref(benchmark::State& state) {
    const auto u = random_field(3 * voxel_count(kDims), 1);
    const auto view = kern::ConstVecFieldView<float>::interleaved(u.data());
    for (auto _ : state) {
        double e = kern::ref::bending_fwd(view, kDims);
        benchmark::DoNotOptimize(e);
    }
}

void bm_ffd_omp(benchmark::State& state) {
    FFDGrid g = make_ffd_grid(kDims, 5);
    Rng rng(4);
    for (auto& x : g.disp) x = float(rng.uniform(-2, 2));
    for (auto _ : state) {
        DDF d = ffd_to_ddf(g, kDims, {1, 1, 1});
        benchmark::DoNotOptimize(d.disp.data());
    }
}

void bm_ffd_ref(benchmark::State& state) {
    FFDGrid g = make_ffd_grid(kDims, 5);
    Rng rng(4);
    for (auto& x : g.disp) x = float(rng.uniform(-2, 2));
    for (auto _ : state) {
        DDF d = ref::ffd_to_ddf(g, kDims, {1, 1, 1});
        benchmark::DoNotOptimize(d.disp.data());
    }
}

BENCHMARK(bm_warp_omp);
BENCHMARK(bm_warp_ref);
BENCHMARK(bm_conv_omp);
BENCHMARK(bm_conv_ref);
BENCHMARK(bm_blur_omp);
BENCHMARK(bm_blur_ref);
BENCHMARK(bm_bending_omp);
BENCHMARK(bm_bending_ref);
BENCHMARK(bm_ffd_omp);
BENCHMARK(bm_ffd_ref);

} // namespace

BENCHMARK_MAIN();
