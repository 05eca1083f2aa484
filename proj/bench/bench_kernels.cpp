// Reference (serial) versus parallel kernels.

#include <benchmark/benchmark.h>

#include <vector>

#include "cranial/edt.hpp"
#include "cranial/kernels.hpp"
#include "cranial/morphology.hpp"
#include "cranial/phantom.hpp"
#include "cranial/rng.hpp"

using namespace cranial;
namespace k = cranial::kernels;

namespace {

struct ConvFixture {
    k::ConvDims cd;
    std::vector<double> x, w, b, y, gy, gx, gw, gb;

    ConvFixture(std::int64_t in_c, std::int64_t out_c, std::int64_t side) {
        cd.in_channels = in_c;
        cd.out_channels = out_c;
        cd.in_d = cd.in_h = cd.in_w = side;
        cd.k_d = cd.k_h = cd.k_w = 3;
        cd.pad = 1;
        Rng rng(1);
        auto fill = [&](std::vector<double>& v, std::int64_t n) {
            v.resize(static_cast<std::size_t>(n));
            for (auto& e : v) e = rng.uniform(-1, 1);
        };
        fill(x, in_c * cd.in_spatial());
        fill(w, out_c * in_c * 27);
        fill(b, out_c);
        fill(gy, out_c * cd.out_spatial());
        y.resize(gy.size());
        gx.resize(x.size());
        gw.resize(w.size());
        gb.resize(b.size());
    }
};

template <bool Parallel>
void BM_ConvForward(benchmark::State& st) {
    ConvFixture f(st.range(0), st.range(0), st.range(1));
    for (auto _ : st) {
        if constexpr (Parallel) k::parallel::conv3d_forward(f.cd, f.x, f.w, f.b, f.y);
        else k::reference::conv3d_forward(f.cd, f.x, f.w, f.b, f.y);
        benchmark::DoNotOptimize(f.y.data());
    }
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& st) {
    ConvFixture f(st.range(0), st.range(0), st.range(1));
    for (auto _ : st) {
        if constexpr (Parallel) k::parallel::conv3d_backward(f.cd, f.x, f.w, f.gy, f.gx, f.gw, f.gb);
        else k::reference::conv3d_backward(f.cd, f.x, f.w, f.gy, f.gx, f.gw, f.gb);
        benchmark::DoNotOptimize(f.gw.data());
    }
}

const VoxelGrid& skull() {
    static const VoxelGrid g = generate_phantom(PhantomConfig{{64, 64, 64}}, 3);
    return g;
}

void BM_DilateEdt(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(dilate(skull(), static_cast<int>(st.range(0))));
}

void BM_DilateScan(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(reference::dilate_scan(skull(), static_cast<int>(st.range(0))));
}

void BM_Edt(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(edt_squared(skull()));
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Args({8, 16})->Args({16, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<true>)->Args({8, 16})->Args({16, 16})->Args({8, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<false>)->Args({8, 16})->Args({16, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<true>)->Args({8, 16})->Args({16, 16})->Args({8, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DilateScan)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DilateEdt)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Edt)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
