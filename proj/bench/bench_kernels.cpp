// Reference (serial) vs parallel kernels at the model's layer sizes.

#include <benchmark/benchmark.h>

#include <vector>

#include "scl/kernels.hpp"
#include "scl/models.hpp"
#include "scl/ops.hpp"
#include "scl/rng.hpp"

namespace k = scl::kernels;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    scl::Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

template <bool Parallel>
void BM_gemm(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    auto a = noise(n * n, 1), b = noise(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : st) {
        if constexpr (Parallel) k::parallel::gemm(false, false, n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
        else k::reference::gemm(false, false, n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
        benchmark::DoNotOptimize(c.data());
    }
    st.counters["GFLOP/s"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

// Encoder's first layer at batch 100: 128 -> 128 channels, 16 frames, K = 6.
k::ConvGeometry encoder_conv() {
    return {.batch = 100, .in_channels = 128, .out_channels = 128, .in_length = 16, .kernel = 6, .stride = 1,
            .pad_left = 0, .out_length = 11};
}

template <bool Parallel>
void BM_conv_forward(benchmark::State& st) {
    const auto g = encoder_conv();
    auto x = noise(g.batch * g.in_channels * g.in_length, 3);
    auto w = noise(g.out_channels * g.in_channels * g.kernel, 4);
    auto b = noise(g.out_channels, 5);
    std::vector<double> y(g.batch * g.out_channels * g.out_length);
    for (auto _ : st) {
        if constexpr (Parallel) k::parallel::conv1d_forward(g, x, w, b, y);
        else k::reference::conv1d_forward(g, x, w, b, y);
        benchmark::DoNotOptimize(y.data());
    }
}

template <bool Parallel>
void BM_conv_backward(benchmark::State& st) {
    const auto g = encoder_conv();
    auto x = noise(g.batch * g.in_channels * g.in_length, 3);
    auto w = noise(g.out_channels * g.in_channels * g.kernel, 4);
    auto dy = noise(g.batch * g.out_channels * g.out_length, 6);
    std::vector<double> dx(x.size()), dw(w.size()), db(g.out_channels);
    for (auto _ : st) {
        if constexpr (Parallel) k::parallel::conv1d_backward(g, x, w, dy, dx, dw, db);
        else k::reference::conv1d_backward(g, x, w, dy, dx, dw, db);
        benchmark::DoNotOptimize(dw.data());
    }
}

// Decoder's last layer at batch 100: 128 -> 128 channels, 10 -> 16 frames.
template <bool Parallel>
void BM_conv_transpose_forward(benchmark::State& st) {
    const k::ConvGeometry g{.batch = 100, .in_channels = 128, .out_channels = 128, .in_length = 10, .kernel = 7,
                            .stride = 1, .pad_left = 0, .out_length = 16};
    auto x = noise(g.batch * g.in_channels * g.in_length, 7);
    auto w = noise(g.in_channels * g.out_channels * g.kernel, 8);
    auto b = noise(g.out_channels, 9);
    std::vector<double> y(g.batch * g.out_channels * g.out_length);
    for (auto _ : st) {
        if constexpr (Parallel) k::parallel::conv1d_transpose_forward(g, x, w, b, y);
        else k::reference::conv1d_transpose_forward(g, x, w, b, y);
        benchmark::DoNotOptimize(y.data());
    }
}

// One full training step (forward, loss, backward) through the library.
void BM_classifier_step(benchmark::State& st) {
    scl::Rng rng(10);
    scl::models::Classifier f(rng);
    const std::size_t b = 100;
    auto x = scl::Tensor::from({b, scl::models::kMelBins, scl::models::kFrames}, noise(b * scl::models::kSegmentSize, 11));
    std::vector<int> y(b);
    for (std::size_t i = 0; i < b; ++i) y[i] = static_cast<int>(i % 10);
    auto t = scl::ops::one_hot(y, 10);
    for (auto _ : st) {
        auto loss = scl::ops::cross_entropy(f.forward(x), t);
        loss.backward();
        benchmark::DoNotOptimize(loss.item());
    }
}

void BM_autoencoder_step(benchmark::State& st) {
    scl::Rng rng(12);
    scl::models::Autoencoder ae(rng);
    const std::size_t b = 100;
    std::vector<double> v = noise(b * scl::models::kSegmentSize, 13);
    for (auto& e : v) e = 0.5 + 0.5 * e;
    auto x = scl::Tensor::from({b, scl::models::kMelBins, scl::models::kFrames}, std::move(v));
    for (auto _ : st) {
        auto loss = scl::ops::bce(ae.forward(x), x);
        loss.backward();
        benchmark::DoNotOptimize(loss.item());
    }
}

}  // namespace

BENCHMARK(BM_gemm<false>)->Name("gemm/reference")->Arg(128)->Arg(256);
BENCHMARK(BM_gemm<true>)->Name("gemm/parallel")->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(BM_conv_forward<false>)->Name("conv1d_forward/reference");
BENCHMARK(BM_conv_forward<true>)->Name("conv1d_forward/parallel");
BENCHMARK(BM_conv_backward<false>)->Name("conv1d_backward/reference");
BENCHMARK(BM_conv_backward<true>)->Name("conv1d_backward/parallel");
BENCHMARK(BM_conv_transpose_forward<false>)->Name("conv1d_transpose_forward/reference");
BENCHMARK(BM_conv_transpose_forward<true>)->Name("conv1d_transpose_forward/parallel");
BENCHMARK(BM_classifier_step)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_autoencoder_step)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
