#include "flowcast/flow.hpp"
#include "flowcast/lstm.hpp"
#include "flowcast/seq2seq.hpp"
#include "flowcast/training.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace flowcast;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = u(rng);
    return m;
}

void BM_CellForward(benchmark::State& state) {
    const auto H = static_cast<std::size_t>(state.range(0));
    auto model = init_params({1, 1, 1, 5}, H, 1);
    std::vector<double> x{0.1, -0.2, 0.3, 0.4, -0.5};
    auto s = LstmState::zeros(H);
    for (auto _ : state) benchmark::DoNotOptimize(lstm_cell_forward(x, s, model.encoder));
}
BENCHMARK(BM_CellForward)->Arg(16)->Arg(100);

void BM_CellBackward(benchmark::State& state) {
    const auto H = static_cast<std::size_t>(state.range(0));
    auto model = init_params({1, 1, 1, 5}, H, 1);
    auto fwd = lstm_cell_forward(std::vector<double>{0.1, -0.2, 0.3, 0.4, -0.5}, LstmState::zeros(H), model.encoder);
    auto grads = LstmParams::zeros(5, H);
    std::vector<double> dh(H, 0.1), dc(H, 0.0);
    for (auto _ : state) benchmark::DoNotOptimize(lstm_cell_backward(dh, dc, fwd.cache, model.encoder, grads));
}
BENCHMARK(BM_CellBackward)->Arg(16)->Arg(100);

// One training sample at the scaled-down and the full-size window.
void BM_SampleBackward(benchmark::State& state) {
    const WindowSpec spec{static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), 1, 5};
    const auto H = static_cast<std::size_t>(state.range(2));
    auto model = init_params(spec, H, 1);
    auto x = random_matrix(spec.lookback, 5, 2);
    auto y = random_matrix(spec.horizon, 5, 3);
    auto grads = zeros_like(model);
    for (auto _ : state) benchmark::DoNotOptimize(backward_accumulate(x, y, model, {}, grads));
}
BENCHMARK(BM_SampleBackward)->Args({24, 12, 16})->Args({240, 120, 100})->Unit(benchmark::kMillisecond);

void BM_SummarizeBin(benchmark::State& state) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::uint64_t> size(40, 1500);
    std::vector<std::uint64_t> sizes(static_cast<std::size_t>(state.range(0)));
    for (auto& s : sizes) s = size(rng);
    for (auto _ : state) benchmark::DoNotOptimize(summarize_bin(sizes));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SummarizeBin)->Arg(1000)->Arg(100000);

} // namespace
BENCHMARK_MAIN();
