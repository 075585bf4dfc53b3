#include <benchmark/benchmark.h>

#include "ctfa/attention.hpp"
#include "ctfa/datasynth.hpp"
#include "ctfa/model.hpp"
#include "ctfa/ops.hpp"
#include "ctfa/signal.hpp"

namespace ctfa {
namespace {

// args: channels, T = F
void BM_ComplexConv2d(benchmark::State& state) {
    const std::size_t c = state.range(0), n = state.range(1);
    const Var x = constant(ComplexTensor::random_normal({4, c, n, n}, 1));
    const Var w = constant(ComplexTensor::random_normal({c, c, 3, 4}, 2));
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, Var{}, {1, 2, 1, 1}).value().re().data());
}
BENCHMARK(BM_ComplexConv2d)->Args({4, 32})->Args({16, 32})->Args({16, 64});

void BM_ComplexConv2dBackward(benchmark::State& state) {
    const std::size_t c = state.range(0), n = state.range(1);
    const Var x = parameter(ComplexTensor::random_normal({4, c, n, n}, 1));
    const Var w = parameter(ComplexTensor::random_normal({c, c, 3, 4}, 2));
    const ComplexTensor probe = ComplexTensor::random_normal({4, c, n, n / 2}, 3);
    Tape tape;
    for (auto _ : state) {
        TapeScope scope(tape);
        tape.backward(inner(conv2d(x, w, Var{}, {1, 2, 1, 1}), probe));
    }
}
BENCHMARK(BM_ComplexConv2dBackward)->Args({4, 32})->Args({16, 32});

template <AttentionVariant V>
void BM_Attention(benchmark::State& state) {
    const std::size_t c = state.range(0), n = state.range(1);
    const TfAttentionBlock block(V, c, n, n, 1);
    const Var x = constant(ComplexTensor::random_normal({4, c, n, n}, 2));
    for (auto _ : state) benchmark::DoNotOptimize(block.forward(x).value().re().data());
}
BENCHMARK(BM_Attention<AttentionVariant::Complex>)->Args({4, 32})->Args({8, 64});
BENCHMARK(BM_Attention<AttentionVariant::Conventional>)->Args({4, 32})->Args({8, 64});
BENCHMARK(BM_Attention<AttentionVariant::Sdab>)->Args({4, 32})->Args({8, 64});

// arg: fft size; one second of signal, hop = fft / 4
void BM_StftRoundTrip(benchmark::State& state) {
    const std::size_t n = state.range(0);
    const StftConfig cfg{16000, n, n / 4, n};
    const WaveForm x = synth_clean(16000, 16000, 3);
    for (auto _ : state) benchmark::DoNotOptimize(istft(stft(x, cfg)).samples.data());
}
BENCHMARK(BM_StftRoundTrip)->Arg(128)->Arg(512);

void BM_TrainStepTiny(benchmark::State& state) {
    ModelConfig cfg;
    cfg.frame_len = cfg.fft_size = 64;
    cfg.hop = 16;
    cfg.image_frames = 32;
    cfg.channels = {4, 8};
    cfg.gru_hidden = 16;
    cfg.batch_size = 4;
    SynthConfig sc;
    sc.sample_rate = 8000;
    sc.duration_s = 0.25;
    const PairAudio p = synthesize_pair(1, 0.4, sc);
    const auto data = examples_from_pair(p.clean, p.reverb, cfg);
    cfg.max_steps = 1;
    for (auto _ : state) {
        DccrnModel model(cfg);
        benchmark::DoNotOptimize(train(model, data, {}).log.back().loss);
    }
}
BENCHMARK(BM_TrainStepTiny)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ctfa

BENCHMARK_MAIN();
