#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "percept/attention.hpp"
#include "percept/audio.hpp"
#include "percept/latent.hpp"
#include "percept/runtime.hpp"
#include "percept/stream.hpp"

namespace {

percept::StreamConfig desk_config(int64_t channels) {
    percept::StreamConfig cfg;
    cfg.input_channels = channels;
    cfg.latent_dim = 256;
    cfg.encoder_depth = 6;
    cfg.decoder_depth = 6;
    cfg.base_channels = 8;
    return cfg;
}

void BM_EncodeBatch(benchmark::State& state) {
    torch::NoGradGuard guard;
    percept::ReconstructionStream stream(desk_config(3), 1);
    auto batch = torch::rand({state.range(0), 3, 128, 128}) * 2 - 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(stream.encode(batch).mean());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeBatch)->Arg(1)->Arg(16);

void BM_DecodeBatch(benchmark::State& state) {
    torch::NoGradGuard guard;
    percept::ReconstructionStream stream(desk_config(3), 1);
    auto z = torch::randn({state.range(0), 256});
    for (auto _ : state) {
        benchmark::DoNotOptimize(stream.decode(z));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DecodeBatch)->Arg(1)->Arg(16);

void BM_AttentionShift(benchmark::State& state) {
    torch::NoGradGuard guard;
    const int64_t d = state.range(0);
    percept::ContextAttention can(d);
    percept::GaussianLatent face(torch::randn({16, d}), torch::randn({16, d}) * 0.1);
    percept::GaussianLatent context(torch::randn({16, d}), torch::randn({16, d}) * 0.1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(can->forward(face, context, 1.0).shifted.mean());
    }
    state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_AttentionShift)->Arg(128)->Arg(256)->Arg(512);

void BM_MelPatch(benchmark::State& state) {
    percept::MelExtractor extractor;
    auto audio = torch::sin(torch::arange(0, 4 * percept::kSampleRate, torch::kFloat32) * 0.3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(extractor.patch(audio, 2.0).values);
    }
}
BENCHMARK(BM_MelPatch);

void BM_KlBetweenBatch(benchmark::State& state) {
    torch::NoGradGuard guard;
    percept::GaussianLatent p(torch::randn({256, 256}), torch::randn({256, 256}) * 0.1);
    percept::GaussianLatent q(torch::randn({256, 256}), torch::randn({256, 256}) * 0.1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(percept::kl_between_batch(p, q));
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_KlBetweenBatch);

}  // namespace

int main(int argc, char** argv) {
    torch::set_num_threads(1);
    benchmark::Initialize(&argc, argv);
    benchmark::RunSpecifiedBenchmarks();
    return 0;
}
