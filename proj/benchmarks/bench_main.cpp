#include <benchmark/benchmark.h>

#include "spike/data.hpp"
#include "spike/model.hpp"
#include "spike/random.hpp"
#include "spike/tokenizer.hpp"

namespace {

using namespace spike;

HyperParams bench_params(std::size_t seq_len, std::size_t blocks) {
  HyperParams hp;
  hp.seq_len = seq_len;
  hp.blocks = blocks;
  hp.num_points = 512;
  hp.num_volumes = 32;
  hp.num_samples = 16;
  hp.channels = hp.conv_channels = hp.key_channels = hp.value_channels = 64;
  hp.heads = 4;
  return hp;
}

Example bench_input(const HyperParams& hp) {
  SyntheticRigConfig rig;
  rig.points_per_frame = 1024;
  rig.frames_per_recording = hp.seq_len;
  const SequenceDataset data = generate_synthetic(rig, 1, 1);
  return make_example(data.recordings[0], hp.seq_len - 1, hp, 1, false);
}

void BM_Forward(benchmark::State& state) {
  const HyperParams hp = bench_params(static_cast<std::size_t>(state.range(0)),
                                      static_cast<std::size_t>(state.range(1)));
  const ModelParams params = ModelParams::init(hp, 1);
  const Example ex = bench_input(hp);
  for (auto _ : state) benchmark::DoNotOptimize(forward(ex.sequence, hp, params, 1));
}
BENCHMARK(BM_Forward)
    ->ArgNames({"T", "m"})
    ->Args({1, 2})
    ->Args({2, 2})
    ->Args({3, 2})
    ->Args({4, 2})
    ->Args({3, 1})
    ->Args({3, 3})
    ->Args({3, 5})
    ->Unit(benchmark::kMillisecond);

void BM_Fps(benchmark::State& state) {
  Rng rng(2);
  PointCloud pc;
  for (long i = 0; i < state.range(0); ++i) pc.points.push_back({uniform01(rng), uniform01(rng), uniform01(rng)});
  for (auto _ : state) benchmark::DoNotOptimize(farthest_point_sampling(pc, 128, 3));
}
BENCHMARK(BM_Fps)->Arg(1024)->Arg(4096)->Unit(benchmark::kMicrosecond);

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<double> a(n * n), b(n * n);
  for (double& v : a) v = uniform01(rng);
  for (double& v : b) v = uniform01(rng);
  const Tensor x = Tensor::from({n, n}, a);
  const Tensor y = Tensor::from({n, n}, b);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(x, y));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
