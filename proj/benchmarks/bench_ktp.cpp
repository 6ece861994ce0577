#include <benchmark/benchmark.h>

#include "ktp/evaluation.hpp"
#include "ktp/model.hpp"
#include "ktp/ops.hpp"
#include "ktp/rng.hpp"
#include "ktp/topology.hpp"
#include "ktp/training.hpp"
#include "ktp/transformer.hpp"

using namespace ktp;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool parameter = false) {
  Rng rng(seed);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return parameter ? Tensor::parameter(std::move(shape), std::move(v))
                   : Tensor::constant(std::move(shape), std::move(v));
}

PoseSequence random_pose(std::size_t t, std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  PoseSequence p(t, n, d);
  for (double& v : p.values) v = rng.uniform(-300.0, 300.0);
  return p;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1);
  const Tensor b = random_tensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.counters["flops"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_Combine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor local = build_temporal_local(n, 1);
  const Tensor global = random_tensor({n, n}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(combine(local, global));
}
BENCHMARK(BM_Combine)->Arg(27)->Arg(243);

void BM_Attention(benchmark::State& state) {
  const auto seq = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  const MHSAParams p = init_mhsa(64, 4, rng);
  const Tensor x = random_tensor({17, seq, 64}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(mhsa(x, p));
}
BENCHMARK(BM_Attention)->Arg(27)->Arg(81);

void BM_ModelForward(benchmark::State& state) {
  ModelConfig c = ModelConfig::desk();
  c.mode = static_cast<WiringMode>(state.range(0));
  const Model model = Model::initialize(c, SkeletonGraph::h36m17(), 6);
  const Tensor x = random_tensor({c.frames, c.joints, 2}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
  state.SetLabel(std::string(mode_name(c.mode)));
  state.counters["flops"] =
      benchmark::Counter(static_cast<double>(count_flops(c)), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_ModelForward)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig c = ModelConfig::desk();
  Model model = Model::initialize(c, SkeletonGraph::h36m17(), 8);
  TrainSchedule schedule;
  schedule.steps = 1;
  schedule.batch_size = 1;
  Trainer trainer(model, LossWeights{}, AdamSettings{}, schedule);
  const std::vector<TrainingClip> clips{
      {"bench", random_pose(c.frames, c.joints, 2, 9), random_pose(c.frames, c.joints, 3, 10)}};
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(clips));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const PoseSequence pred = random_pose(243, 17, 3, 11);
  const PoseSequence gt = random_pose(243, 17, 3, 12);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(pred, gt));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
