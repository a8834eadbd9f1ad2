#include <benchmark/benchmark.h>

#include <vector>

#include "c2s/dsp.hpp"
#include "c2s/model.hpp"
#include "c2s/ops.hpp"
#include "c2s/optim.hpp"
#include "c2s/random.hpp"
#include "c2s/stimuli.hpp"

namespace {

c2s::Tensor random_tensor(c2s::Shape shape, std::uint64_t seed) {
  c2s::Rng rng(seed);
  std::vector<float> v(c2s::shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return c2s::Tensor(std::move(shape), std::move(v));
}

void BM_Conv1dForward(benchmark::State& state) {
  const auto dilation = static_cast<int>(state.range(0));
  const auto x = random_tensor({32, 16, 223}, 1);
  const auto w = random_tensor({32, 16, 2}, 2);
  const auto b = random_tensor({32}, 3);
  c2s::NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(c2s::conv1d(x, w, b, dilation));
}
BENCHMARK(BM_Conv1dForward)->Arg(1)->Arg(16);

void BM_TrainStep(benchmark::State& state) {
  const auto variant = static_cast<c2s::Variant>(state.range(0));
  auto model = c2s::Model::build(c2s::ModelConfig::defaults(variant), 7);
  auto params = model.parameters();
  auto adam = c2s::AdamState::create(params);
  const auto x = random_tensor({32, 64, 223}, 4);
  const auto y = random_tensor({32, 32, 100}, 5);
  std::uint64_t step = 0;
  for (auto _ : state) {
    c2s::Tape tape;
    c2s::TapeScope scope(tape);
    c2s::zero_grads(params);
    const auto out = c2s::slice_time(model.forward(x, c2s::Mode::train, ++step), 123, 100);
    const auto loss = c2s::mse_loss(out, y);
    tape.backward(loss);
    c2s::adam_step(params, adam);
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(c2s::Variant::linear))
    ->Arg(static_cast<int>(c2s::Variant::resnet))
    ->Arg(static_cast<int>(c2s::Variant::wavenet))
    ->Unit(benchmark::kMillisecond);

void BM_Analyze(benchmark::State& state) {
  c2s::StimulusOptions o;
  o.words = 1;
  o.reps = 1;
  auto wave = c2s::synth_stimuli(o).wave;
  wave.samples.resize(24000);
  for (auto _ : state) benchmark::DoNotOptimize(c2s::dsp::analyze(wave));
}
BENCHMARK(BM_Analyze)->Unit(benchmark::kMillisecond);

void BM_InvertIteration(benchmark::State& state) {
  c2s::StimulusOptions o;
  o.words = 1;
  o.reps = 1;
  auto wave = c2s::synth_stimuli(o).wave;
  wave.samples.resize(24000);
  const auto target = c2s::dsp::subsample_bands(c2s::dsp::analyze(wave));
  c2s::dsp::InversionOptions io;
  io.iterations = 1;
  for (auto _ : state) benchmark::DoNotOptimize(c2s::dsp::invert_spectrogram(target, io));
}
BENCHMARK(BM_InvertIteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
