#include <benchmark/benchmark.h>

#include <vector>

#include "vvs/brainsim.hpp"
#include "vvs/losses.hpp"
#include "vvs/pls.hpp"
#include "vvs/rng.hpp"
#include "vvs/trainer.hpp"

using namespace vvs;

namespace {

Eigen::MatrixXd gaussian(int rows, int cols, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

void BM_NtXent(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const nn::Mat<float> z = gaussian(rows, 64, 1).cast<float>();
  for (auto _ : state) benchmark::DoNotOptimize(nt_xent_with_grad(z, 0.5));
}
BENCHMARK(BM_NtXent)->Arg(64)->Arg(256)->Arg(1024);

void BM_Encode(benchmark::State& state) {
  const TrainConfig c = TrainConfig::desk_preset();
  Model<float> model(c.backbone, c.heads, 0);
  const ImageSet images = synth_image_set(2, static_cast<int>(state.range(0)), 4, c.backbone.input_size);
  for (auto _ : state) benchmark::DoNotOptimize(model.encode(images));
  state.SetItemsProcessed(state.iterations() * images.count());
}
BENCHMARK(BM_Encode)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig c = TrainConfig::desk_preset();
  c.batch_size = static_cast<int>(state.range(0));
  const ImageSet images = synth_image_set(3, c.batch_size, 4, c.backbone.input_size);
  std::vector<ImageView> views;
  for (int i = 0; i < images.count(); ++i) views.push_back(images.view(i));
  Trainer trainer(c);
  std::uint64_t b = 0;
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(views, 0, b++));
  state.SetItemsProcessed(state.iterations() * c.batch_size);
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_FitPls(benchmark::State& state) {
  const int features = static_cast<int>(state.range(0));
  const Eigen::MatrixXd x = gaussian(400, features, 4);
  const Eigen::MatrixXd y = gaussian(400, 50, 5);
  for (auto _ : state) benchmark::DoNotOptimize(fit_pls(x, y, 25));
}
BENCHMARK(BM_FitPls)->Arg(256)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_NoiseCeiling(benchmark::State& state) {
  const ActivationMatrix acts{"a", gaussian(400, 32, 6).cast<float>()};
  const NeuralRecording rec = synth_neural_recording(acts, 100, 1.0, 10, 7);
  for (auto _ : state) benchmark::DoNotOptimize(noise_ceiling(rec, 30, 0));
}
BENCHMARK(BM_NoiseCeiling)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
