#include <benchmark/benchmark.h>

#include "lottery/model.hpp"
#include "lottery/rng.hpp"
#include "lottery/synth.hpp"

namespace {

lottery::CodecConfig bench_config(int hw, double ratio) {
  lottery::CodecConfig cfg;
  cfg.height = hw;
  cfg.width = hw;
  cfg.seed = 1;
  cfg.latent_levels = 7;
  cfg.modnet_width = 32;
  cfg.arm_context = 16;
  cfg.mask_ratio = ratio;
  return cfg;
}

void BM_Reconstruct(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  const lottery::CodecModel model = lottery::build_model(bench_config(hw, 0.3));
  const lottery::LatentPyramid zhat = model.latents;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lottery::reconstruct(model, zhat));
  }
  state.SetItemsProcessed(state.iterations() * hw * hw);
}
BENCHMARK(BM_Reconstruct)->Arg(64)->Arg(128);

void BM_SparseReconstruct(benchmark::State& state) {
  const lottery::CodecModel model = lottery::build_model(bench_config(128, 0.2));
  const lottery::LatentPyramid zhat = model.latents;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lottery::reconstruct(model, zhat, /*sparse_synthesis=*/true));
  }
  state.SetItemsProcessed(state.iterations() * 128 * 128);
}
BENCHMARK(BM_SparseReconstruct);

void BM_TrainingStep(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  lottery::CodecModel model = lottery::build_model(bench_config(hw, 0.3));
  const lottery::PixelGrid image = lottery::make_test_image(hw, hw, 3);
  {
    lottery::Rng rng = lottery::derive_stream(2, "bench-z");
    for (auto& g : model.latents.grids)
      for (double& v : g) v = rng.uniform(-1, 1);
  }
  long step = 0;
  for (auto _ : state) {
    lottery::refresh_mask(model.synth);
    const lottery::LatentState ls =
        lottery::stage1_latents(model.latents, 0.3, 2.0, model.cfg.seed, step++);
    lottery::Gradients grads(model);
    benchmark::DoNotOptimize(
        lottery::loss_and_gradients(model, image, ls, 1e-3, grads));
  }
  state.SetItemsProcessed(state.iterations() * hw * hw);
}
BENCHMARK(BM_TrainingStep)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
