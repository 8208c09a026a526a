#include <benchmark/benchmark.h>

#include "vhl/attack.hpp"
#include "vhl/obs_cache.hpp"
#include "vhl/pipeline.hpp"
#include "vhl/rng.hpp"
#include "vhl/worldgen.hpp"

namespace {

// A ready-to-optimize attack instance over a generated world.
struct AttackFixture {
  vhl::World world;
  std::vector<vhl::Episode> episodes;
  std::unique_ptr<vhl::PanoramaCache> cache;
  vhl::PolicyParams params;
  vhl::AttackInstance instance;
  bool valid = false;

  AttackFixture()
      : world(vhl::generate_world(42, vhl::WorldParams{})),
        params(vhl::PolicyParams::xavier(64, vhl::Vocabulary::standard().size(), 7)) {
    episodes = vhl::generate_episodes(world.graph, world.scene, "bench", 240, 3);
    cache = std::make_unique<vhl::PanoramaCache>(world.scene, world.graph, 32);
    for (const vhl::Episode& ep : episodes) {
      auto outcome = vhl::build_attack_instance(ep, episodes, world.scene, world.graph, *cache,
                                                vhl::AttackMode::kTrajectory);
      if (outcome.instance.has_value()) {
        instance = std::move(*outcome.instance);
        valid = true;
        break;
      }
    }
  }
};

const AttackFixture& fixture() {
  static const AttackFixture f;
  return f;
}

void BM_AttackLossBatch16(benchmark::State& state) {
  const AttackFixture& f = fixture();
  if (!f.valid) {
    state.SkipWithError("no attack instance in the benchmark world");
    return;
  }
  vhl::AttackLossComputer computer(f.world.scene, f.world.graph, f.params, f.instance, *f.cache,
                                   vhl::Vocabulary::standard(), 3);
  std::vector<vhl::Episode> batch;
  for (int i = 0; i < 16; ++i) {
    batch.push_back(f.instance.train_split[static_cast<size_t>(i) % f.instance.train_split.size()]);
  }
  for (auto _ : state) {
    vhl::AttackLossResult r = computer.compute(f.world.scene.atlas, batch);
    benchmark::DoNotOptimize(r.loss);
  }
}
BENCHMARK(BM_AttackLossBatch16)->Unit(benchmark::kMillisecond);

void BM_AdamProjectStep(benchmark::State& state) {
  const AttackFixture& f = fixture();
  if (!f.valid) {
    state.SkipWithError("no attack instance in the benchmark world");
    return;
  }
  vhl::TextureAtlas atlas = f.world.scene.atlas;
  const vhl::FaceMask mask = vhl::face_mask_for_object(f.world.scene, f.instance.attack_object);
  vhl::AtlasOptState opt(atlas.texels.size(), vhl::masked_texels(f.world.scene, mask));
  vhl::TexelGradient grad(atlas.width, atlas.height);
  vhl::Rng rng(1);
  for (double& v : grad.values) v = rng.uniform(-1e-3, 1e-3);
  vhl::AttackConfig cfg;
  for (auto _ : state) {
    vhl::adam_project_step(atlas, f.world.scene.atlas, grad, opt, cfg);
    benchmark::DoNotOptimize(atlas.texels.data());
  }
}
BENCHMARK(BM_AdamProjectStep);

void BM_OptimizeAttack30Iters(benchmark::State& state) {
  const AttackFixture& f = fixture();
  if (!f.valid) {
    state.SkipWithError("no attack instance in the benchmark world");
    return;
  }
  vhl::AttackConfig cfg;
  cfg.iterations = 30;
  cfg.checkpoint_every = 30;
  cfg.batch_size = 4;
  for (auto _ : state) {
    vhl::AttackRunResult r = vhl::optimize_attack(f.instance, f.world.scene, f.world.graph,
                                                  f.params, *f.cache,
                                                  vhl::Vocabulary::standard(), cfg, 9);
    benchmark::DoNotOptimize(r.best_score);
  }
}
BENCHMARK(BM_OptimizeAttack30Iters)->Unit(benchmark::kMillisecond);

}  // namespace
