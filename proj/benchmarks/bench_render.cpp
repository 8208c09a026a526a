#include <benchmark/benchmark.h>

#include "vhl/obs_cache.hpp"
#include "vhl/render.hpp"
#include "vhl/worldgen.hpp"

namespace {

const vhl::World& bench_world() {
  static const vhl::World world = vhl::generate_world(42, vhl::WorldParams{});
  return world;
}

void BM_RenderSubimage32(benchmark::State& state) {
  const vhl::World& w = bench_world();
  const vhl::Camera cam = vhl::panorama_camera(w.graph.position(4), 12, 32);
  vhl::SubImage img;
  vhl::RasterBuffers buf;
  for (auto _ : state) {
    vhl::render_subimage(w.scene, cam, img, buf);
    benchmark::DoNotOptimize(img.pixels.data());
  }
}
BENCHMARK(BM_RenderSubimage32);

void BM_RenderPanorama32(benchmark::State& state) {
  const vhl::World& w = bench_world();
  for (auto _ : state) {
    vhl::Panorama pano = vhl::render_panorama(w.scene, w.graph.position(4), 32);
    benchmark::DoNotOptimize(pano.views.data());
  }
}
BENCHMARK(BM_RenderPanorama32);

void BM_ShadeFromBuffers(benchmark::State& state) {
  const vhl::World& w = bench_world();
  vhl::SubImage img;
  vhl::RasterBuffers buf;
  vhl::render_subimage(w.scene, vhl::panorama_camera(w.graph.position(4), 12, 32), img, buf);
  for (auto _ : state) {
    vhl::shade_from_buffers(buf, w.scene.atlas, img);
    benchmark::DoNotOptimize(img.pixels.data());
  }
}
BENCHMARK(BM_ShadeFromBuffers);

void BM_BackpropToTexture(benchmark::State& state) {
  const vhl::World& w = bench_world();
  vhl::SubImage img;
  vhl::RasterBuffers buf;
  vhl::render_subimage(w.scene, vhl::panorama_camera(w.graph.position(4), 12, 32), img, buf);
  const vhl::FaceMask mask = vhl::face_mask_for_object(w.scene, 0);
  const std::vector<double> grads(img.pixels.size(), 0.5);
  for (auto _ : state) {
    vhl::TexelGradient g =
        vhl::backprop_to_texture(buf, grads, mask, w.scene.atlas.width, w.scene.atlas.height);
    benchmark::DoNotOptimize(g.values.data());
  }
}
BENCHMARK(BM_BackpropToTexture);

void BM_PanoramaCacheBuild(benchmark::State& state) {
  const vhl::World& w = bench_world();
  for (auto _ : state) {
    vhl::PanoramaCache cache(w.scene, w.graph, 32);
    benchmark::DoNotOptimize(&cache);
  }
}
BENCHMARK(BM_PanoramaCacheBuild)->Unit(benchmark::kMillisecond);

}  // namespace
