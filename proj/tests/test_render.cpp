#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "vhl/render.hpp"
#include "vhl/rng.hpp"

using namespace vhl;
using namespace vhl::test;

TEST_CASE("full-view quad with constant texture fills every pixel") {
  Scene scene;
  scene.atlas = solid_atlas(16, 16, 0.2, 0.6, 0.9);
  add_wall_facing_origin(scene, 1.0, 50.0, -50.0, 50.0);
  const SubImage img = render_subimage(scene, look_north(16));
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      CHECK(img.at(x, y, 0) == doctest::Approx(0.2));
      CHECK(img.at(x, y, 1) == doctest::Approx(0.6));
      CHECK(img.at(x, y, 2) == doctest::Approx(0.9));
    }
  }
}

TEST_CASE("camera facing away from all geometry renders background gray") {
  Scene scene;
  scene.atlas = solid_atlas(8, 8, 1.0, 0.0, 0.0);
  add_wall_facing_origin(scene, 2.0, 1.0, -1.0, 1.0);
  Camera cam = look_north(16);
  cam.heading = kPi;  // south; the wall sits north
  const SubImage img = render_subimage(scene, cam);
  for (double p : img.pixels) CHECK(p == doctest::Approx(kBackgroundGray));
}

TEST_CASE("nearer quad occludes farther quad (analytic depth oracle)") {
  Scene scene;
  scene.atlas = TextureAtlas(16, 16);
  // Left half of the atlas red, right half blue; quads map to either half.
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      scene.atlas.at(x, y, 0) = x < 8 ? 1.0 : 0.0;
      scene.atlas.at(x, y, 2) = x < 8 ? 0.0 : 1.0;
    }
  }
  add_wall_facing_origin(scene, 2.0, 3.0, -3.0, 3.0, 0.05, 0.05, 0.45, 0.95);  // near, red
  add_wall_facing_origin(scene, 4.0, 6.0, -6.0, 6.0, 0.55, 0.05, 0.95, 0.95);  // far, blue
  SubImage img;
  RasterBuffers buf;
  render_subimage(scene, look_north(16), img, buf);
  // Analytic: both quads cover the center ray; the near one is at depth 2.
  const size_t center = buf.index(8, 8);
  CHECK(buf.depth[center] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(img.at(8, 8, 0) == doctest::Approx(1.0));
  CHECK(img.at(8, 8, 2) == doctest::Approx(0.0));
}

TEST_CASE("panorama layout: heading 90 degrees at elevation 0 is index 15") {
  CHECK(panorama_view_index(kPi / 2.0, 0.0) == 15);
  CHECK(panorama_view_index(0.0, 0.0) == 12);
  CHECK(panorama_view_index(0.0, -kPi / 6.0) == 0);
  CHECK(panorama_view_index(0.0, kPi / 6.0) == 24);
  // Camera layout matches the index round trip.
  const Camera cam = panorama_camera({0, 0, 0}, 15, 16);
  CHECK(cam.heading == doctest::Approx(kPi / 2.0));
  CHECK(cam.elevation == doctest::Approx(0.0));
}

TEST_CASE("empty scene panorama is all background") {
  Scene scene;
  scene.atlas = solid_atlas(8, 8, 0.3, 0.3, 0.3);
  const Panorama pano = render_panorama(scene, {0, 0, 0}, 16);
  REQUIRE(pano.views.size() == 36);
  for (const SubImage& img : pano.views) {
    for (double p : img.pixels) CHECK(p == kBackgroundGray);
  }
}

TEST_CASE("rotationally symmetric scene gives identical middle-row views") {
  Scene scene;
  scene.atlas = solid_atlas(16, 16, 0.8, 0.4, 0.1);
  // One identical quad every 30 degrees around the viewpoint.
  for (int k = 0; k < 12; ++k) {
    const double heading = k * kPi / 6.0;
    const Vec3 dir = direction_from_angles(heading, 0.0);
    const Vec3 right = {std::cos(heading), -std::sin(heading), 0.0};
    const Vec3 c = dir * 3.0;
    const double hw = 1.0;
    add_quad(scene, {c.x - right.x * hw, c.y - right.y * hw, -1.0},
             {c.x + right.x * hw, c.y + right.y * hw, -1.0},
             {c.x + right.x * hw, c.y + right.y * hw, 1.0},
             {c.x - right.x * hw, c.y - right.y * hw, 1.0});
  }
  const Panorama pano = render_panorama(scene, {0, 0, 0}, 16);
  // Identical up to trigonometric rounding: the quad corners and camera
  // bases go through different cos/sin evaluations per heading.
  for (int k = 1; k < 12; ++k) {
    const auto& a = pano.views[12].pixels;
    const auto& b = pano.views[12 + static_cast<size_t>(k)].pixels;
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("object coverage: half view exactly, hidden elsewhere") {
  Scene scene;
  scene.atlas = solid_atlas(16, 16, 0.5, 0.5, 0.5);
  // A quad covering exactly the left half of the heading-0 eye-level view:
  // at depth d with hfov 60deg the view spans x in [-d*tan30, d*tan30].
  const double d = 2.0;
  const double half_span = d * std::tan(kPi / 6.0);
  add_quad(scene, {-half_span, d, -half_span}, {0, d, -half_span}, {0, d, half_span},
           {-half_span, d, half_span});
  scene.objects.push_back({0, ObjectCategory::kSofa, {0, 1}});

  const auto cov = object_coverage(scene, {0, 0, 0}, 0, 32);
  CHECK(cov[12] == doctest::Approx(0.5));
  // All other views where the quad is out of frame are zero except neighbors
  // that glimpse the edge; total must stay within [0,1].
  for (double c : cov) {
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }
  CHECK(object_coverage(scene, {0, 0, 0}, 0, 32)[0] <= 1.0);
  CHECK_THROWS_AS(object_coverage(scene, {0, 0, 0}, 99, 32), std::invalid_argument);
}

TEST_CASE("fully occluded object has zero coverage and empty containing set") {
  Scene scene;
  scene.atlas = solid_atlas(16, 16, 0.5, 0.5, 0.5);
  add_wall_facing_origin(scene, 3.0, 2.0, -2.0, 2.0);  // object behind this wall
  add_wall_facing_origin(scene, 4.0, 1.0, -1.0, 1.0);
  scene.objects.push_back({0, ObjectCategory::kTable, {2, 3}});
  const auto cov = object_coverage(scene, {0, 0, 0}, 0, 16);
  for (double c : cov) CHECK(c == 0.0);
  CHECK(subimages_containing(scene, {0, 0, 0}, 0, 16).empty());
}

TEST_CASE("subimages_containing singleton for an object visible straight ahead") {
  Scene scene;
  scene.atlas = solid_atlas(16, 16, 0.5, 0.5, 0.5);
  add_wall_facing_origin(scene, 3.0, 0.8, -0.5, 0.5);
  scene.objects.push_back({0, ObjectCategory::kChair, {0, 1}});
  const auto containing = subimages_containing(scene, {0, 0, 0}, 0, 32);
  const auto cov = object_coverage(scene, {0, 0, 0}, 0, 32);
  for (int v = 0; v < 36; ++v) {
    CHECK((containing.count(v) == 1) == (cov[static_cast<size_t>(v)] > 0.0));
  }
  CHECK(containing.count(12) == 1);
}

TEST_CASE("bilinear sampling of an atlas in [0,1] stays in [0,1]") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Scene scene = random_scene(rng, 12, 32);
    const SubImage img = render_subimage(scene, look_north(16));
    for (double p : img.pixels) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
}

TEST_CASE("backprop_to_texture matches central finite differences") {
  Rng rng(0xFD);
  const double h = 1e-3;
  for (int trial = 0; trial < 4; ++trial) {
    Scene scene = random_scene(rng, 10, 32);
    SubImage img;
    RasterBuffers buf;
    render_subimage(scene, look_north(16), img, buf);

    // Mask: faces of the first five quads.
    FaceMask mask(static_cast<size_t>(scene.face_count()), 0);
    for (int f = 0; f < std::min(10, scene.face_count()); ++f) mask[static_cast<size_t>(f)] = 1;

    // Random linear image loss sum_i w_i * pixel_i.
    std::vector<double> w(img.pixels.size());
    for (double& v : w) v = rng.uniform(-1.0, 1.0);

    const TexelGradient grad = backprop_to_texture(buf, w, mask, scene.atlas.width,
                                                   scene.atlas.height);

    auto loss_at = [&](const TextureAtlas& atlas) {
      SubImage shaded;
      shade_from_buffers(buf, atlas, shaded);
      double loss = 0.0;
      for (size_t i = 0; i < shaded.pixels.size(); ++i) loss += w[i] * shaded.pixels[i];
      return loss;
    };

    const TexelMask tmask = masked_texels(scene, mask);
    int checked = 0;
    for (int probe = 0; probe < 64; ++probe) {
      const size_t t = rng.uniform_index(scene.atlas.texel_count());
      if (!tmask[t]) continue;
      const int c = static_cast<int>(rng.uniform_index(3));
      TextureAtlas plus = scene.atlas;
      TextureAtlas minus = scene.atlas;
      plus.texels[t * 3 + static_cast<size_t>(c)] += h;
      minus.texels[t * 3 + static_cast<size_t>(c)] -= h;
      const double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
      const double an = grad.values[t * 3 + static_cast<size_t>(c)];
      if (std::abs(an) < 1e-3) {
        CHECK(std::abs(fd - an) <= 1e-5);
      } else {
        CHECK(std::abs(fd - an) / std::abs(an) <= 1e-3);
      }
      ++checked;
    }
    CHECK(checked > 0);
  }
}

TEST_CASE("backprop gating: zero grads and all-zero mask produce zero gradient") {
  Rng rng(0xAB);
  Scene scene = random_scene(rng, 8, 32);
  SubImage img;
  RasterBuffers buf;
  render_subimage(scene, look_north(16), img, buf);

  std::vector<double> zeros(img.pixels.size(), 0.0);
  FaceMask all(static_cast<size_t>(scene.face_count()), 1);
  TexelGradient g0 = backprop_to_texture(buf, zeros, all, scene.atlas.width, scene.atlas.height);
  for (double v : g0.values) CHECK(v == 0.0);

  std::vector<double> w(img.pixels.size(), 1.0);
  FaceMask none(static_cast<size_t>(scene.face_count()), 0);
  TexelGradient g1 = backprop_to_texture(buf, w, none, scene.atlas.width, scene.atlas.height);
  for (double v : g1.values) CHECK(v == 0.0);
}

TEST_CASE("texel gradient support is inside the masked faces' texel footprint") {
  Rng rng(0xCD);
  for (int trial = 0; trial < 5; ++trial) {
    Scene scene = random_scene(rng, 10, 32);
    SubImage img;
    RasterBuffers buf;
    render_subimage(scene, look_north(16), img, buf);
    FaceMask mask(static_cast<size_t>(scene.face_count()), 0);
    mask[0] = mask[1] = 1;
    std::vector<double> w(img.pixels.size());
    for (double& v : w) v = rng.uniform(-1.0, 1.0);
    const TexelGradient grad =
        backprop_to_texture(buf, w, mask, scene.atlas.width, scene.atlas.height);
    const TexelMask tmask = masked_texels(scene, mask);
    for (size_t t = 0; t < tmask.size(); ++t) {
      if (tmask[t]) continue;
      for (int c = 0; c < 3; ++c) CHECK(grad.values[t * 3 + static_cast<size_t>(c)] == 0.0);
    }
  }
}

TEST_CASE("deterministic rendering") {
  Rng rng(42);
  Scene scene = random_scene(rng, 10, 32);
  SubImage a, b;
  RasterBuffers ba, bb;
  render_subimage(scene, look_north(16), a, ba);
  render_subimage(scene, look_north(16), b, bb);
  CHECK(a.pixels == b.pixels);
  CHECK(ba.face_id == bb.face_id);
  CHECK(ba.depth == bb.depth);
}

TEST_CASE("write_ppm emits a parseable P6 file") {
  Scene scene;
  scene.atlas = solid_atlas(8, 8, 1.0, 0.5, 0.0);
  add_wall_facing_origin(scene, 1.0, 10.0, -10.0, 10.0);
  const SubImage img = render_subimage(scene, look_north(16));
  const auto path = std::filesystem::temp_directory_path() / "vhl_test_view.ppm";
  write_ppm(img, path.string());
  std::ifstream f(path, std::ios::binary);
  std::string magic;
  int w, h, maxv;
  f >> magic >> w >> h >> maxv;
  CHECK(magic == "P6");
  CHECK(w == 16);
  CHECK(h == 16);
  CHECK(maxv == 255);
  f.get();  // newline
  std::vector<unsigned char> bytes(static_cast<size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  CHECK(f.gcount() == static_cast<std::streamsize>(bytes.size()));
  CHECK(static_cast<int>(bytes[0]) == 255);
  std::filesystem::remove(path);
}
