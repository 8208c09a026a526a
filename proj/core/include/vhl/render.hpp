#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "vhl/scene.hpp"

namespace vhl {

struct Camera {
  Vec3 position;
  double heading = 0.0;    // radians, compass convention
  double elevation = 0.0;  // radians, positive up
  double hfov = kPi / 3.0;
  int width = 32;
  int height = 32;
};

// RGB image, channels in [0,1], row-major from the top-left pixel.
struct SubImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // width*height*3

  SubImage() = default;
  SubImage(int w, int h, double fill)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, fill) {}

  size_t index(int x, int y, int c) const {
    return (static_cast<size_t>(y) * width + x) * 3 + c;
  }
  double at(int x, int y, int c) const { return pixels[index(x, y, c)]; }
  double& at(int x, int y, int c) { return pixels[index(x, y, c)]; }
};

// Per-pixel rasterization record: front-most face, its texture-space sample
// coordinate and view depth. face_id < 0 marks background pixels.
struct RasterBuffers {
  int width = 0;
  int height = 0;
  std::vector<int> face_id;
  std::vector<double> tex_u;
  std::vector<double> tex_v;
  std::vector<double> depth;

  RasterBuffers() = default;
  RasterBuffers(int w, int h)
      : width(w),
        height(h),
        face_id(static_cast<size_t>(w) * h, -1),
        tex_u(static_cast<size_t>(w) * h, 0.0),
        tex_v(static_cast<size_t>(w) * h, 0.0),
        depth(static_cast<size_t>(w) * h, 0.0) {}

  size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
};

// Per-face bit, 1 iff the face belongs to the attack object.
using FaceMask = std::vector<uint8_t>;

FaceMask face_mask_for_object(const Scene& scene, int object_id);

// Same shape as the atlas, real valued. Zero everywhere outside the sampled
// footprint of masked faces.
struct TexelGradient {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // width*height*3

  TexelGradient() = default;
  TexelGradient(int w, int h)
      : width(w), height(h), values(static_cast<size_t>(w) * h * 3, 0.0) {}

  size_t index(int x, int y, int c) const {
    return (static_cast<size_t>(y) * width + x) * 3 + c;
  }
  void accumulate(const TexelGradient& other, double scale);
};

// Per-texel bit; 1 marks texels reachable by bilinear sampling from some
// masked face.
using TexelMask = std::vector<uint8_t>;

// The four texels and weights touched when sampling the atlas at (u, v).
struct BilinearFootprint {
  int x0, y0, x1, y1;
  double w00, w10, w01, w11;
};

BilinearFootprint bilinear_footprint(double u, double v, int atlas_w, int atlas_h);
void sample_bilinear(const TextureAtlas& atlas, double u, double v, double rgb[3]);

// Background color for pixels no triangle covers.
inline constexpr double kBackgroundGray = 0.5;

// Depth-buffered perspective rasterization with bilinear texture sampling and
// no lighting. Deterministic: equal-depth overlaps resolve to the
// lowest-indexed face.
void render_subimage(const Scene& scene, const Camera& camera, SubImage& image,
                     RasterBuffers& buffers);
SubImage render_subimage(const Scene& scene, const Camera& camera);

// Re-samples pixel colors from `atlas` using previously rasterized buffers.
// Valid as long as scene geometry is unchanged.
void shade_from_buffers(const RasterBuffers& buffers, const TextureAtlas& atlas, SubImage& image);

inline constexpr int kPanoramaHeadings = 12;
inline constexpr int kPanoramaRows = 3;
inline constexpr int kPanoramaViews = kPanoramaHeadings * kPanoramaRows;

// Row r in {0,1,2} maps to elevation {-30, 0, +30} degrees; heading k to
// k*pi/6. Sub-image index = r*12 + k.
Camera panorama_camera(const Vec3& viewpoint, int view_index, int resolution);
int panorama_view_index(double heading, double elevation);

struct Panorama {
  std::vector<SubImage> views;        // kPanoramaViews entries
  std::vector<RasterBuffers> buffers;  // parallel to views
};

Panorama render_panorama(const Scene& scene, const Vec3& viewpoint, int resolution);

// Fraction of pixels per sub-image whose front-most face belongs to the
// object. Throws std::invalid_argument for unknown object ids.
std::vector<double> object_coverage(const Scene& scene, const Vec3& viewpoint, int object_id,
                                    int resolution);
std::vector<double> coverage_from_panorama(const Panorama& pano, const Scene& scene,
                                           int object_id);

std::set<int> subimages_containing(const Scene& scene, const Vec3& viewpoint, int object_id,
                                   int resolution);

// Distributes per-pixel gradients to the four bilinear-footprint texels of
// every covered pixel whose face is masked. Plain summation; unmasked faces
// contribute nothing.
TexelGradient backprop_to_texture(const RasterBuffers& buffers,
                                  const std::vector<double>& pixel_grads, const FaceMask& mask,
                                  int atlas_w, int atlas_h);
void backprop_to_texture_into(const RasterBuffers& buffers, const std::vector<double>& pixel_grads,
                              const FaceMask& mask, TexelGradient& out);

// Conservative texel footprint of the masked faces: every texel bilinear
// sampling could touch from inside a masked face's UV triangle.
TexelMask masked_texels(const Scene& scene, const FaceMask& mask);

// Binary P6, 8-bit, row-major.
void write_ppm(const SubImage& image, const std::string& path);

}  // namespace vhl
