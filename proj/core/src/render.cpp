#include "vhl/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace vhl {

FaceMask face_mask_for_object(const Scene& scene, int object_id) {
  const SceneObject* obj = scene.find_object(object_id);
  if (obj == nullptr) throw std::invalid_argument("face_mask_for_object: unknown object id");
  FaceMask mask(static_cast<size_t>(scene.face_count()), 0);
  for (int f : obj->faces) mask[static_cast<size_t>(f)] = 1;
  return mask;
}

void TexelGradient::accumulate(const TexelGradient& other, double scale) {
  for (size_t i = 0; i < values.size(); ++i) values[i] += other.values[i] * scale;
}

BilinearFootprint bilinear_footprint(double u, double v, int atlas_w, int atlas_h) {
  // Texel centers sit at (i + 0.5) / extent.
  const double x = u * atlas_w - 0.5;
  const double y = v * atlas_h - 0.5;
  double fx = std::floor(x);
  double fy = std::floor(y);
  double ax = x - fx;
  double ay = y - fy;
  int x0 = static_cast<int>(fx);
  int y0 = static_cast<int>(fy);
  int x1 = x0 + 1;
  int y1 = y0 + 1;
  x0 = std::clamp(x0, 0, atlas_w - 1);
  x1 = std::clamp(x1, 0, atlas_w - 1);
  y0 = std::clamp(y0, 0, atlas_h - 1);
  y1 = std::clamp(y1, 0, atlas_h - 1);
  return {x0, y0, x1, y1, (1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
}

void sample_bilinear(const TextureAtlas& atlas, double u, double v, double rgb[3]) {
  const BilinearFootprint fp = bilinear_footprint(u, v, atlas.width, atlas.height);
  for (int c = 0; c < 3; ++c) {
    rgb[c] = fp.w00 * atlas.at(fp.x0, fp.y0, c) + fp.w10 * atlas.at(fp.x1, fp.y0, c) +
             fp.w01 * atlas.at(fp.x0, fp.y1, c) + fp.w11 * atlas.at(fp.x1, fp.y1, c);
  }
}

namespace {

constexpr double kNearPlane = 0.05;

struct CamVertex {
  double x, y, z;  // camera space: x right, y up, z forward
  double u, v;     // texture coordinates
};

struct CamBasis {
  Vec3 right, up, forward;
  Vec3 origin;
};

CamBasis camera_basis(const Camera& cam) {
  const Vec3 fwd = direction_from_angles(cam.heading, cam.elevation);
  const Vec3 world_up{0.0, 0.0, 1.0};
  Vec3 right = cross(fwd, world_up);
  const double rl = norm(right);
  if (rl < 1e-12) {
    // Looking straight up/down: derive right from the heading alone.
    right = {std::cos(cam.heading), -std::sin(cam.heading), 0.0};
  } else {
    right = right * (1.0 / rl);
  }
  const Vec3 up = cross(right, fwd);
  return {right, up, fwd, cam.position};
}

CamVertex to_camera(const CamBasis& basis, const Vec3& p, const Vec2& uv) {
  const Vec3 d = p - basis.origin;
  return {dot(d, basis.right), dot(d, basis.up), dot(d, basis.forward), uv.u, uv.v};
}

CamVertex lerp(const CamVertex& a, const CamVertex& b, double t) {
  return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, a.z + (b.z - a.z) * t,
          a.u + (b.u - a.u) * t, a.v + (b.v - a.v) * t};
}

// Sutherland-Hodgman clip against z >= near. A triangle yields up to 4 verts.
int clip_near(const CamVertex in[3], CamVertex out[4]) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const CamVertex& a = in[i];
    const CamVertex& b = in[(i + 1) % 3];
    const bool ain = a.z >= kNearPlane;
    const bool bin = b.z >= kNearPlane;
    if (ain) out[n++] = a;
    if (ain != bin) {
      const double t = (kNearPlane - a.z) / (b.z - a.z);
      out[n++] = lerp(a, b, t);
    }
  }
  return n;
}

struct ScreenVertex {
  double px, py;      // pixel coordinates
  double inv_z;       // 1/z
  double u_z, v_z;    // u/z, v/z for perspective-correct interpolation
};

double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  return (b.px - a.px) * (py - a.py) - (b.py - a.py) * (px - a.px);
}

void raster_triangle(const ScreenVertex& s0, const ScreenVertex& s1, const ScreenVertex& s2,
                     int face, SubImage& image, RasterBuffers& buffers,
                     const TextureAtlas& atlas) {
  const double area = edge(s0, s1, s2.px, s2.py);
  if (std::abs(area) < 1e-12) return;

  const int w = buffers.width;
  const int h = buffers.height;
  int min_x = std::max(0, static_cast<int>(std::floor(std::min({s0.px, s1.px, s2.px}) - 0.5)));
  int max_x = std::min(w - 1, static_cast<int>(std::ceil(std::max({s0.px, s1.px, s2.px}))));
  int min_y = std::max(0, static_cast<int>(std::floor(std::min({s0.py, s1.py, s2.py}) - 0.5)));
  int max_y = std::min(h - 1, static_cast<int>(std::ceil(std::max({s0.py, s1.py, s2.py}))));
  if (min_x > max_x || min_y > max_y) return;

  const double inv_area = 1.0 / area;
  for (int y = min_y; y <= max_y; ++y) {
    const double py = y + 0.5;
    for (int x = min_x; x <= max_x; ++x) {
      const double px = x + 0.5;
      double l0 = edge(s1, s2, px, py) * inv_area;
      double l1 = edge(s2, s0, px, py) * inv_area;
      double l2 = edge(s0, s1, px, py) * inv_area;
      if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
      const double inv_z = l0 * s0.inv_z + l1 * s1.inv_z + l2 * s2.inv_z;
      const double z = 1.0 / inv_z;
      const size_t idx = buffers.index(x, y);
      if (buffers.face_id[idx] >= 0 && z >= buffers.depth[idx]) continue;
      const double u = (l0 * s0.u_z + l1 * s1.u_z + l2 * s2.u_z) * z;
      const double v = (l0 * s0.v_z + l1 * s1.v_z + l2 * s2.v_z) * z;
      buffers.face_id[idx] = face;
      buffers.depth[idx] = z;
      buffers.tex_u[idx] = u;
      buffers.tex_v[idx] = v;
      double rgb[3];
      sample_bilinear(atlas, u, v, rgb);
      for (int c = 0; c < 3; ++c) image.pixels[idx * 3 + c] = rgb[c];
    }
  }
}

}  // namespace

void render_subimage(const Scene& scene, const Camera& camera, SubImage& image,
                     RasterBuffers& buffers) {
  if (camera.width < 8 || camera.height < 8) {
    throw std::invalid_argument("render_subimage: camera resolution below 8");
  }
  if (!(camera.hfov > 0.0 && camera.hfov < kPi)) {
    throw std::invalid_argument("render_subimage: hfov out of range");
  }
  image = SubImage(camera.width, camera.height, kBackgroundGray);
  buffers = RasterBuffers(camera.width, camera.height);

  const CamBasis basis = camera_basis(camera);
  const double tan_h = std::tan(camera.hfov / 2.0);
  const double tan_v = tan_h * camera.height / camera.width;
  const double half_w = camera.width / 2.0;
  const double half_h = camera.height / 2.0;

  auto to_screen = [&](const CamVertex& cv) -> ScreenVertex {
    const double inv_z = 1.0 / cv.z;
    const double ndc_x = cv.x * inv_z / tan_h;
    const double ndc_y = cv.y * inv_z / tan_v;
    return {(ndc_x + 1.0) * half_w, (1.0 - ndc_y) * half_h, inv_z, cv.u * inv_z, cv.v * inv_z};
  };

  for (int f = 0; f < scene.face_count(); ++f) {
    const Face& face = scene.faces[static_cast<size_t>(f)];
    const auto& uvs = scene.face_uvs[static_cast<size_t>(f)];
    const CamVertex tri[3] = {
        to_camera(basis, scene.vertices[static_cast<size_t>(face.v0)], uvs[0]),
        to_camera(basis, scene.vertices[static_cast<size_t>(face.v1)], uvs[1]),
        to_camera(basis, scene.vertices[static_cast<size_t>(face.v2)], uvs[2]),
    };
    CamVertex clipped[4];
    const int n = clip_near(tri, clipped);
    if (n < 3) continue;
    ScreenVertex sv[4];
    for (int i = 0; i < n; ++i) sv[i] = to_screen(clipped[i]);
    for (int i = 1; i + 1 < n; ++i) {
      // Rasterize both windings; orientation is normalized via the area sign.
      if (edge(sv[0], sv[i], sv[i + 1].px, sv[i + 1].py) < 0.0) {
        raster_triangle(sv[0], sv[i + 1], sv[i], f, image, buffers, scene.atlas);
      } else {
        raster_triangle(sv[0], sv[i], sv[i + 1], f, image, buffers, scene.atlas);
      }
    }
  }
}

SubImage render_subimage(const Scene& scene, const Camera& camera) {
  SubImage image;
  RasterBuffers buffers;
  render_subimage(scene, camera, image, buffers);
  return image;
}

void shade_from_buffers(const RasterBuffers& buffers, const TextureAtlas& atlas, SubImage& image) {
  image = SubImage(buffers.width, buffers.height, kBackgroundGray);
  const size_t n = buffers.face_id.size();
  for (size_t i = 0; i < n; ++i) {
    if (buffers.face_id[i] < 0) continue;
    double rgb[3];
    sample_bilinear(atlas, buffers.tex_u[i], buffers.tex_v[i], rgb);
    for (int c = 0; c < 3; ++c) image.pixels[i * 3 + c] = rgb[c];
  }
}

Camera panorama_camera(const Vec3& viewpoint, int view_index, int resolution) {
  if (view_index < 0 || view_index >= kPanoramaViews) {
    throw std::invalid_argument("panorama_camera: view index out of range");
  }
  const int row = view_index / kPanoramaHeadings;
  const int k = view_index % kPanoramaHeadings;
  Camera cam;
  cam.position = viewpoint;
  cam.heading = k * (kPi / 6.0);
  cam.elevation = (row - 1) * (kPi / 6.0);
  cam.hfov = kPi / 3.0;
  cam.width = resolution;
  cam.height = resolution;
  return cam;
}

int panorama_view_index(double heading, double elevation) {
  const double step = kPi / 6.0;
  int best_k = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kPanoramaHeadings; ++k) {
    const double d = std::abs(wrap_angle(heading - k * step));
    if (d < best_d - 1e-12) {
      best_d = d;
      best_k = k;
    }
  }
  int best_row = 0;
  best_d = std::numeric_limits<double>::infinity();
  for (int r = 0; r < kPanoramaRows; ++r) {
    const double d = std::abs(elevation - (r - 1) * step);
    if (d < best_d - 1e-12) {
      best_d = d;
      best_row = r;
    }
  }
  return best_row * kPanoramaHeadings + best_k;
}

Panorama render_panorama(const Scene& scene, const Vec3& viewpoint, int resolution) {
  Panorama pano;
  pano.views.resize(kPanoramaViews);
  pano.buffers.resize(kPanoramaViews);
  for (int i = 0; i < kPanoramaViews; ++i) {
    render_subimage(scene, panorama_camera(viewpoint, i, resolution), pano.views[i],
                    pano.buffers[i]);
  }
  return pano;
}

std::vector<double> coverage_from_panorama(const Panorama& pano, const Scene& scene,
                                           int object_id) {
  if (scene.find_object(object_id) == nullptr) {
    throw std::invalid_argument("object_coverage: unknown object id");
  }
  const auto& face_obj = scene.face_object();
  std::vector<double> cov(kPanoramaViews, 0.0);
  for (int i = 0; i < kPanoramaViews; ++i) {
    const RasterBuffers& buf = pano.buffers[i];
    size_t hits = 0;
    for (int fid : buf.face_id) {
      if (fid >= 0 && face_obj[static_cast<size_t>(fid)] == object_id) ++hits;
    }
    cov[static_cast<size_t>(i)] =
        static_cast<double>(hits) / (static_cast<double>(buf.width) * buf.height);
  }
  return cov;
}

std::vector<double> object_coverage(const Scene& scene, const Vec3& viewpoint, int object_id,
                                    int resolution) {
  const Panorama pano = render_panorama(scene, viewpoint, resolution);
  return coverage_from_panorama(pano, scene, object_id);
}

std::set<int> subimages_containing(const Scene& scene, const Vec3& viewpoint, int object_id,
                                   int resolution) {
  const auto cov = object_coverage(scene, viewpoint, object_id, resolution);
  std::set<int> out;
  for (int i = 0; i < kPanoramaViews; ++i) {
    if (cov[static_cast<size_t>(i)] > 0.0) out.insert(i);
  }
  return out;
}

void backprop_to_texture_into(const RasterBuffers& buffers, const std::vector<double>& pixel_grads,
                              const FaceMask& mask, TexelGradient& out) {
  const size_t n = buffers.face_id.size();
  if (pixel_grads.size() != n * 3) {
    throw std::invalid_argument("backprop_to_texture: pixel gradient shape mismatch");
  }
  for (size_t i = 0; i < n; ++i) {
    const int fid = buffers.face_id[i];
    if (fid < 0 || !mask[static_cast<size_t>(fid)]) continue;
    const BilinearFootprint fp =
        bilinear_footprint(buffers.tex_u[i], buffers.tex_v[i], out.width, out.height);
    for (int c = 0; c < 3; ++c) {
      const double g = pixel_grads[i * 3 + c];
      if (g == 0.0) continue;
      out.values[out.index(fp.x0, fp.y0, c)] += g * fp.w00;
      out.values[out.index(fp.x1, fp.y0, c)] += g * fp.w10;
      out.values[out.index(fp.x0, fp.y1, c)] += g * fp.w01;
      out.values[out.index(fp.x1, fp.y1, c)] += g * fp.w11;
    }
  }
}

TexelGradient backprop_to_texture(const RasterBuffers& buffers,
                                  const std::vector<double>& pixel_grads, const FaceMask& mask,
                                  int atlas_w, int atlas_h) {
  TexelGradient grad(atlas_w, atlas_h);
  backprop_to_texture_into(buffers, pixel_grads, mask, grad);
  return grad;
}

TexelMask masked_texels(const Scene& scene, const FaceMask& mask) {
  const int w = scene.atlas.width;
  const int h = scene.atlas.height;
  TexelMask out(static_cast<size_t>(w) * h, 0);
  for (int f = 0; f < scene.face_count(); ++f) {
    if (!mask[static_cast<size_t>(f)]) continue;
    const auto& uvs = scene.face_uvs[static_cast<size_t>(f)];
    double min_u = 1.0, max_u = 0.0, min_v = 1.0, max_v = 0.0;
    for (const auto& uv : uvs) {
      min_u = std::min(min_u, uv.u);
      max_u = std::max(max_u, uv.u);
      min_v = std::min(min_v, uv.v);
      max_v = std::max(max_v, uv.v);
    }
    // Any sample inside the UV bbox touches texels floor(u*w-0.5)..+1.
    const int x0 = std::clamp(static_cast<int>(std::floor(min_u * w - 0.5)), 0, w - 1);
    const int x1 = std::clamp(static_cast<int>(std::floor(max_u * w - 0.5)) + 1, 0, w - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(min_v * h - 0.5)), 0, h - 1);
    const int y1 = std::clamp(static_cast<int>(std::floor(max_v * h - 0.5)) + 1, 0, h - 1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) out[static_cast<size_t>(y) * w + x] = 1;
    }
  }
  return out;
}

void write_ppm(const SubImage& image, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
  f << "P6\n" << image.width << " " << image.height << "\n255\n";
  for (size_t i = 0; i < image.pixels.size(); ++i) {
    const double v = std::clamp(image.pixels[i], 0.0, 1.0);
    const unsigned char byte = static_cast<unsigned char>(std::lround(v * 255.0));
    f.put(static_cast<char>(byte));
  }
}

}  // namespace vhl
