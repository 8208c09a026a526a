#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vhl/geometry.hpp"

namespace vhl {

// Mutable RGB texel grid, channels in [0,1], row-major, RGB interleaved.
struct TextureAtlas {
  int width = 0;
  int height = 0;
  std::vector<double> texels;  // width*height*3

  TextureAtlas() = default;
  TextureAtlas(int w, int h, double fill = 0.0)
      : width(w), height(h), texels(static_cast<size_t>(w) * h * 3, fill) {}

  size_t index(int x, int y, int c) const {
    return (static_cast<size_t>(y) * width + x) * 3 + c;
  }
  double at(int x, int y, int c) const { return texels[index(x, y, c)]; }
  double& at(int x, int y, int c) { return texels[index(x, y, c)]; }
  size_t texel_count() const { return static_cast<size_t>(width) * height; }
};

enum class ObjectCategory : uint8_t { kChair = 0, kCabinet, kTable, kPlant, kSofa, kTvMonitor };

inline constexpr int kCategoryCount = 6;

const std::string& category_name(ObjectCategory c);
ObjectCategory category_from_name(const std::string& name);

struct SceneObject {
  int id = -1;
  ObjectCategory category = ObjectCategory::kChair;
  std::vector<int> faces;  // contiguous face-id run on the mesh
};

struct Face {
  int v0, v1, v2;
};

// Triangle mesh with per-face UVs, labeled objects and a texture atlas.
struct Scene {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<std::array<Vec2, 3>> face_uvs;
  std::vector<SceneObject> objects;  // sorted by id
  TextureAtlas atlas;

  int face_count() const { return static_cast<int>(faces.size()); }

  // -1 for faces that belong to no object.
  const std::vector<int>& face_object() const;
  const SceneObject* find_object(int object_id) const;
  Vec3 object_centroid(int object_id) const;

  // Checks index ranges, UV bounds, atlas range and single-object face
  // ownership; throws std::runtime_error naming the first violation.
  void validate() const;

 private:
  mutable std::vector<int> face_object_;  // lazy index, rebuilt when stale
};

}  // namespace vhl
