#include "vhl/scene.hpp"

#include <cmath>
#include <stdexcept>

namespace vhl {

namespace {
const std::array<std::string, kCategoryCount> kCategoryNames = {
    "chair", "cabinet", "table", "plant", "sofa", "tv_monitor"};
}

const std::string& category_name(ObjectCategory c) {
  return kCategoryNames[static_cast<size_t>(c)];
}

ObjectCategory category_from_name(const std::string& name) {
  for (size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<ObjectCategory>(i);
  }
  throw std::invalid_argument("unknown object category: " + name);
}

const std::vector<int>& Scene::face_object() const {
  if (face_object_.size() != faces.size()) {
    face_object_.assign(faces.size(), -1);
    for (const auto& obj : objects) {
      for (int f : obj.faces) face_object_[static_cast<size_t>(f)] = obj.id;
    }
  }
  return face_object_;
}

const SceneObject* Scene::find_object(int object_id) const {
  for (const auto& obj : objects) {
    if (obj.id == object_id) return &obj;
  }
  return nullptr;
}

Vec3 Scene::object_centroid(int object_id) const {
  const SceneObject* obj = find_object(object_id);
  if (obj == nullptr) throw std::invalid_argument("object_centroid: unknown object id");
  Vec3 sum{};
  int n = 0;
  for (int f : obj->faces) {
    const Face& face = faces[static_cast<size_t>(f)];
    for (int v : {face.v0, face.v1, face.v2}) {
      sum = sum + vertices[static_cast<size_t>(v)];
      ++n;
    }
  }
  return sum * (1.0 / n);
}

void Scene::validate() const {
  const int nv = static_cast<int>(vertices.size());
  if (faces.size() != face_uvs.size()) throw std::runtime_error("scene: face/uv count mismatch");
  for (const auto& v : vertices) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z)) {
      throw std::runtime_error("scene: non-finite vertex");
    }
  }
  for (const auto& f : faces) {
    if (f.v0 < 0 || f.v0 >= nv || f.v1 < 0 || f.v1 >= nv || f.v2 < 0 || f.v2 >= nv) {
      throw std::runtime_error("scene: face vertex index out of range");
    }
  }
  for (const auto& uvs : face_uvs) {
    for (const auto& uv : uvs) {
      if (!(uv.u >= 0.0 && uv.u <= 1.0 && uv.v >= 0.0 && uv.v <= 1.0)) {
        throw std::runtime_error("scene: UV outside [0,1]");
      }
    }
  }
  std::vector<int> owner(faces.size(), -1);
  for (const auto& obj : objects) {
    for (int f : obj.faces) {
      if (f < 0 || f >= face_count()) throw std::runtime_error("scene: object face id out of range");
      if (owner[static_cast<size_t>(f)] != -1) {
        throw std::runtime_error("scene: face owned by more than one object");
      }
      owner[static_cast<size_t>(f)] = obj.id;
    }
  }
  for (double t : atlas.texels) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::runtime_error("scene: atlas texel outside [0,1]");
  }
}

}  // namespace vhl
