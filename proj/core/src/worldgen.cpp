#include "vhl/worldgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vhl/rng.hpp"

namespace vhl {

namespace {

constexpr int kTileTexels = 16;
constexpr double kWallHeight = 3.0;
constexpr double kDoorWidth = 1.2;
constexpr double kDoorHeight = 2.2;
constexpr double kEyeHeight = 1.4;

enum class PaintKind { kFloor, kWall, kObject };

struct QuadSpec {
  Vec3 c[4];
  PaintKind kind;
  ObjectCategory category = ObjectCategory::kChair;
};

struct BoxDims {
  double half_w, half_d, height;
};

class MeshBuilder {
 public:
  explicit MeshBuilder(uint64_t paint_seed) : paint_seed_(paint_seed) {}

  void add_quad(const QuadSpec& q) { quads_.push_back(q); }

  // Adds the five visible quads of an axis-aligned floor box and returns the
  // first quad index.
  int add_box(double cx, double cy, const BoxDims& d, ObjectCategory cat) {
    const int first = static_cast<int>(quads_.size());
    const double x0 = cx - d.half_w, x1 = cx + d.half_w;
    const double y0 = cy - d.half_d, y1 = cy + d.half_d;
    const double h = d.height;
    auto quad = [&](Vec3 a, Vec3 b, Vec3 c, Vec3 dd) {
      add_quad({{a, b, c, dd}, PaintKind::kObject, cat});
    };
    quad({x0, y0, 0}, {x1, y0, 0}, {x1, y0, h}, {x0, y0, h});  // south
    quad({x1, y0, 0}, {x1, y1, 0}, {x1, y1, h}, {x1, y0, h});  // east
    quad({x1, y1, 0}, {x0, y1, 0}, {x0, y1, h}, {x1, y1, h});  // north
    quad({x0, y1, 0}, {x0, y0, 0}, {x0, y0, h}, {x0, y1, h});  // west
    quad({x0, y0, h}, {x1, y0, h}, {x1, y1, h}, {x0, y1, h});  // top
    return first;
  }

  int quad_count() const { return static_cast<int>(quads_.size()); }

  void finalize(Scene& scene, int atlas_min) const {
    const int tiles = static_cast<int>(quads_.size());
    const int width = std::max(atlas_min, kTileTexels);
    const int tiles_per_row = width / kTileTexels;
    const int rows = (tiles + tiles_per_row - 1) / tiles_per_row;
    const int height = std::max(atlas_min, rows * kTileTexels);

    scene.atlas = TextureAtlas(width, height, 0.5);
    scene.vertices.reserve(static_cast<size_t>(tiles) * 4);
    scene.faces.reserve(static_cast<size_t>(tiles) * 2);
    scene.face_uvs.reserve(static_cast<size_t>(tiles) * 2);

    for (int q = 0; q < tiles; ++q) {
      const QuadSpec& spec = quads_[static_cast<size_t>(q)];
      const int tx = (q % tiles_per_row) * kTileTexels;
      const int ty = (q / tiles_per_row) * kTileTexels;
      // One texel of inset keeps every bilinear footprint inside the tile.
      const double u0 = (tx + 1.0) / width;
      const double u1 = (tx + kTileTexels - 1.0) / width;
      const double v0 = (ty + 1.0) / height;
      const double v1 = (ty + kTileTexels - 1.0) / height;

      const int base = static_cast<int>(scene.vertices.size());
      for (const Vec3& c : spec.c) scene.vertices.push_back(c);
      scene.faces.push_back({base, base + 1, base + 2});
      scene.face_uvs.push_back({Vec2{u0, v0}, Vec2{u1, v0}, Vec2{u1, v1}});
      scene.faces.push_back({base, base + 2, base + 3});
      scene.face_uvs.push_back({Vec2{u0, v0}, Vec2{u1, v1}, Vec2{u0, v1}});

      paint_tile(scene.atlas, tx, ty, spec, static_cast<uint64_t>(q));
    }
  }

 private:
  void paint_tile(TextureAtlas& atlas, int tx, int ty, const QuadSpec& spec, uint64_t q) const {
    double base[3] = {0.5, 0.5, 0.5};
    double checker = 0.0;
    double noise = 0.02;
    switch (spec.kind) {
      case PaintKind::kFloor:
        base[0] = 0.45, base[1] = 0.34, base[2] = 0.22;
        noise = 0.03;
        break;
      case PaintKind::kWall:
        base[0] = 0.76, base[1] = 0.74, base[2] = 0.70;
        break;
      case PaintKind::kObject: {
        static constexpr double kCat[kCategoryCount][3] = {
            {0.75, 0.15, 0.15},  // chair
            {0.45, 0.27, 0.12},  // cabinet
            {0.85, 0.55, 0.20},  // table
            {0.10, 0.55, 0.15},  // plant
            {0.15, 0.25, 0.75},  // sofa
            {0.08, 0.08, 0.12},  // tv_monitor
        };
        const auto ci = static_cast<size_t>(spec.category);
        base[0] = kCat[ci][0], base[1] = kCat[ci][1], base[2] = kCat[ci][2];
        checker = 0.06;
        break;
      }
    }
    Rng rng(mix_seed(paint_seed_, q));
    const double tile_shift = rng.uniform(-0.03, 0.03);
    for (int y = 0; y < kTileTexels; ++y) {
      for (int x = 0; x < kTileTexels; ++x) {
        const double check = ((x / 4 + y / 4) % 2 == 0) ? checker : -checker;
        for (int c = 0; c < 3; ++c) {
          const double v = base[c] + tile_shift + check + rng.uniform(-noise, noise);
          atlas.at(tx + x, ty + y, c) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }

  std::vector<QuadSpec> quads_;
  uint64_t paint_seed_;
};

void add_wall_with_optional_door(MeshBuilder& mb, const Vec3& a, const Vec3& b, bool door) {
  // a, b are floor-level endpoints of the wall run.
  auto wall_quad = [&](const Vec3& p, const Vec3& q, double z0, double z1) {
    mb.add_quad({{{p.x, p.y, z0}, {q.x, q.y, z0}, {q.x, q.y, z1}, {p.x, p.y, z1}},
                 PaintKind::kWall});
  };
  if (!door) {
    wall_quad(a, b, 0.0, kWallHeight);
    return;
  }
  const Vec3 mid = (a + b) * 0.5;
  const Vec3 dir = normalized(b - a);
  const Vec3 door_l = mid - dir * (kDoorWidth / 2.0);
  const Vec3 door_r = mid + dir * (kDoorWidth / 2.0);
  wall_quad(a, door_l, 0.0, kWallHeight);
  wall_quad(door_r, b, 0.0, kWallHeight);
  wall_quad(door_l, door_r, kDoorHeight, kWallHeight);  // lintel
}

}  // namespace

World generate_world(uint64_t seed, const WorldParams& params) {
  const int rx = params.rooms_x;
  const int ry = params.rooms_y;
  if (rx < 1 || ry < 1) throw std::invalid_argument("generate_world: room grid must be positive");
  if (params.objects_per_room < 0) {
    throw std::invalid_argument("generate_world: object density must be non-negative");
  }
  if (params.room_size < 4.0) {
    throw std::invalid_argument("generate_world: room_size below 4 m cannot host doors");
  }
  const int node_count = rx * ry + (rx - 1) * ry + rx * (ry - 1);
  if (node_count < 8) {
    throw std::invalid_argument(
        "generate_world: layout yields fewer than 8 nodes; too small to host guide and attack "
        "trajectories");
  }

  const double s = params.room_size;
  World world;
  NavGraph& graph = world.graph;

  // Room-center nodes, row-major.
  for (int j = 0; j < ry; ++j) {
    for (int i = 0; i < rx; ++i) {
      graph.add_node({(i + 0.5) * s, (j + 0.5) * s, kEyeHeight});
    }
  }
  auto center_id = [&](int i, int j) { return static_cast<NodeId>(j * rx + i); };

  // Doorway nodes on shared walls; edges connect them to both room centers.
  for (int j = 0; j < ry; ++j) {
    for (int i = 0; i + 1 < rx; ++i) {
      const NodeId d = graph.add_node({(i + 1) * s, (j + 0.5) * s, kEyeHeight});
      graph.add_edge(center_id(i, j), d);
      graph.add_edge(center_id(i + 1, j), d);
    }
  }
  for (int j = 0; j + 1 < ry; ++j) {
    for (int i = 0; i < rx; ++i) {
      const NodeId d = graph.add_node({(i + 0.5) * s, (j + 1) * s, kEyeHeight});
      graph.add_edge(center_id(i, j), d);
      graph.add_edge(center_id(i, j + 1), d);
    }
  }

  MeshBuilder mb(mix_seed(seed, 0x7061696e74ull));

  // Floors.
  for (int j = 0; j < ry; ++j) {
    for (int i = 0; i < rx; ++i) {
      mb.add_quad({{{i * s, j * s, 0}, {(i + 1) * s, j * s, 0}, {(i + 1) * s, (j + 1) * s, 0},
                    {i * s, (j + 1) * s, 0}},
                   PaintKind::kFloor});
    }
  }

  // Per-room walls; interior walls carry a centered doorway.
  for (int j = 0; j < ry; ++j) {
    for (int i = 0; i < rx; ++i) {
      const double x0 = i * s, x1 = (i + 1) * s;
      const double y0 = j * s, y1 = (j + 1) * s;
      add_wall_with_optional_door(mb, {x0, y0, 0}, {x1, y0, 0}, j > 0);       // south
      add_wall_with_optional_door(mb, {x1, y1, 0}, {x0, y1, 0}, j + 1 < ry);  // north
      add_wall_with_optional_door(mb, {x0, y1, 0}, {x0, y0, 0}, i > 0);       // west
      add_wall_with_optional_door(mb, {x1, y0, 0}, {x1, y1, 0}, i + 1 < rx);  // east
    }
  }

  // Objects: one large box near each room center plus smaller boxes further
  // out, all on diagonal bearings so door sightlines stay clear.
  struct PendingObject {
    int first_quad;
    ObjectCategory category;
  };
  std::vector<PendingObject> pending;
  if (params.objects_per_room > 0) {
    Rng rng(mix_seed(seed, 0x6f626a65637473ull));
    std::vector<int> cat_order{0, 1, 2, 3, 4, 5};
    rng.shuffle(cat_order);
    int next_cat = 0;
    for (int j = 0; j < ry; ++j) {
      for (int i = 0; i < rx; ++i) {
        const double cx = (i + 0.5) * s;
        const double cy = (j + 0.5) * s;
        for (int k = 0; k < params.objects_per_room; ++k) {
          const ObjectCategory cat =
              static_cast<ObjectCategory>(cat_order[static_cast<size_t>(next_cat++ % 6)]);
          BoxDims dims{};
          double radius;
          if (k == 0) {
            dims = {rng.uniform(0.5, 0.7), rng.uniform(0.5, 0.7), rng.uniform(1.2, 1.8)};
            radius = rng.uniform(1.0, 1.6);
          } else {
            dims = {rng.uniform(0.25, 0.45), rng.uniform(0.25, 0.45), rng.uniform(0.4, 1.0)};
            radius = rng.uniform(1.9, 2.5);
          }
          const double azimuth =
              (kPi / 4.0) + (kPi / 2.0) * rng.uniform_int(0, 3) + rng.uniform(-0.4, 0.4);
          double ox = cx + std::sin(azimuth) * radius;
          double oy = cy + std::cos(azimuth) * radius;
          const double margin = 0.3;
          ox = std::clamp(ox, i * s + margin + dims.half_w, (i + 1) * s - margin - dims.half_w);
          oy = std::clamp(oy, j * s + margin + dims.half_d, (j + 1) * s - margin - dims.half_d);
          pending.push_back({mb.add_box(ox, oy, dims, cat), cat});
        }
      }
    }
  }

  mb.finalize(world.scene, params.atlas_size);

  for (size_t k = 0; k < pending.size(); ++k) {
    SceneObject obj;
    obj.id = static_cast<int>(k);
    obj.category = pending[k].category;
    for (int q = pending[k].first_quad; q < pending[k].first_quad + 5; ++q) {
      obj.faces.push_back(q * 2);
      obj.faces.push_back(q * 2 + 1);
    }
    std::sort(obj.faces.begin(), obj.faces.end());
    world.scene.objects.push_back(std::move(obj));
  }

  world.scene.validate();
  return world;
}

TurnLabel turn_label(double heading_change) {
  const double d = wrap_angle(heading_change);
  if (std::abs(d) <= kPi / 4.0) return TurnLabel::kStraight;
  if (std::abs(d) > 3.0 * kPi / 4.0) return TurnLabel::kAround;
  return d > 0 ? TurnLabel::kRight : TurnLabel::kLeft;
}

const std::string& turn_word(TurnLabel t) {
  static const std::vector<std::string> kWords = {"straight", "left", "right", "around"};
  return kWords[static_cast<size_t>(t)];
}

const std::vector<std::string>& category_words(ObjectCategory c) {
  static const std::vector<std::vector<std::string>> kWords = {
      {"chair", "armchair"}, {"cabinet", "cupboard"}, {"table", "desk"},
      {"plant", "fern"},     {"sofa", "couch"},       {"tv", "screen"},
  };
  return kWords[static_cast<size_t>(c)];
}

const std::vector<std::string>& instruction_vocabulary() {
  static const std::vector<std::string> kVocab = [] {
    std::vector<std::string> v{kPadToken, kUnkToken};
    for (const char* w : {"straight", "left", "right", "around"}) v.emplace_back(w);
    for (int c = 0; c < kCategoryCount; ++c) {
      for (const auto& w : category_words(static_cast<ObjectCategory>(c))) v.push_back(w);
    }
    v.emplace_back("marker");
    for (const char* w : {"walk", "past", "the", "then", "finally", "and", "stop", "at"}) {
      v.emplace_back(w);
    }
    for (const char* w : {"head", "by", "now", "wait"}) v.emplace_back(w);
    for (const char* w : {"go", "near", "next", "halt", "beside"}) v.emplace_back(w);
    return v;
  }();
  return kVocab;
}

int nearest_object(const Scene& scene, const Vec3& position, double max_dist) {
  int best = -1;
  double best_d = max_dist;
  for (const auto& obj : scene.objects) {
    const double d = distance(scene.object_centroid(obj.id), position);
    if (d <= best_d && (best < 0 || d < best_d)) {
      best = obj.id;
      best_d = d;
    }
  }
  return best;
}

namespace {

std::string landmark_word(const Scene& scene, const Vec3& pos, int family) {
  const int obj = nearest_object(scene, pos);
  if (obj < 0) return "marker";
  const auto& words = category_words(scene.find_object(obj)->category);
  return words[family == 1 ? 1 % words.size() : 0];
}

void append_words(std::vector<std::string>& out, std::initializer_list<std::string> words) {
  for (const auto& w : words) out.push_back(w);
}

}  // namespace

std::vector<std::string> instruction_from_trajectory(const Trajectory& trajectory,
                                                     const Scene& scene, const NavGraph& graph,
                                                     int template_index) {
  if (template_index < 0 || template_index >= kInstructionTemplates) {
    throw std::invalid_argument("instruction_from_trajectory: template index out of range");
  }
  if (!graph.is_valid_trajectory(trajectory) || trajectory.size() < 2) {
    throw std::invalid_argument("instruction_from_trajectory: invalid trajectory");
  }
  const int steps = static_cast<int>(trajectory.size()) - 1;
  std::vector<std::string> turns, lms;
  double prev_heading = 0.0;  // first turn is labeled against north
  for (int t = 0; t < steps; ++t) {
    const double h = heading_of(graph.position(trajectory[static_cast<size_t>(t)]),
                                graph.position(trajectory[static_cast<size_t>(t) + 1]));
    turns.push_back(turn_word(turn_label(h - prev_heading)));
    prev_heading = h;
    lms.push_back(
        landmark_word(scene, graph.position(trajectory[static_cast<size_t>(t) + 1]),
                      template_index));
  }

  std::vector<std::string> out;
  const std::string& goal = lms.back();
  switch (template_index) {
    case 0:
      for (int t = 0; t + 1 < steps; ++t) {
        if (t > 0) out.emplace_back("then");
        append_words(out, {"walk", turns[static_cast<size_t>(t)], "past", "the",
                           lms[static_cast<size_t>(t)]});
      }
      if (steps > 1) out.emplace_back("then");
      append_words(out, {"finally", "walk", turns.back(), "and", "stop", "at", "the", goal});
      break;
    case 1:
      for (int t = 0; t + 1 < steps; ++t) {
        if (t > 0) out.emplace_back("now");
        append_words(out, {"head", turns[static_cast<size_t>(t)], "by", "the",
                           lms[static_cast<size_t>(t)]});
      }
      if (steps > 1) out.emplace_back("now");
      append_words(out, {"head", turns.back(), "then", "wait", "at", "the", goal});
      break;
    default:
      for (int t = 0; t + 1 < steps; ++t) {
        if (t > 0) out.emplace_back("next");
        append_words(out, {"go", turns[static_cast<size_t>(t)], "near", "the",
                           lms[static_cast<size_t>(t)]});
      }
      if (steps > 1) out.emplace_back("next");
      append_words(out, {"go", turns.back(), "and", "halt", "beside", "the", goal});
      break;
  }
  return out;
}

std::vector<Episode> generate_episodes(const NavGraph& graph, const Scene& scene,
                                       const std::string& env_id, int count, uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate_episodes: count must be >= 1");

  // Ordered endpoint pairs whose shortest path spans 4..7 edges.
  std::vector<std::pair<NodeId, NodeId>> qualifying;
  for (NodeId a = 0; a < graph.node_count(); ++a) {
    for (NodeId b = 0; b < graph.node_count(); ++b) {
      if (a == b) continue;
      const Trajectory p = shortest_path(graph, a, b);
      const size_t edges = p.size() - 1;
      if (edges >= 4 && edges <= 7) qualifying.emplace_back(a, b);
    }
  }
  if (qualifying.empty()) {
    throw std::runtime_error("generate_episodes: graph admits no 4-edge shortest path");
  }

  Rng rng(mix_seed(seed, fnv1a64(env_id)));
  std::vector<std::pair<NodeId, NodeId>> order = qualifying;
  rng.shuffle(order);

  const int traj_count = (count + kInstructionTemplates - 1) / kInstructionTemplates;
  std::vector<Episode> episodes;
  episodes.reserve(static_cast<size_t>(count));
  for (int t = 0; t < traj_count; ++t) {
    // Small graphs can run out of distinct pairs; repeats stay in the same
    // trajectory group (same _t key) so holdout splits never straddle them.
    const int pair_index = t % static_cast<int>(order.size());
    const int wrap = t / static_cast<int>(order.size());
    const auto& [a, b] = order[static_cast<size_t>(pair_index)];
    const Trajectory traj = shortest_path(graph, a, b);
    for (int k = 0; k < kInstructionTemplates && static_cast<int>(episodes.size()) < count; ++k) {
      Episode ep;
      ep.env_id = env_id;
      ep.id = env_id + "_t" + std::to_string(pair_index) + "_i" +
              std::to_string(k + kInstructionTemplates * wrap);
      ep.instruction = instruction_from_trajectory(traj, scene, graph, k);
      ep.trajectory = traj;
      episodes.push_back(std::move(ep));
    }
  }
  return episodes;
}

}  // namespace vhl
