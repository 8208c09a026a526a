#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vhl/navgraph.hpp"
#include "vhl/scene.hpp"

namespace vhl {

// Axis-aligned rooms on a grid; nodes at room centers and doorways; objects
// are textured boxes snapped to floors.
struct WorldParams {
  int rooms_x = 3;
  int rooms_y = 3;
  double room_size = 6.0;
  int objects_per_room = 2;  // 0 requests an empty object table
  int atlas_size = 256;      // minimum; the atlas grows to fit the mesh

  bool operator==(const WorldParams&) const = default;
};

struct World {
  Scene scene;
  NavGraph graph;
};

// Deterministic for fixed (seed, params). Throws std::invalid_argument when
// the grid yields fewer than 8 nodes or the density is negative.
World generate_world(uint64_t seed, const WorldParams& params);

struct Episode {
  std::string id;
  std::string env_id;
  std::vector<std::string> instruction;  // tokens
  Trajectory trajectory;
};

// Every token the instruction grammar can emit, PAD/UNK first.
const std::vector<std::string>& instruction_vocabulary();

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

// Words each paraphrase family uses for a category (primary plus synonyms).
const std::vector<std::string>& category_words(ObjectCategory c);

inline constexpr int kInstructionTemplates = 3;

// Deterministic template filling from per-step turn directions and nearest
// labeled objects. The UNRESOLVED landmark fallback is the token "marker".
std::vector<std::string> instruction_from_trajectory(const Trajectory& trajectory,
                                                     const Scene& scene, const NavGraph& graph,
                                                     int template_index);

// Relative turn label for a heading change, binned at 45/135 degrees.
enum class TurnLabel { kStraight, kLeft, kRight, kAround };
TurnLabel turn_label(double heading_change);
const std::string& turn_word(TurnLabel t);

// Nearest labeled object to a node within `max_dist` meters, or -1.
int nearest_object(const Scene& scene, const Vec3& position, double max_dist = 5.0);

// Episodes whose trajectories are shortest paths of 4..7 edges; each sampled
// trajectory is emitted under kInstructionTemplates paraphrases. Throws
// std::runtime_error when the graph admits no 4-edge shortest path.
std::vector<Episode> generate_episodes(const NavGraph& graph, const Scene& scene,
                                       const std::string& env_id, int count, uint64_t seed);

}  // namespace vhl
