#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vhl/agent.hpp"
#include "vhl/navgraph.hpp"
#include "vhl/obs_cache.hpp"
#include "vhl/render.hpp"
#include "vhl/scene.hpp"
#include "vhl/worldgen.hpp"

namespace vhl {

enum class AttackMode { kStop, kTrajectory };

const std::string& attack_mode_name(AttackMode m);
AttackMode attack_mode_from_name(const std::string& name);

struct AttackConfig {
  double epsilon = 0.3;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int iterations = 300;
  int batch_size = 16;
  int checkpoint_every = 30;
  int steps_rendered = 3;
  AttackMode mode = AttackMode::kTrajectory;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Minimum coverage an object must reach in some sub-image of a viewpoint to
// qualify as an attack candidate (inclusive).
inline constexpr double kCandidateCoverage = 0.40;
inline constexpr int kMinSupportEpisodes = 5;
inline constexpr double kAttackGoalMinDist = 3.0;  // meters from the original goal

struct CandidateObject {
  int object_id;
  double max_coverage;
};

// Attack-candidate objects per node: objects whose maximum coverage over the
// 36 sub-images is at least kCandidateCoverage, with that maximum recorded.
std::map<NodeId, std::vector<CandidateObject>> candidate_objects(const Scene& scene,
                                                                 const NavGraph& graph,
                                                                 int resolution);
std::map<NodeId, std::vector<CandidateObject>> candidate_objects_cached(
    const Scene& scene, const NavGraph& graph, const PanoramaCache& cache);

// One attack optimization task: a test episode, the chosen attack object and
// viewpoint, the attack trajectory (empty in stop mode) and the supporting
// episode split.
struct AttackInstance {
  std::string id;
  std::string env_id;
  Episode test_episode;
  int attack_object = -1;
  NodeId v_atk = -1;
  Trajectory attack_trajectory;  // starts at v_atk; empty in stop mode
  std::vector<Episode> train_split;
  std::vector<Episode> val_split;
  AttackMode mode = AttackMode::kTrajectory;
};

struct BuildOutcome {
  std::optional<AttackInstance> instance;
  std::string rejection;  // "no_candidate" / "no_far_goal" when empty above
};

// Scans the test episode's viewpoints for a candidate object with at least
// five supporting train episodes, excluding guide-prefix matches (and, in
// stop mode, episodes terminating at the viewpoint). Among qualifying
// viewpoints picks the largest visibility score (ties: smaller object id,
// then smaller node id). The support set is split 80/20 by ascending episode
// id hash.
BuildOutcome build_attack_instance(const Episode& test_episode,
                                   std::span<const Episode> train_episodes, const Scene& scene,
                                   const NavGraph& graph, const PanoramaCache& cache,
                                   AttackMode mode);

// Index of the first occurrence of `node` in `traj`, or -1.
int first_index_of(const Trajectory& traj, NodeId node);

struct AttackLossResult {
  double loss = 0.0;
  TexelGradient gradient;
};

// Shared per-instance state for repeated loss evaluations: cached unattacked
// observations, live-view raster buffers at the rendered attack steps, and
// the face mask. Geometry never changes, so buffers are rasterized once.
class AttackLossComputer {
 public:
  AttackLossComputer(const Scene& original_scene, const NavGraph& graph,
                     const PolicyParams& params, const AttackInstance& instance,
                     const PanoramaCache& cache, const Vocabulary& vocab, int steps_rendered);

  // Batch-mean attack loss at `atlas` and its masked texture gradient.
  AttackLossResult compute(const TextureAtlas& atlas, std::span<const Episode> batch) const;

  const FaceMask& mask() const { return mask_; }
  const std::vector<NodeId>& rendered_nodes() const { return rendered_nodes_; }

 private:
  struct LiveView {
    NodeId node;
    int view_index;
    RasterBuffers buffers;
  };

  const NavGraph& graph_;
  const PolicyParams& params_;
  const AttackInstance& instance_;
  const PanoramaCache& cache_;
  const Vocabulary& vocab_;
  FaceMask mask_;
  std::vector<NodeId> rendered_nodes_;       // v_atk plus next steps_rendered-1
  std::vector<std::vector<LiveView>> live_;  // per rendered node
};

// Spec-shaped single call: treats `scene` as both the unattacked cache source
// and the atlas under evaluation.
AttackLossResult attack_loss(const PolicyParams& params, const Scene& scene,
                             const NavGraph& graph, const AttackInstance& instance,
                             std::span<const Episode> batch, int steps_rendered);

// ADAM state over the atlas, restricted to the masked texels.
struct AtlasOptState {
  std::vector<double> m;
  std::vector<double> v;
  int64_t t = 0;
  TexelMask mask;

  AtlasOptState(size_t values, TexelMask texel_mask)
      : m(values, 0.0), v(values, 0.0), mask(std::move(texel_mask)) {}
};

// One bias-corrected ADAM step on masked texels, then projection to the
// epsilon ball around the original and clamping to [0,1]. Unmasked texels are
// left untouched.
void adam_project_step(TextureAtlas& atlas, const TextureAtlas& original,
                       const TexelGradient& grad, AtlasOptState& state, const AttackConfig& config);

struct AttackCheckpoint {
  int iteration = 0;
  double score = 0.0;
};

struct AttackRunResult {
  TextureAtlas atlas;                       // best checkpoint's atlas
  std::vector<AttackCheckpoint> checkpoints;
  int best_iteration = 0;
  double best_score = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

using CheckpointHook = std::function<void(const AttackCheckpoint&, const TextureAtlas&)>;

// Runs the masked-gradient, L-infinity-projected ADAM optimization, scoring a
// checkpoint every checkpoint_every iterations on the validation split
// (trajectory mode: mean nDTW of the post-attack rollout vs the attack
// trajectory; stop mode: stop rate). Returns the highest-scoring checkpoint
// (ties: earliest). Deterministic for a fixed seed.
AttackRunResult optimize_attack(const AttackInstance& instance, const Scene& scene,
                                const NavGraph& graph, const PolicyParams& params,
                                const PanoramaCache& cache, const Vocabulary& vocab,
                                const AttackConfig& config, uint64_t seed,
                                const CheckpointHook& hook = {});

}  // namespace vhl
