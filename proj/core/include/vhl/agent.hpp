#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vhl/autodiff.hpp"
#include "vhl/navgraph.hpp"
#include "vhl/render.hpp"
#include "vhl/worldgen.hpp"

namespace vhl {

class PanoramaCache;

// Token ids dense from 0; PAD = 0, UNK = 1. Unknown tokens encode to UNK.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  explicit Vocabulary(std::vector<std::string> tokens);
  static const Vocabulary& standard();  // the instruction grammar's closed set

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(const std::string& token) const;
  std::vector<int> encode(std::span<const std::string> tokens) const;
  const std::string& token(int id) const { return tokens_[static_cast<size_t>(id)]; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

inline constexpr int kPatchGrid = 4;
inline constexpr int kPatchFeatureDim = kPatchGrid * kPatchGrid * 3;  // 48
inline constexpr int kDirEncodingDim = 4;                             // sin/cos x 2
inline constexpr int kDefaultMaxSteps = 15;

// All weights of the navigation policy. Immutable during attacks.
struct PolicyParams {
  int dim = 64;
  int vocab_size = 0;

  // Biases and embeddings are stored as single-column matrices so every
  // entry shares one shape type.
  ad::Mat embedding;  // vocab x dim

  // Gated recurrent cell over instruction tokens.
  ad::Mat instr_wz, instr_uz, instr_wh, instr_uh;
  ad::Mat instr_bz, instr_bh;

  // Gated recurrent cell updating trajectory history with the pooled
  // observation feature.
  ad::Mat hist_wz, hist_uz, hist_wh, hist_uh;
  ad::Mat hist_bz, hist_bh;

  ad::Mat obs_proj;  // dim x 48
  ad::Mat dir_proj;  // dim x 4

  // Two-layer fusion of [instruction; history; pooled] into the scoring state.
  ad::Mat fuse_w1;  // dim x 3*dim
  ad::Mat fuse_b1;
  ad::Mat fuse_w2;  // dim x dim
  ad::Mat fuse_b2;

  ad::Mat stop_embedding;  // dim x 1

  static PolicyParams zeros(int dim, int vocab_size);
  static PolicyParams xavier(int dim, int vocab_size, uint64_t seed);

  // Fixed serialization order of (name, matrix) pairs.
  std::vector<std::pair<std::string, const ad::Mat*>> entries() const;
  std::vector<std::pair<std::string, ad::Mat*>> entries();
  size_t parameter_count() const;
  std::vector<double> to_flat() const;
  void from_flat(std::span<const double> flat);
};

struct HistoryState {
  Eigen::VectorXd h;         // d-vector summary of the trajectory so far
  double orientation = 0.0;  // heading of the last traversed edge; 0 initially

  static HistoryState initial(int dim);
};

struct CandidateView {
  NodeId node = -1;  // -1 marks STOP
  double heading_abs = 0.0;
  double heading_rel = 0.0;
  double elevation = 0.0;
};

// Candidates for leaving `node`: neighbors in ascending id order. STOP is
// always the final action slot and carries no CandidateView entry here.
std::vector<CandidateView> candidate_views(const NavGraph& graph, NodeId node,
                                           double orientation);

// Probabilities over candidate next nodes plus STOP (last entry).
struct ActionDistribution {
  std::vector<NodeId> candidates;  // neighbor ids; implicit STOP after them
  std::vector<double> probs;       // size candidates.size() + 1

  int action_count() const { return static_cast<int>(probs.size()); }
  int stop_index() const { return action_count() - 1; }
  // Argmax with ties to the smallest node id; STOP loses ties.
  int argmax() const;
};

struct ObsFeatures {
  std::vector<Eigen::VectorXd> candidate_feats;
  Eigen::VectorXd pooled;
};

// --- Tape-level building blocks (shared by training, rollout and attacks) ---

// Parameter handles on a tape.
struct PolicyVars {
  ad::Var embedding;
  ad::Var instr_wz, instr_uz, instr_wh, instr_uh, instr_bz, instr_bh;
  ad::Var hist_wz, hist_uz, hist_wh, hist_uh, hist_bz, hist_bh;
  ad::Var obs_proj, dir_proj;
  ad::Var fuse_w1, fuse_b1, fuse_w2, fuse_b2;
  ad::Var stop_embedding;
  int dim = 0;
};

PolicyVars make_policy_vars(ad::Tape& tape, const PolicyParams& params, bool requires_grad);

ad::Var encode_instruction_t(ad::Tape& tape, const PolicyVars& pv, std::span<const int> tokens);

struct ObsFeaturesT {
  std::vector<ad::Var> candidate_feats;
  ad::Var pooled;
};

// views48: one 48-dim Var per panorama sub-image (live pixels go through
// Tape::patch_means; cached views enter as constants).
ObsFeaturesT featurize_views_t(ad::Tape& tape, const PolicyVars& pv,
                               std::span<const ad::Var> views48,
                               std::span<const CandidateView> candidates);

struct StepOutputT {
  ad::Var logits;       // candidates then STOP
  ad::Var new_history;  // d x 1
};

StepOutputT policy_step_t(ad::Tape& tape, const PolicyVars& pv, ad::Var instr_enc,
                          ad::Var history, const ObsFeaturesT& obs);

// --- Spec-level operations -------------------------------------------------

// Gated recurrent pass over token embeddings, mean over steps. Throws on an
// empty token list or out-of-range ids.
Eigen::VectorXd encode_instruction(std::span<const int> tokens, const PolicyParams& params);

// Patch features of one sub-image (row-major 4x4 grid x RGB).
Eigen::VectorXd patch_features(const SubImage& image);

ObsFeatures featurize_observation(const Panorama& panorama,
                                  std::span<const CandidateView> candidates,
                                  const PolicyParams& params);

std::pair<ActionDistribution, HistoryState> policy_step(const Eigen::VectorXd& instr_enc,
                                                        const HistoryState& history,
                                                        const ObsFeatures& obs,
                                                        std::span<const CandidateView> candidates,
                                                        const PolicyParams& params);

// Read-only per-node observation features for one environment.
struct EnvContext {
  const NavGraph* graph = nullptr;
  const PanoramaCache* cache = nullptr;
};

Trajectory rollout(const PolicyParams& params, const Scene& scene, const NavGraph& graph,
                   std::span<const int> instruction, NodeId start_node,
                   int max_steps = kDefaultMaxSteps, int resolution = 32);

// Continues from a prepared state without re-encoding the prefix.
Trajectory rollout_from_state(const PolicyParams& params, const EnvContext& env,
                              std::span<const int> instruction, NodeId start_node,
                              HistoryState state, int max_steps = kDefaultMaxSteps);

// Teacher-forces the policy along `prefix` (one observation update per node)
// and returns the resulting state. An empty prefix yields the initial state.
// Throws std::invalid_argument when the prefix is not graph-adjacent.
HistoryState forced_rollout(const PolicyParams& params, const Scene& scene, const NavGraph& graph,
                            std::span<const int> instruction, std::span<const NodeId> prefix,
                            int resolution = 32);
HistoryState forced_rollout_cached(const PolicyParams& params, const EnvContext& env,
                                   std::span<const int> instruction,
                                   std::span<const NodeId> prefix);

struct BCConfig {
  int epochs = 40;
  double lr = 1e-3;
  int batch_size = 8;
  uint64_t seed = 1;
};

struct BCResult {
  PolicyParams params;
  std::vector<double> epoch_losses;
};

// Behavior cloning with teacher forcing and ADAM; STOP is supervised at the
// trajectory end. Loss is the per-step mean cross-entropy.
BCResult train_bc(const PolicyParams& init, std::span<const Episode> episodes,
                  const std::map<std::string, EnvContext>& envs, const Vocabulary& vocab,
                  const BCConfig& config);

}  // namespace vhl
