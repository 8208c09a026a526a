#pragma once

#include <span>
#include <string>
#include <vector>

#include "vhl/agent.hpp"
#include "vhl/attack.hpp"
#include "vhl/navgraph.hpp"

namespace vhl {

inline constexpr double kSuccessRadius = 3.0;  // meters, inclusive

// Classic dynamic-programming DTW with moves (i+1,j), (i,j+1), (i+1,j+1),
// endpoints aligned, Euclidean node-position cost. Throws on empty paths.
double dtw(std::span<const NodeId> p, std::span<const NodeId> q,
           std::span<const Vec3> positions);

// exp(-dtw(P,R) / (|R| * d_th)).
double ndtw(std::span<const NodeId> p, std::span<const NodeId> r,
            std::span<const Vec3> positions, double d_th = kSuccessRadius);

// Final nodes within kSuccessRadius (inclusive).
bool success(std::span<const NodeId> p, std::span<const NodeId> r,
             std::span<const Vec3> positions, double threshold = kSuccessRadius);

// Any node of P within the radius of R's final node.
bool oracle_success(std::span<const NodeId> p, std::span<const NodeId> r,
                    std::span<const Vec3> positions, double threshold = kSuccessRadius);

enum class EvalReference { kAttack, kOriginal };

struct EpisodeResult {
  std::string episode_id;
  Trajectory post_trajectory;  // from v_atk, inclusive
  bool sr = false;
  bool osr = false;
  double ndtw = 0.0;
  bool stopped_at_vatk = false;
};

struct MetricsReport {
  std::vector<EpisodeResult> rows;
  double sr_pct = 0.0;
  double osr_pct = 0.0;
  double ndtw_pct = 0.0;
  double stop_rate_pct = 0.0;

  void finalize();  // recomputes aggregates from rows
};

// Forces the agent through each episode's guide prefix, lets it navigate
// freely from v_atk, and scores the post-v_atk trajectory against the attack
// trajectory or the remainder of the episode's own path. All observations
// come from `scene` (pass the attacked scene to measure an attack).
MetricsReport evaluate_instance(const PolicyParams& params, const Scene& scene,
                                const NavGraph& graph, const AttackInstance& instance,
                                std::span<const Episode> episodes, EvalReference reference,
                                const Vocabulary& vocab, int resolution,
                                int max_steps = kDefaultMaxSteps);

// Same, against a prebuilt observation cache for `scene`.
MetricsReport evaluate_instance_cached(const PolicyParams& params, const NavGraph& graph,
                                       const PanoramaCache& cache, const AttackInstance& instance,
                                       std::span<const Episode> episodes, EvalReference reference,
                                       const Vocabulary& vocab,
                                       int max_steps = kDefaultMaxSteps);

// Shannon entropy (nats) of the 12-bin histogram of entrance headings into
// v_atk over the given episodes. Episodes starting at v_atk are skipped.
double heading_entropy(const AttackInstance& instance, std::span<const Episode> episodes,
                       const NavGraph& graph);

// True iff any instruction token matches the category's synonym list
// (case-insensitive).
bool object_mentioned(std::span<const std::string> instruction_tokens, ObjectCategory category);

struct FactorRow {
  std::string instance_id;
  int attack = 0;  // 0 pre-attack, 1 post-attack
  ObjectCategory category = ObjectCategory::kChair;
  double ndtw = 0.0;
  double cov_vatk_pct = 0.0;
  double cov_mean_pct = 0.0;
  double heading_entropy_nats = 0.0;
  bool object_mentioned = false;
};

struct InstanceFactors {
  std::string instance_id;
  ObjectCategory category;
  double pre_ndtw;
  double post_ndtw;
  double cov_vatk_pct;
  double cov_mean_pct;
  double heading_entropy_nats;
  bool object_mentioned;
};

inline constexpr const char* kFactorsHeader =
    "instance_id,attack,category,ndtw,cov_vatk_pct,cov_mean_pct,heading_entropy_nats,"
    "object_mentioned";

// Long-format paired export: two rows per instance (attack = 0 then 1).
// Throws when report lists are misaligned with the instances.
void export_factors(std::span<const InstanceFactors> factors, const std::string& path);
std::vector<FactorRow> factor_rows(std::span<const InstanceFactors> factors);
std::vector<FactorRow> parse_factors_csv(const std::string& path);

}  // namespace vhl
