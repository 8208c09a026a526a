#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vhl/config.hpp"
#include "vhl/io.hpp"
#include "vhl/metrics.hpp"
#include "vhl/obs_cache.hpp"

namespace vhl {

// A required upstream artifact is absent; maps to exit code 2.
struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PipelinePaths {
  std::filesystem::path root;

  explicit PipelinePaths(const std::filesystem::path& out) : root(out) {}
  std::filesystem::path world_json(int i) const;
  std::filesystem::path world_blob(int i) const;
  std::filesystem::path policy() const { return root / "agent" / "policy.bin"; }
  std::filesystem::path gate() const { return root / "agent" / "gate.json"; }
  std::filesystem::path train_log() const { return root / "agent" / "train_log.csv"; }
  std::filesystem::path attacks() const { return root / "attacks" / "attacks.json"; }
  std::filesystem::path instance_dir(const std::string& id) const {
    return root / "attack" / id;
  }
  std::filesystem::path eval_dir(const std::string& id) const { return root / "eval" / id; }
  std::filesystem::path eval_summary() const { return root / "eval" / "summary.json"; }
  std::filesystem::path factors_csv() const { return root / "eval" / "factors.csv"; }
  std::filesystem::path report_dir() const { return root / "report"; }
  std::filesystem::path ablate_dir() const { return root / "ablate"; }
};

// Runs fn(0..n-1) on up to `workers` threads; rethrows the first exception.
void parallel_for(int workers, size_t n, const std::function<void(size_t)>& fn);

std::string env_name(int index);

// Paraphrases of one trajectory share the holdout decision: the split keys on
// the episode's trajectory-group hash.
bool is_heldout(const Episode& ep, double holdout_fraction);

struct LoadedWorlds {
  std::vector<WorldBundle> bundles;
  std::map<std::string, size_t> by_env;
  std::vector<std::unique_ptr<PanoramaCache>> caches;  // parallel to bundles

  const WorldBundle& bundle(const std::string& env_id) const {
    return bundles[by_env.at(env_id)];
  }
  const PanoramaCache& cache(const std::string& env_id) const {
    return *caches[by_env.at(env_id)];
  }
  std::map<std::string, EnvContext> contexts() const;
};

LoadedWorlds load_worlds(const RunConfig& config, bool with_caches = true);

struct GateResult {
  double sr = 0.0;    // fraction
  double ndtw = 0.0;  // mean fraction
  int episodes = 0;
  bool pass = false;
};

inline constexpr double kGateSr = 0.80;
inline constexpr double kGateNdtw = 0.75;

GateResult competence_gate(const PolicyParams& params, std::span<const Episode> heldout,
                           const std::map<std::string, EnvContext>& envs, const Vocabulary& vocab,
                           int max_steps);

// Pipeline stages. Each throws MissingArtifactError when an upstream artifact
// is absent and ConfigError / std::runtime_error on validation failures.
void stage_gen_world(const RunConfig& config);
void stage_train_agent(const RunConfig& config);
void stage_build_attacks(const RunConfig& config);
void stage_attack(const RunConfig& config);
void stage_eval(const RunConfig& config);
void stage_ablate(const RunConfig& config);
void stage_report(const RunConfig& config);

// Dispatches a CLI command; returns the process exit code (0 success,
// 1 validation error, 2 missing dependency).
int run_command(const std::string& command, const RunConfig& config);

// --- shared helpers used by stages, the ablation sweep and acceptance ------

struct InstanceEvalConditions {
  // reports[split][scene][reference]; split: 0 train, 1 val, 2 test;
  // scene: 0 attacked, 1 original; reference: 0 attack, 1 original.
  MetricsReport reports[3][2][2];
};

InstanceEvalConditions evaluate_all_conditions(const PolicyParams& params, const NavGraph& graph,
                                               const PanoramaCache& attacked_cache,
                                               const PanoramaCache& original_cache,
                                               const AttackInstance& instance,
                                               const Vocabulary& vocab, int max_steps);

InstanceFactors compute_instance_factors(const AttackInstance& instance, const NavGraph& graph,
                                         const PanoramaCache& cache, const Scene& scene,
                                         int steps_rendered, double pre_ndtw, double post_ndtw);

// Pools episode rows from several reports and recomputes aggregates.
MetricsReport pool_reports(std::span<const MetricsReport> reports);

// Keeps the first `count` paraphrases of every trajectory group (ablation of
// instructions per trajectory).
std::vector<Episode> limit_instructions(std::span<const Episode> episodes, int count);

}  // namespace vhl
