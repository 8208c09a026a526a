#include "vhl/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "vhl/rng.hpp"

namespace vhl {

using nlohmann::json;

std::filesystem::path PipelinePaths::world_json(int i) const {
  return root / "world" / ("world_" + env_name(i) + ".json");
}

std::filesystem::path PipelinePaths::world_blob(int i) const {
  return root / "world" / ("world_" + env_name(i) + ".txa");
}

std::string env_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "env%03d", index);
  return buf;
}

void parallel_for(int workers, size_t n, const std::function<void(size_t)>& fn) {
  const int nthreads = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (nthreads == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(nthreads));
  for (int t = 0; t < nthreads; ++t) {
    threads.emplace_back([&] {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

// Trajectory-group key: the episode id without its paraphrase suffix.
std::string trajectory_key(const std::string& episode_id) {
  const size_t at = episode_id.rfind("_i");
  return at == std::string::npos ? episode_id : episode_id.substr(0, at);
}

void require_file(const std::filesystem::path& path, const std::string& hint) {
  if (!std::filesystem::exists(path)) {
    throw MissingArtifactError("missing artifact " + path.string() + "; run `" + hint + "` first");
  }
}

void check_hash(const std::string& artifact_hash, const std::string& expected,
                const std::string& what) {
  if (artifact_hash != expected) {
    throw std::runtime_error("config hash mismatch for " + what + " (artifact " + artifact_hash +
                             ", config " + expected + "); regenerate upstream stages");
  }
}

}  // namespace

bool is_heldout(const Episode& ep, double holdout_fraction) {
  const uint64_t h = fnv1a64(trajectory_key(ep.id), 0x68656c64ull * 0x100000001b3ull + 0xcbf29ce484222325ull);
  return static_cast<double>(h % 100000) < holdout_fraction * 100000.0;
}

std::map<std::string, EnvContext> LoadedWorlds::contexts() const {
  std::map<std::string, EnvContext> out;
  for (size_t i = 0; i < bundles.size(); ++i) {
    out[bundles[i].env_id] = EnvContext{&bundles[i].world.graph, caches[i].get()};
  }
  return out;
}

LoadedWorlds load_worlds(const RunConfig& config, bool with_caches) {
  PipelinePaths paths(config.out);
  LoadedWorlds out;
  for (int e = 0; e < config.environments; ++e) {
    require_file(paths.world_json(e), "vhl gen-world");
    out.bundles.push_back(load_world_bundle(paths.world_json(e)));
    out.by_env[out.bundles.back().env_id] = out.bundles.size() - 1;
  }
  if (with_caches) {
    out.caches.resize(out.bundles.size());
    parallel_for(config.workers, out.bundles.size(), [&](size_t i) {
      out.caches[i] = std::make_unique<PanoramaCache>(out.bundles[i].world.scene,
                                                      out.bundles[i].world.graph,
                                                      config.subimage_size);
    });
  }
  return out;
}

GateResult competence_gate(const PolicyParams& params, std::span<const Episode> heldout,
                           const std::map<std::string, EnvContext>& envs, const Vocabulary& vocab,
                           int max_steps) {
  GateResult result;
  result.episodes = static_cast<int>(heldout.size());
  if (heldout.empty()) return result;
  std::vector<double> srs(heldout.size()), ndtws(heldout.size());
  for (size_t i = 0; i < heldout.size(); ++i) {
    const Episode& ep = heldout[i];
    const EnvContext& env = envs.at(ep.env_id);
    const std::vector<int> tokens = vocab.encode(ep.instruction);
    const Trajectory predicted =
        rollout_from_state(params, env, tokens, ep.trajectory.front(),
                           HistoryState::initial(params.dim), max_steps);
    const auto positions = std::span<const Vec3>(env.graph->positions());
    srs[i] = success(predicted, ep.trajectory, positions) ? 1.0 : 0.0;
    ndtws[i] = ndtw(predicted, ep.trajectory, positions);
  }
  for (size_t i = 0; i < heldout.size(); ++i) {
    result.sr += srs[i];
    result.ndtw += ndtws[i];
  }
  result.sr /= static_cast<double>(heldout.size());
  result.ndtw /= static_cast<double>(heldout.size());
  result.pass = result.sr >= kGateSr && result.ndtw >= kGateNdtw;
  return result;
}

// ----------------------------------------------------------------- gen-world

void stage_gen_world(const RunConfig& config) {
  PipelinePaths paths(config.out);
  const std::string hash = config_hash(config);
  for (int e = 0; e < config.environments; ++e) {
    WorldBundle bundle;
    bundle.env_id = env_name(e);
    bundle.seed = mix_seed(config.seed, static_cast<uint64_t>(e));
    bundle.config_hash = hash;
    bundle.world = generate_world(bundle.seed, config.world);
    bundle.episodes =
        generate_episodes(bundle.world.graph, bundle.world.scene, bundle.env_id,
                          config.episodes_per_env, mix_seed(bundle.seed, 0x4550ull));
    save_world_bundle(bundle, paths.world_json(e), paths.world_blob(e));
  }
}

// --------------------------------------------------------------- train-agent

namespace {

std::pair<std::vector<Episode>, std::vector<Episode>> split_episodes(const LoadedWorlds& worlds,
                                                                     double holdout_fraction) {
  std::vector<Episode> train, heldout;
  for (const WorldBundle& bundle : worlds.bundles) {
    for (const Episode& ep : bundle.episodes) {
      (is_heldout(ep, holdout_fraction) ? heldout : train).push_back(ep);
    }
  }
  return {std::move(train), std::move(heldout)};
}

}  // namespace

void stage_train_agent(const RunConfig& config) {
  PipelinePaths paths(config.out);
  LoadedWorlds worlds = load_worlds(config);
  const auto envs = worlds.contexts();
  const Vocabulary& vocab = Vocabulary::standard();
  auto [train_eps, heldout_eps] = split_episodes(worlds, config.holdout_fraction);
  if (train_eps.empty()) throw std::runtime_error("train-agent: no training episodes");

  BCConfig bc;
  bc.epochs = config.agent_epochs;
  bc.lr = config.agent_lr;
  bc.batch_size = config.agent_batch_size;
  bc.seed = config.seed;
  BCResult trained = train_bc(PolicyParams::xavier(config.agent_dim, vocab.size(), config.seed),
                              train_eps, envs, vocab, bc);

  const GateResult gate = competence_gate(trained.params, heldout_eps, envs, vocab,
                                          config.max_steps);

  const std::string hash = config_hash(config);
  save_policy(trained.params, hash, paths.policy());

  json gate_doc;
  gate_doc["format"] = "vhl-gate-v1";
  gate_doc["config_hash"] = hash;
  gate_doc["sr"] = gate.sr;
  gate_doc["ndtw"] = gate.ndtw;
  gate_doc["episodes"] = gate.episodes;
  gate_doc["pass"] = gate.pass;
  gate_doc["train_episodes"] = train_eps.size();
  atomic_write_file(paths.gate(), gate_doc.dump(2) + "\n");

  std::ostringstream log;
  log << "epoch,loss\n";
  for (size_t i = 0; i < trained.epoch_losses.size(); ++i) {
    log.precision(17);
    log << i << "," << trained.epoch_losses[i] << "\n";
  }
  atomic_write_file(paths.train_log(), log.str());
}

// ------------------------------------------------------------- build-attacks

void stage_build_attacks(const RunConfig& config) {
  PipelinePaths paths(config.out);
  LoadedWorlds worlds = load_worlds(config);
  auto [train_eps, heldout_eps] = split_episodes(worlds, config.holdout_fraction);

  // Per-env training pools.
  std::map<std::string, std::vector<Episode>> train_by_env;
  for (const Episode& ep : train_eps) train_by_env[ep.env_id].push_back(ep);

  // Deterministic scatter over heldout episodes so paraphrases interleave.
  std::vector<const Episode*> order;
  for (const Episode& ep : heldout_eps) order.push_back(&ep);
  std::sort(order.begin(), order.end(), [](const Episode* a, const Episode* b) {
    const uint64_t ha = mix_seed(fnv1a64(a->id), 0x736361747465ull);
    const uint64_t hb = mix_seed(fnv1a64(b->id), 0x736361747465ull);
    return ha != hb ? ha < hb : a->id < b->id;
  });

  AttackSet set;
  set.mode = config.attack.mode;
  set.config_hash = config_hash(config);
  for (const Episode* ep : order) {
    if (static_cast<int>(set.instances.size()) >= config.max_instances) break;
    const WorldBundle& bundle = worlds.bundle(ep->env_id);
    BuildOutcome outcome =
        build_attack_instance(*ep, train_by_env[ep->env_id], bundle.world.scene,
                              bundle.world.graph, worlds.cache(ep->env_id), config.attack.mode);
    if (outcome.instance.has_value()) {
      set.instances.push_back(std::move(*outcome.instance));
    } else {
      set.rejections.emplace_back(ep->id, outcome.rejection);
    }
  }
  save_attack_set(set, paths.attacks());
}

// -------------------------------------------------------------------- attack

namespace {

PolicyParams load_gated_policy(const RunConfig& config, const PipelinePaths& paths,
                               std::string* hash_out = nullptr) {
  require_file(paths.policy(), "vhl train-agent");
  require_file(paths.gate(), "vhl train-agent");
  const json gate = json::parse(read_file(paths.gate()));
  if (!gate.value("pass", false)) {
    throw std::runtime_error(
        "attack: the trained policy did not pass the competence gate (sr >= 0.80, ndtw >= 0.75); "
        "attacks against an incompetent agent are meaningless");
  }
  (void)config;
  return load_policy(paths.policy(), hash_out);
}

// The sub-image at v_atk where the attack object is most visible.
int best_view_at(const PanoramaCache& cache, NodeId node, int object_id) {
  const auto& cov = cache.coverage(node, object_id);
  int best = 0;
  for (int v = 1; v < kPanoramaViews; ++v) {
    if (cov[static_cast<size_t>(v)] > cov[static_cast<size_t>(best)]) best = v;
  }
  return best;
}

}  // namespace

void stage_attack(const RunConfig& config) {
  PipelinePaths paths(config.out);
  LoadedWorlds worlds = load_worlds(config);
  PolicyParams params = load_gated_policy(config, paths);
  require_file(paths.attacks(), "vhl build-attacks");
  AttackSet set = load_attack_set(paths.attacks(), worlds.bundles);
  const Vocabulary& vocab = Vocabulary::standard();
  const std::string hash = config_hash(config);

  parallel_for(config.workers, set.instances.size(), [&](size_t i) {
    const AttackInstance& inst = set.instances[i];
    const WorldBundle& bundle = worlds.bundle(inst.env_id);
    const PanoramaCache& cache = worlds.cache(inst.env_id);
    const uint64_t seed = mix_seed(config.seed, fnv1a64(inst.id));

    AttackRunResult run = optimize_attack(inst, bundle.world.scene, bundle.world.graph, params,
                                          cache, vocab, config.attack, seed);

    const auto dir = paths.instance_dir(inst.id);
    save_texture_blob(run.atlas, dir / "atlas.txa");

    json doc;
    doc["format"] = "vhl-checkpoints-v1";
    doc["config_hash"] = hash;
    doc["instance_id"] = inst.id;
    doc["best_iteration"] = run.best_iteration;
    doc["best_score"] = run.best_score;
    doc["initial_loss"] = run.initial_loss;
    doc["final_loss"] = run.final_loss;
    json cps = json::array();
    for (const AttackCheckpoint& cp : run.checkpoints) {
      cps.push_back({{"iteration", cp.iteration}, {"score", cp.score}});
    }
    doc["checkpoints"] = cps;
    atomic_write_file(dir / "checkpoints.json", doc.dump(2) + "\n");

    // Debug views of the object before and after the attack.
    const int view = best_view_at(cache, inst.v_atk, inst.attack_object);
    const Camera cam = panorama_camera(bundle.world.graph.position(inst.v_atk), view,
                                       config.subimage_size);
    write_ppm(render_subimage(bundle.world.scene, cam), (dir / "view_pre.ppm").string());
    Scene attacked = bundle.world.scene;
    attacked.atlas = run.atlas;
    write_ppm(render_subimage(attacked, cam), (dir / "view_post.ppm").string());
  });
}

// ---------------------------------------------------------------------- eval

InstanceEvalConditions evaluate_all_conditions(const PolicyParams& params, const NavGraph& graph,
                                               const PanoramaCache& attacked_cache,
                                               const PanoramaCache& original_cache,
                                               const AttackInstance& instance,
                                               const Vocabulary& vocab, int max_steps) {
  InstanceEvalConditions out;
  const std::vector<Episode> test{instance.test_episode};
  const std::span<const Episode> splits[3] = {instance.train_split, instance.val_split, test};
  for (int s = 0; s < 3; ++s) {
    for (int scene_cond = 0; scene_cond < 2; ++scene_cond) {
      const PanoramaCache& cache = scene_cond == 0 ? attacked_cache : original_cache;
      for (int ref = 0; ref < 2; ++ref) {
        out.reports[s][scene_cond][ref] = evaluate_instance_cached(
            params, graph, cache, instance, splits[s],
            ref == 0 ? EvalReference::kAttack : EvalReference::kOriginal, vocab, max_steps);
      }
    }
  }
  return out;
}

InstanceFactors compute_instance_factors(const AttackInstance& instance, const NavGraph& graph,
                                         const PanoramaCache& cache, const Scene& scene,
                                         int steps_rendered, double pre_ndtw, double post_ndtw) {
  InstanceFactors f;
  f.instance_id = instance.id;
  f.category = scene.find_object(instance.attack_object)->category;
  f.pre_ndtw = pre_ndtw;
  f.post_ndtw = post_ndtw;
  f.cov_vatk_pct = cache.max_coverage(instance.v_atk, instance.attack_object) * 100.0;

  std::vector<NodeId> rendered{instance.v_atk};
  for (size_t i = 1; i < instance.attack_trajectory.size() &&
                     static_cast<int>(rendered.size()) < steps_rendered;
       ++i) {
    rendered.push_back(instance.attack_trajectory[i]);
  }
  double cov_sum = 0.0;
  for (NodeId n : rendered) cov_sum += cache.max_coverage(n, instance.attack_object);
  f.cov_mean_pct = cov_sum / static_cast<double>(rendered.size()) * 100.0;

  f.heading_entropy_nats = heading_entropy(instance, instance.train_split, graph);
  f.object_mentioned = object_mentioned(instance.test_episode.instruction, f.category);
  return f;
}

MetricsReport pool_reports(std::span<const MetricsReport> reports) {
  MetricsReport pooled;
  for (const MetricsReport& r : reports) {
    pooled.rows.insert(pooled.rows.end(), r.rows.begin(), r.rows.end());
  }
  pooled.finalize();
  return pooled;
}

namespace {

const char* kSplitNames[3] = {"train", "validation", "test"};
const char* kSceneNames[2] = {"attacked", "original"};
const char* kRefNames[2] = {"ref_attack", "ref_original"};

}  // namespace

void stage_eval(const RunConfig& config) {
  PipelinePaths paths(config.out);
  const std::string hash = config_hash(config);

  LoadedWorlds worlds = load_worlds(config);
  for (const WorldBundle& bundle : worlds.bundles) {
    check_hash(bundle.config_hash, hash, "world bundle " + bundle.env_id);
  }
  require_file(paths.policy(), "vhl train-agent");
  std::string policy_hash;
  PolicyParams params = load_policy(paths.policy(), &policy_hash);
  check_hash(policy_hash, hash, "policy blob");
  require_file(paths.attacks(), "vhl build-attacks");
  AttackSet set = load_attack_set(paths.attacks(), worlds.bundles);
  check_hash(set.config_hash, hash, "attack set");
  const Vocabulary& vocab = Vocabulary::standard();

  if (set.instances.empty()) throw std::runtime_error("eval: attack set is empty");
  for (const AttackInstance& inst : set.instances) {
    const auto atlas_path = paths.instance_dir(inst.id) / "atlas.txa";
    if (!std::filesystem::exists(atlas_path)) {
      throw MissingArtifactError("no attacked atlas found for instance " + inst.id + " at " +
                                 atlas_path.string() + "; run `vhl attack` first");
    }
    const json cp = json::parse(read_file(paths.instance_dir(inst.id) / "checkpoints.json"));
    check_hash(cp.value("config_hash", ""), hash, "checkpoints for " + inst.id);
  }

  std::vector<InstanceEvalConditions> conditions(set.instances.size());
  std::vector<InstanceFactors> factors(set.instances.size());

  parallel_for(config.workers, set.instances.size(), [&](size_t i) {
    const AttackInstance& inst = set.instances[i];
    const WorldBundle& bundle = worlds.bundle(inst.env_id);

    Scene attacked = bundle.world.scene;
    attacked.atlas = load_texture_blob(paths.instance_dir(inst.id) / "atlas.txa");
    PanoramaCache attacked_cache(attacked, bundle.world.graph, config.subimage_size);

    conditions[i] = evaluate_all_conditions(params, bundle.world.graph, attacked_cache,
                                            worlds.cache(inst.env_id), inst, vocab,
                                            config.max_steps);
    // Factor nDTW is measured against the attack reference on the test
    // episode, pre (original scene) and post (attacked scene).
    const double pre = conditions[i].reports[2][1][0].ndtw_pct / 100.0;
    const double post = conditions[i].reports[2][0][0].ndtw_pct / 100.0;
    factors[i] = compute_instance_factors(inst, bundle.world.graph, worlds.cache(inst.env_id),
                                          bundle.world.scene, config.attack.steps_rendered, pre,
                                          post);

    json doc;
    doc["format"] = "vhl-eval-v1";
    doc["config_hash"] = hash;
    doc["instance_id"] = inst.id;
    json reports;
    for (int s = 0; s < 3; ++s) {
      for (int sc = 0; sc < 2; ++sc) {
        for (int r = 0; r < 2; ++r) {
          const std::string key =
              std::string(kSplitNames[s]) + "." + kSceneNames[sc] + "." + kRefNames[r];
          reports[key] = json::parse(metrics_report_to_json(conditions[i].reports[s][sc][r]));
        }
      }
    }
    doc["reports"] = reports;
    atomic_write_file(paths.eval_dir(inst.id) / "reports.json", doc.dump(2) + "\n");
  });

  // Pooled summary across instances.
  json summary;
  summary["format"] = "vhl-eval-summary-v1";
  summary["config_hash"] = hash;
  summary["mode"] = attack_mode_name(set.mode);
  summary["instances"] = set.instances.size();
  for (int s = 0; s < 3; ++s) {
    for (int sc = 0; sc < 2; ++sc) {
      for (int r = 0; r < 2; ++r) {
        std::vector<MetricsReport> reports;
        for (size_t i = 0; i < conditions.size(); ++i) {
          reports.push_back(conditions[i].reports[s][sc][r]);
        }
        const MetricsReport pooled = pool_reports(reports);
        const std::string key =
            std::string(kSplitNames[s]) + "." + kSceneNames[sc] + "." + kRefNames[r];
        summary["pooled"][key] = {{"sr_pct", pooled.sr_pct},
                                  {"osr_pct", pooled.osr_pct},
                                  {"ndtw_pct", pooled.ndtw_pct},
                                  {"stop_rate_pct", pooled.stop_rate_pct},
                                  {"episodes", pooled.rows.size()}};
      }
    }
  }
  json per_instance = json::array();
  for (size_t i = 0; i < conditions.size(); ++i) {
    json row;
    row["instance_id"] = set.instances[i].id;
    for (int s = 0; s < 3; ++s) {
      for (int sc = 0; sc < 2; ++sc) {
        for (int r = 0; r < 2; ++r) {
          const std::string key =
              std::string(kSplitNames[s]) + "." + kSceneNames[sc] + "." + kRefNames[r];
          const MetricsReport& rep = conditions[i].reports[s][sc][r];
          row[key] = {{"sr_pct", rep.sr_pct},
                      {"osr_pct", rep.osr_pct},
                      {"ndtw_pct", rep.ndtw_pct},
                      {"stop_rate_pct", rep.stop_rate_pct}};
        }
      }
    }
    per_instance.push_back(std::move(row));
  }
  summary["per_instance"] = per_instance;
  atomic_write_file(paths.eval_summary(), summary.dump(2) + "\n");

  export_factors(factors, paths.factors_csv().string());
}

// -------------------------------------------------------------------- report

void stage_report(const RunConfig& config) {
  PipelinePaths paths(config.out);
  require_file(paths.eval_summary(), "vhl eval");
  const json summary = json::parse(read_file(paths.eval_summary()));
  const std::string mode = summary.at("mode").get<std::string>();

  std::ostringstream md;
  md << "# Attack evaluation summary\n\n";
  md << "mode: " << mode << "; instances: " << summary.at("instances").get<size_t>() << "\n\n";

  auto cell = [&](const std::string& split, const std::string& scene, const std::string& ref,
                  const std::string& metric) {
    return summary.at("pooled")
        .at(split + "." + scene + "." + ref)
        .at(metric)
        .get<double>();
  };

  std::ostringstream csv;
  csv << "table,metric,split,attacked,unattacked,delta\n";
  auto block = [&](const std::string& title, const std::string& ref,
                   const std::vector<std::pair<std::string, std::string>>& metrics) {
    md << "## " << title << "\n\n";
    md << "| Metric | Train ✓ | Train ✗ | Train Δ | Validation ✓ | Validation ✗ | Validation Δ "
          "| Test ✓ | Test ✗ | Test Δ |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& [label, metric] : metrics) {
      md << "| " << label << " |";
      for (const char* split : {"train", "validation", "test"}) {
        const double att = cell(split, "attacked", ref, metric);
        const double una = cell(split, "original", ref, metric);
        char buf[96];
        std::snprintf(buf, sizeof(buf), " %.2f | %.2f | %.2f |", att, una, att - una);
        md << buf;
        csv << title << "," << label << "," << split << "," << att << "," << una << ","
            << (att - una) << "\n";
      }
      md << "\n";
    }
    md << "\n";
  };

  if (mode == "stop") {
    block("Single-step stop attack (vs attack reference)", "ref_attack",
          {{"Stop %", "stop_rate_pct"}});
  } else {
    block("Trajectory attack adherence (vs attack trajectory)", "ref_attack",
          {{"SR", "sr_pct"}, {"OSR", "osr_pct"}, {"nDTW", "ndtw_pct"}});
    block("Instruction-following disruption (vs original trajectory)", "ref_original",
          {{"SR", "sr_pct"}, {"nDTW", "ndtw_pct"}});
  }

  // Per-instance rows for plotting.
  std::ostringstream pcsv;
  pcsv << "instance_id,split,scene,reference,sr_pct,osr_pct,ndtw_pct,stop_rate_pct\n";
  for (const json& row : summary.at("per_instance")) {
    for (const char* split : {"train", "validation", "test"}) {
      for (const char* scene : {"attacked", "original"}) {
        for (const char* ref : {"ref_attack", "ref_original"}) {
          const json& r = row.at(std::string(split) + "." + scene + "." + ref);
          pcsv << row.at("instance_id").get<std::string>() << "," << split << "," << scene << ","
               << ref << "," << r.at("sr_pct").get<double>() << ","
               << r.at("osr_pct").get<double>() << "," << r.at("ndtw_pct").get<double>() << ","
               << r.at("stop_rate_pct").get<double>() << "\n";
        }
      }
    }
  }

  atomic_write_file(paths.report_dir() / "summary.md", md.str());
  atomic_write_file(paths.report_dir() / "delta_tables.csv", csv.str());
  atomic_write_file(paths.report_dir() / "per_instance.csv", pcsv.str());
}

// -------------------------------------------------------------------- ablate

std::vector<Episode> limit_instructions(std::span<const Episode> episodes, int count) {
  std::map<std::string, int> seen;
  std::vector<const Episode*> sorted;
  for (const Episode& ep : episodes) sorted.push_back(&ep);
  std::sort(sorted.begin(), sorted.end(),
            [](const Episode* a, const Episode* b) { return a->id < b->id; });
  std::vector<Episode> out;
  for (const Episode* ep : sorted) {
    int& n = seen[trajectory_key(ep->id)];
    if (n < count) {
      out.push_back(*ep);
      ++n;
    }
  }
  return out;
}

namespace {

struct AblationCell {
  std::string variable;
  std::string value;
  AttackConfig attack;
  bool limit_train_instructions = false;
  int instruction_count = kInstructionTemplates;
};

}  // namespace

void stage_ablate(const RunConfig& config) {
  PipelinePaths paths(config.out);
  LoadedWorlds worlds = load_worlds(config);
  PolicyParams params = load_gated_policy(config, paths);
  require_file(paths.attacks(), "vhl build-attacks");
  AttackSet set = load_attack_set(paths.attacks(), worlds.bundles);
  const Vocabulary& vocab = Vocabulary::standard();
  const std::string hash = config_hash(config);

  const size_t subset =
      std::min<size_t>(static_cast<size_t>(config.ablate_instances), set.instances.size());
  if (subset == 0) throw std::runtime_error("ablate: attack set is empty");

  // One variable at a time against the base attack config.
  std::vector<AblationCell> cells;
  for (int v : config.ablate_steps_rendered) {
    AblationCell c{"steps_rendered", std::to_string(v), config.attack, false, 0};
    c.attack.steps_rendered = v;
    cells.push_back(c);
  }
  for (double v : config.ablate_epsilon) {
    std::ostringstream os;
    os << v;
    AblationCell c{"epsilon", os.str(), config.attack, false, 0};
    c.attack.epsilon = v;
    cells.push_back(c);
  }
  for (int v : config.ablate_instructions) {
    AblationCell c{"instructions", std::to_string(v), config.attack, true, v};
    cells.push_back(c);
  }
  for (int v : config.ablate_iterations) {
    AblationCell c{"iterations", std::to_string(v), config.attack, false, 0};
    c.attack.iterations = v;
    cells.push_back(c);
  }

  struct CellResult {
    MetricsReport train, val, test;
  };
  std::vector<std::vector<CellResult>> results(cells.size());
  for (auto& r : results) r.resize(subset);

  // Flatten (cell, instance) pairs for the worker pool.
  std::vector<std::pair<size_t, size_t>> jobs;
  for (size_t c = 0; c < cells.size(); ++c) {
    for (size_t i = 0; i < subset; ++i) jobs.emplace_back(c, i);
  }

  parallel_for(config.workers, jobs.size(), [&](size_t j) {
    const auto [c, i] = jobs[j];
    const AblationCell& cell = cells[c];
    AttackInstance inst = set.instances[i];
    if (cell.limit_train_instructions) {
      inst.train_split = limit_instructions(inst.train_split, cell.instruction_count);
    }
    const WorldBundle& bundle = worlds.bundle(inst.env_id);
    const uint64_t seed = mix_seed(config.seed, fnv1a64(inst.id));
    AttackRunResult run = optimize_attack(inst, bundle.world.scene, bundle.world.graph, params,
                                          worlds.cache(inst.env_id), vocab, cell.attack, seed);
    Scene attacked = bundle.world.scene;
    attacked.atlas = run.atlas;
    PanoramaCache attacked_cache(attacked, bundle.world.graph, config.subimage_size);
    const std::vector<Episode> test{inst.test_episode};
    results[c][i].train =
        evaluate_instance_cached(params, bundle.world.graph, attacked_cache, inst,
                                 inst.train_split, EvalReference::kAttack, vocab, config.max_steps);
    results[c][i].val =
        evaluate_instance_cached(params, bundle.world.graph, attacked_cache, inst, inst.val_split,
                                 EvalReference::kAttack, vocab, config.max_steps);
    results[c][i].test =
        evaluate_instance_cached(params, bundle.world.graph, attacked_cache, inst, test,
                                 EvalReference::kAttack, vocab, config.max_steps);
  });

  std::ostringstream csv;
  csv << "variable,value,split,sr_pct,osr_pct,ndtw_pct,stop_rate_pct,episodes\n";
  json doc;
  doc["format"] = "vhl-ablate-v1";
  doc["config_hash"] = hash;
  doc["instances"] = subset;
  json cells_json = json::array();
  for (size_t c = 0; c < cells.size(); ++c) {
    const char* split_names[3] = {"train", "validation", "test"};
    std::vector<MetricsReport> split_reports[3];
    for (size_t i = 0; i < subset; ++i) {
      split_reports[0].push_back(results[c][i].train);
      split_reports[1].push_back(results[c][i].val);
      split_reports[2].push_back(results[c][i].test);
    }
    json cell_json;
    cell_json["variable"] = cells[c].variable;
    cell_json["value"] = cells[c].value;
    for (int s = 0; s < 3; ++s) {
      const MetricsReport pooled = pool_reports(split_reports[s]);
      cell_json[split_names[s]] = {{"sr_pct", pooled.sr_pct},
                                   {"osr_pct", pooled.osr_pct},
                                   {"ndtw_pct", pooled.ndtw_pct},
                                   {"stop_rate_pct", pooled.stop_rate_pct}};
      csv << cells[c].variable << "," << cells[c].value << "," << split_names[s] << ","
          << pooled.sr_pct << "," << pooled.osr_pct << "," << pooled.ndtw_pct << ","
          << pooled.stop_rate_pct << "," << pooled.rows.size() << "\n";
    }
    cells_json.push_back(std::move(cell_json));
  }
  doc["cells"] = cells_json;
  atomic_write_file(paths.ablate_dir() / "summary.json", doc.dump(2) + "\n");
  atomic_write_file(paths.ablate_dir() / "summary.csv", csv.str());
}

// ------------------------------------------------------------------ dispatch

int run_command(const std::string& command, const RunConfig& config) {
  try {
    if (command == "gen-world") {
      stage_gen_world(config);
    } else if (command == "train-agent") {
      stage_train_agent(config);
    } else if (command == "build-attacks") {
      stage_build_attacks(config);
    } else if (command == "attack") {
      stage_attack(config);
    } else if (command == "eval") {
      stage_eval(config);
    } else if (command == "ablate") {
      stage_ablate(config);
    } else if (command == "report") {
      stage_report(config);
    } else {
      std::cerr << "unknown command: " << command << "\n";
      return 1;
    }
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace vhl
