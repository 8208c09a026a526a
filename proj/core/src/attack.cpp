#include "vhl/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vhl/metrics.hpp"
#include "vhl/rng.hpp"

namespace vhl {

const std::string& attack_mode_name(AttackMode m) {
  static const std::vector<std::string> kNames = {"stop", "trajectory"};
  return kNames[static_cast<size_t>(m)];
}

AttackMode attack_mode_from_name(const std::string& name) {
  if (name == "stop") return AttackMode::kStop;
  if (name == "trajectory") return AttackMode::kTrajectory;
  throw std::invalid_argument("unknown attack mode: " + name);
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("attack config: epsilon out of range (0,1]");
  }
  if (lr <= 0.0) throw std::invalid_argument("attack config: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("attack config: beta1 out of range");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("attack config: beta2 out of range");
  if (iterations < 1) throw std::invalid_argument("attack config: iterations must be positive");
  if (checkpoint_every < 1 || iterations % checkpoint_every != 0) {
    throw std::invalid_argument("attack config: iterations must be a multiple of checkpoint_every");
  }
  if (batch_size < 1) throw std::invalid_argument("attack config: batch_size must be positive");
  if (steps_rendered < 1 || steps_rendered > 3) {
    throw std::invalid_argument("attack config: steps_rendered must be 1, 2 or 3");
  }
}

int first_index_of(const Trajectory& traj, NodeId node) {
  for (size_t i = 0; i < traj.size(); ++i) {
    if (traj[i] == node) return static_cast<int>(i);
  }
  return -1;
}

std::map<NodeId, std::vector<CandidateObject>> candidate_objects_cached(
    const Scene& scene, const NavGraph& graph, const PanoramaCache& cache) {
  std::map<NodeId, std::vector<CandidateObject>> out;
  for (NodeId n = 0; n < graph.node_count(); ++n) {
    std::vector<CandidateObject> list;
    for (const SceneObject& obj : scene.objects) {
      const double cov = cache.max_coverage(n, obj.id);
      if (cov >= kCandidateCoverage) list.push_back({obj.id, cov});
    }
    out[n] = std::move(list);
  }
  return out;
}

std::map<NodeId, std::vector<CandidateObject>> candidate_objects(const Scene& scene,
                                                                 const NavGraph& graph,
                                                                 int resolution) {
  PanoramaCache cache(scene, graph, resolution);
  return candidate_objects_cached(scene, graph, cache);
}

namespace {

// Guide prefix of an episode through `node`, inclusive of the node itself.
std::vector<NodeId> guide_prefix(const Episode& ep, int at) {
  return {ep.trajectory.begin(), ep.trajectory.begin() + at + 1};
}

}  // namespace

BuildOutcome build_attack_instance(const Episode& test_episode,
                                   std::span<const Episode> train_episodes, const Scene& scene,
                                   const NavGraph& graph, const PanoramaCache& cache,
                                   AttackMode mode) {
  const Trajectory& traj = test_episode.trajectory;
  const auto candidates = candidate_objects_cached(scene, graph, cache);

  struct Qualifying {
    NodeId node;
    int object_id;
    double coverage;
    std::vector<const Episode*> support;
  };
  std::vector<Qualifying> qualifying;

  for (size_t vi = 0; vi < traj.size(); ++vi) {
    const NodeId v = traj[vi];
    if (mode == AttackMode::kStop && vi + 1 == traj.size()) continue;  // already terminates here
    const auto it = candidates.find(v);
    if (it == candidates.end() || it->second.empty()) continue;

    const auto test_prefix = guide_prefix(test_episode, static_cast<int>(vi));
    std::vector<const Episode*> support;
    for (const Episode& ep : train_episodes) {
      const int at = first_index_of(ep.trajectory, v);
      if (at < 0) continue;
      if (mode == AttackMode::kStop && at + 1 == static_cast<int>(ep.trajectory.size())) continue;
      if (guide_prefix(ep, at) == test_prefix) continue;  // identical observation history
      support.push_back(&ep);
    }
    if (static_cast<int>(support.size()) < kMinSupportEpisodes) continue;

    // Best object at this viewpoint: largest coverage, then smaller id.
    CandidateObject best = it->second.front();
    for (const CandidateObject& c : it->second) {
      if (c.max_coverage > best.max_coverage ||
          (c.max_coverage == best.max_coverage && c.object_id < best.object_id)) {
        best = c;
      }
    }
    qualifying.push_back({v, best.object_id, best.max_coverage, std::move(support)});
  }

  if (qualifying.empty()) return {std::nullopt, "no_candidate"};

  const Qualifying* chosen = &qualifying.front();
  for (const Qualifying& q : qualifying) {
    if (q.coverage > chosen->coverage ||
        (q.coverage == chosen->coverage &&
         (q.object_id < chosen->object_id ||
          (q.object_id == chosen->object_id && q.node < chosen->node)))) {
      chosen = &q;
    }
  }

  AttackInstance instance;
  instance.id = test_episode.id;
  instance.env_id = test_episode.env_id;
  instance.test_episode = test_episode;
  instance.attack_object = chosen->object_id;
  instance.v_atk = chosen->node;
  instance.mode = mode;

  if (mode == AttackMode::kTrajectory) {
    // Divert toward a goal far from the instructed one, preferring a
    // multi-step attack trajectory of about kPreferredAttackEdges edges.
    constexpr int kPreferredAttackEdges = 3;
    const Vec3& goal_pos = graph.position(traj.back());
    NodeId best_goal = -1;
    int best_rank = 0;
    for (NodeId n = 0; n < graph.node_count(); ++n) {
      if (n == instance.v_atk) continue;
      if (distance(graph.position(n), goal_pos) < kAttackGoalMinDist) continue;
      const Trajectory p = shortest_path(graph, instance.v_atk, n);
      const int edges = static_cast<int>(p.size()) - 1;
      const int rank = std::abs(edges - kPreferredAttackEdges) * 2 + (edges > kPreferredAttackEdges);
      if (best_goal < 0 || rank < best_rank) {
        best_goal = n;
        best_rank = rank;
      }
    }
    if (best_goal < 0) return {std::nullopt, "no_far_goal"};
    instance.attack_trajectory = shortest_path(graph, instance.v_atk, best_goal);
  }

  // Deterministic 80/20 split by ascending episode-id hash.
  std::vector<const Episode*> support = chosen->support;
  std::sort(support.begin(), support.end(), [](const Episode* a, const Episode* b) {
    const uint64_t ha = mix_seed(fnv1a64(a->id), 0x73706c6974ull);
    const uint64_t hb = mix_seed(fnv1a64(b->id), 0x73706c6974ull);
    return ha != hb ? ha < hb : a->id < b->id;
  });
  const size_t train_count = std::max<size_t>(1, support.size() * 4 / 5);
  for (size_t i = 0; i < support.size(); ++i) {
    if (i < train_count) {
      instance.train_split.push_back(*support[i]);
    } else {
      instance.val_split.push_back(*support[i]);
    }
  }
  return {std::move(instance), ""};
}

// ------------------------------------------------------- AttackLossComputer

AttackLossComputer::AttackLossComputer(const Scene& original_scene, const NavGraph& graph,
                                       const PolicyParams& params, const AttackInstance& instance,
                                       const PanoramaCache& cache, const Vocabulary& vocab,
                                       int steps_rendered)
    : graph_(graph), params_(params), instance_(instance), cache_(cache), vocab_(vocab) {
  mask_ = face_mask_for_object(original_scene, instance.attack_object);

  // v_atk plus the next steps_rendered-1 attack-trajectory nodes.
  rendered_nodes_.push_back(instance.v_atk);
  for (size_t i = 1; i < instance.attack_trajectory.size() &&
                     static_cast<int>(rendered_nodes_.size()) < steps_rendered;
       ++i) {
    rendered_nodes_.push_back(instance.attack_trajectory[i]);
  }

  live_.resize(rendered_nodes_.size());
  SubImage scratch;
  for (size_t s = 0; s < rendered_nodes_.size(); ++s) {
    const NodeId node = rendered_nodes_[s];
    for (int view : cache.views_containing(node, instance.attack_object)) {
      LiveView lv;
      lv.node = node;
      lv.view_index = view;
      render_subimage(original_scene,
                      panorama_camera(graph.position(node), view, cache.resolution()), scratch,
                      lv.buffers);
      live_[s].push_back(std::move(lv));
    }
  }
}

AttackLossResult AttackLossComputer::compute(const TextureAtlas& atlas,
                                             std::span<const Episode> batch) const {
  if (batch.empty()) throw std::invalid_argument("attack_loss: empty batch");

  AttackLossResult result;
  result.gradient = TexelGradient(atlas.width, atlas.height);

  // Full attack node sequence (v_atk alone in stop mode).
  Trajectory seq = instance_.attack_trajectory;
  if (seq.empty()) seq = {instance_.v_atk};

  SubImage shaded;
  for (const Episode& ep : batch) {
    const int at = first_index_of(ep.trajectory, instance_.v_atk);
    if (at < 0) {
      throw std::invalid_argument("attack_loss: batch episode does not pass the attack viewpoint");
    }

    ad::Tape tape;
    PolicyVars pv = make_policy_vars(tape, params_, false);
    const std::vector<int> tokens = vocab_.encode(ep.instruction);
    ad::Var instr = encode_instruction_t(tape, pv, tokens);
    ad::Var history = tape.constant(ad::Mat::Zero(params_.dim, 1));
    double orientation = 0.0;

    // Guide prefix on cached unattacked observations.
    for (int i = 0; i < at; ++i) {
      const NodeId node = ep.trajectory[static_cast<size_t>(i)];
      const auto cands = candidate_views(graph_, node, orientation);
      std::vector<ad::Var> views48;
      views48.reserve(kPanoramaViews);
      for (const auto& feat : cache_.features(node)) views48.push_back(tape.constant(feat));
      ObsFeaturesT obs = featurize_views_t(tape, pv, views48, cands);
      StepOutputT step = policy_step_t(tape, pv, instr, history, obs);
      history = step.new_history;
      orientation = heading_of(graph_.position(node),
                               graph_.position(ep.trajectory[static_cast<size_t>(i) + 1]));
    }

    // Attack steps; the first steps_rendered nodes carry live views.
    std::vector<std::pair<ad::Var, const RasterBuffers*>> pixel_leaves;
    std::vector<ad::Var> step_losses;
    for (size_t s = 0; s < seq.size(); ++s) {
      const NodeId node = seq[s];
      const auto cands = candidate_views(graph_, node, orientation);

      std::vector<ad::Var> views48;
      views48.reserve(kPanoramaViews);
      const std::vector<LiveView>* live = s < live_.size() ? &live_[s] : nullptr;
      for (int v = 0; v < kPanoramaViews; ++v) {
        const LiveView* lv = nullptr;
        if (live != nullptr) {
          for (const LiveView& candidate_view : *live) {
            if (candidate_view.view_index == v) {
              lv = &candidate_view;
              break;
            }
          }
        }
        if (lv == nullptr) {
          views48.push_back(tape.constant(cache_.features(node)[static_cast<size_t>(v)]));
        } else {
          shade_from_buffers(lv->buffers, atlas, shaded);
          ad::Mat px(static_cast<long>(shaded.pixels.size()), 1);
          std::copy(shaded.pixels.begin(), shaded.pixels.end(), px.data());
          ad::Var pixels = tape.leaf(std::move(px), true);
          pixel_leaves.emplace_back(pixels, &lv->buffers);
          views48.push_back(
              tape.patch_means(pixels, shaded.width, shaded.height, kPatchGrid));
        }
      }

      ObsFeaturesT obs = featurize_views_t(tape, pv, views48, cands);
      StepOutputT step = policy_step_t(tape, pv, instr, history, obs);
      history = step.new_history;

      int target = static_cast<int>(cands.size());  // STOP
      if (s + 1 < seq.size()) {
        target = -1;
        for (size_t c = 0; c < cands.size(); ++c) {
          if (cands[c].node == seq[s + 1]) target = static_cast<int>(c);
        }
        if (target < 0) throw std::invalid_argument("attack_loss: attack trajectory not adjacent");
        orientation = cands[static_cast<size_t>(target)].heading_abs;
      }
      step_losses.push_back(tape.cross_entropy(step.logits, target));
    }

    ad::Var episode_loss = tape.add_all(step_losses);
    tape.backward(episode_loss);
    result.loss += tape.value(episode_loss)(0, 0);

    for (const auto& [pixels, buffers] : pixel_leaves) {
      const ad::Mat& g = tape.grad(pixels);
      std::vector<double> pixel_grads(g.data(), g.data() + g.size());
      backprop_to_texture_into(*buffers, pixel_grads, mask_, result.gradient);
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  result.loss *= inv;
  for (double& v : result.gradient.values) v *= inv;
  return result;
}

AttackLossResult attack_loss(const PolicyParams& params, const Scene& scene,
                             const NavGraph& graph, const AttackInstance& instance,
                             std::span<const Episode> batch, int steps_rendered) {
  PanoramaCache cache(scene, graph, 32);
  AttackLossComputer computer(scene, graph, params, instance, cache, Vocabulary::standard(),
                              steps_rendered);
  return computer.compute(scene.atlas, batch);
}

// --------------------------------------------------------- projected ADAM

void adam_project_step(TextureAtlas& atlas, const TextureAtlas& original,
                       const TexelGradient& grad, AtlasOptState& state,
                       const AttackConfig& config) {
  const size_t n = atlas.texels.size();
  if (original.texels.size() != n || grad.values.size() != n || state.m.size() != n) {
    throw std::invalid_argument("adam_project_step: shape mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  constexpr double kAdamEps = 1e-8;
  for (size_t i = 0; i < n; ++i) {
    if (!state.mask[i / 3]) continue;
    const double g = grad.values[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    double x = atlas.texels[i] - config.lr * mhat / (std::sqrt(vhat) + kAdamEps);
    const double lo = original.texels[i] - config.epsilon;
    const double hi = original.texels[i] + config.epsilon;
    x = std::clamp(x, lo, hi);
    atlas.texels[i] = std::clamp(x, 0.0, 1.0);
  }
}

// ------------------------------------------------------------ optimization

AttackRunResult optimize_attack(const AttackInstance& instance, const Scene& scene,
                                const NavGraph& graph, const PolicyParams& params,
                                const PanoramaCache& cache, const Vocabulary& vocab,
                                const AttackConfig& config, uint64_t seed,
                                const CheckpointHook& hook) {
  config.validate();
  if (instance.val_split.empty()) {
    throw std::invalid_argument("optimize_attack: validation split is empty");
  }
  if (instance.train_split.empty()) {
    throw std::invalid_argument("optimize_attack: train split is empty");
  }

  AttackLossComputer computer(scene, graph, params, instance, cache, vocab,
                              config.steps_rendered);

  // Views affected by the attack texture anywhere in the environment; their
  // buffers are rasterized once so checkpoint scoring can re-shade cheaply.
  struct AffectedView {
    NodeId node;
    int view;
    RasterBuffers buffers;
  };
  std::vector<AffectedView> affected;
  {
    SubImage scratch;
    for (NodeId n = 0; n < graph.node_count(); ++n) {
      for (int v : cache.views_containing(n, instance.attack_object)) {
        AffectedView av;
        av.node = n;
        av.view = v;
        render_subimage(scene, panorama_camera(graph.position(n), v, cache.resolution()), scratch,
                        av.buffers);
        affected.push_back(std::move(av));
      }
    }
  }

  auto score_atlas = [&](const TextureAtlas& atlas) {
    PanoramaCache patched = cache;
    SubImage shaded;
    for (const AffectedView& av : affected) {
      shade_from_buffers(av.buffers, atlas, shaded);
      patched.set_features(av.node, av.view, patch_features(shaded));
    }
    MetricsReport report =
        evaluate_instance_cached(params, graph, patched, instance, instance.val_split,
                                 EvalReference::kAttack, vocab);
    return (instance.mode == AttackMode::kStop ? report.stop_rate_pct : report.ndtw_pct) / 100.0;
  };

  AttackRunResult run;
  TextureAtlas atlas = scene.atlas;  // working copy
  const TextureAtlas& original = scene.atlas;
  AtlasOptState state(atlas.texels.size(), masked_texels(scene, computer.mask()));

  Rng rng(mix_seed(seed, fnv1a64(instance.id)));
  TextureAtlas best_atlas = atlas;
  double best_score = -1.0;
  int best_iteration = 0;

  std::vector<Episode> batch(static_cast<size_t>(config.batch_size));
  for (int iter = 0; iter < config.iterations; ++iter) {
    for (int b = 0; b < config.batch_size; ++b) {
      const size_t pick = static_cast<size_t>(rng.uniform_index(instance.train_split.size()));
      batch[static_cast<size_t>(b)] = instance.train_split[pick];
    }
    AttackLossResult step = computer.compute(atlas, batch);
    if (iter == 0) run.initial_loss = step.loss;
    run.final_loss = step.loss;
    adam_project_step(atlas, original, step.gradient, state, config);

    if ((iter + 1) % config.checkpoint_every == 0) {
      AttackCheckpoint cp;
      cp.iteration = iter + 1;
      cp.score = score_atlas(atlas);
      run.checkpoints.push_back(cp);
      if (cp.score > best_score) {
        best_score = cp.score;
        best_iteration = cp.iteration;
        best_atlas = atlas;
      }
      if (hook) hook(cp, atlas);
    }
  }

  run.atlas = std::move(best_atlas);
  run.best_iteration = best_iteration;
  run.best_score = best_score;
  return run;
}

}  // namespace vhl
