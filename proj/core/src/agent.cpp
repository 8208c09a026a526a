#include "vhl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vhl/adam.hpp"
#include "vhl/obs_cache.hpp"
#include "vhl/rng.hpp"

namespace vhl {

// ---------------------------------------------------------------- Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2) throw std::invalid_argument("Vocabulary: PAD and UNK required");
  for (size_t i = 0; i < tokens_.size(); ++i) {
    index_[tokens_[i]] = static_cast<int>(i);
  }
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab(instruction_vocabulary());
  return vocab;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

// -------------------------------------------------------------- PolicyParams

PolicyParams PolicyParams::zeros(int dim, int vocab_size) {
  PolicyParams p;
  p.dim = dim;
  p.vocab_size = vocab_size;
  p.embedding = ad::Mat::Zero(vocab_size, dim);
  p.instr_wz = ad::Mat::Zero(dim, dim);
  p.instr_uz = ad::Mat::Zero(dim, dim);
  p.instr_wh = ad::Mat::Zero(dim, dim);
  p.instr_uh = ad::Mat::Zero(dim, dim);
  p.instr_bz = ad::Mat::Zero(dim, 1);
  p.instr_bh = ad::Mat::Zero(dim, 1);
  p.hist_wz = ad::Mat::Zero(dim, dim);
  p.hist_uz = ad::Mat::Zero(dim, dim);
  p.hist_wh = ad::Mat::Zero(dim, dim);
  p.hist_uh = ad::Mat::Zero(dim, dim);
  p.hist_bz = ad::Mat::Zero(dim, 1);
  p.hist_bh = ad::Mat::Zero(dim, 1);
  p.obs_proj = ad::Mat::Zero(dim, kPatchFeatureDim);
  p.dir_proj = ad::Mat::Zero(dim, kDirEncodingDim);
  p.fuse_w1 = ad::Mat::Zero(dim, 3 * dim);
  p.fuse_b1 = ad::Mat::Zero(dim, 1);
  p.fuse_w2 = ad::Mat::Zero(dim, dim);
  p.fuse_b2 = ad::Mat::Zero(dim, 1);
  p.stop_embedding = ad::Mat::Zero(dim, 1);
  return p;
}

namespace {

void fill_xavier(ad::Mat& m, Rng& rng) {
  const double fan_in = static_cast<double>(m.cols());
  const double fan_out = static_cast<double>(m.rows());
  const double s = std::sqrt(6.0 / (fan_in + fan_out));
  for (long c = 0; c < m.cols(); ++c) {
    for (long r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-s, s);
  }
}

}  // namespace

PolicyParams PolicyParams::xavier(int dim, int vocab_size, uint64_t seed) {
  PolicyParams p = zeros(dim, vocab_size);
  Rng rng(mix_seed(seed, 0x706f6c696379ull));
  for (auto& [name, mat] : p.entries()) {
    if (mat->cols() == 1 && name != "stop_embedding") continue;  // biases stay zero
    fill_xavier(*mat, rng);
  }
  return p;
}

std::vector<std::pair<std::string, ad::Mat*>> PolicyParams::entries() {
  return {
      {"embedding", &embedding}, {"instr_wz", &instr_wz}, {"instr_uz", &instr_uz},
      {"instr_bz", &instr_bz},   {"instr_wh", &instr_wh}, {"instr_uh", &instr_uh},
      {"instr_bh", &instr_bh},   {"hist_wz", &hist_wz},   {"hist_uz", &hist_uz},
      {"hist_bz", &hist_bz},     {"hist_wh", &hist_wh},   {"hist_uh", &hist_uh},
      {"hist_bh", &hist_bh},     {"obs_proj", &obs_proj}, {"dir_proj", &dir_proj},
      {"fuse_w1", &fuse_w1},     {"fuse_b1", &fuse_b1},   {"fuse_w2", &fuse_w2},
      {"fuse_b2", &fuse_b2},     {"stop_embedding", &stop_embedding},
  };
}

std::vector<std::pair<std::string, const ad::Mat*>> PolicyParams::entries() const {
  std::vector<std::pair<std::string, const ad::Mat*>> out;
  for (auto& [name, mat] : const_cast<PolicyParams*>(this)->entries()) out.emplace_back(name, mat);
  return out;
}

size_t PolicyParams::parameter_count() const {
  size_t n = 0;
  for (const auto& [name, mat] : entries()) n += static_cast<size_t>(mat->size());
  return n;
}

std::vector<double> PolicyParams::to_flat() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& [name, mat] : entries()) {
    flat.insert(flat.end(), mat->data(), mat->data() + mat->size());
  }
  return flat;
}

void PolicyParams::from_flat(std::span<const double> flat) {
  size_t at = 0;
  for (auto& [name, mat] : entries()) {
    if (at + static_cast<size_t>(mat->size()) > flat.size()) {
      throw std::invalid_argument("PolicyParams::from_flat: buffer too small");
    }
    std::copy(flat.begin() + static_cast<long>(at),
              flat.begin() + static_cast<long>(at) + mat->size(), mat->data());
    at += static_cast<size_t>(mat->size());
  }
  if (at != flat.size()) throw std::invalid_argument("PolicyParams::from_flat: size mismatch");
}

HistoryState HistoryState::initial(int dim) {
  HistoryState s;
  s.h = Eigen::VectorXd::Zero(dim);
  s.orientation = 0.0;
  return s;
}

// ------------------------------------------------------------- tape building

PolicyVars make_policy_vars(ad::Tape& tape, const PolicyParams& params, bool requires_grad) {
  PolicyVars pv;
  pv.dim = params.dim;
  pv.embedding = tape.leaf(params.embedding, requires_grad);
  pv.instr_wz = tape.leaf(params.instr_wz, requires_grad);
  pv.instr_uz = tape.leaf(params.instr_uz, requires_grad);
  pv.instr_wh = tape.leaf(params.instr_wh, requires_grad);
  pv.instr_uh = tape.leaf(params.instr_uh, requires_grad);
  pv.instr_bz = tape.leaf(params.instr_bz, requires_grad);
  pv.instr_bh = tape.leaf(params.instr_bh, requires_grad);
  pv.hist_wz = tape.leaf(params.hist_wz, requires_grad);
  pv.hist_uz = tape.leaf(params.hist_uz, requires_grad);
  pv.hist_wh = tape.leaf(params.hist_wh, requires_grad);
  pv.hist_uh = tape.leaf(params.hist_uh, requires_grad);
  pv.hist_bz = tape.leaf(params.hist_bz, requires_grad);
  pv.hist_bh = tape.leaf(params.hist_bh, requires_grad);
  pv.obs_proj = tape.leaf(params.obs_proj, requires_grad);
  pv.dir_proj = tape.leaf(params.dir_proj, requires_grad);
  pv.fuse_w1 = tape.leaf(params.fuse_w1, requires_grad);
  pv.fuse_b1 = tape.leaf(params.fuse_b1, requires_grad);
  pv.fuse_w2 = tape.leaf(params.fuse_w2, requires_grad);
  pv.fuse_b2 = tape.leaf(params.fuse_b2, requires_grad);
  pv.stop_embedding = tape.leaf(params.stop_embedding, requires_grad);
  return pv;
}

namespace {

// Minimal gated cell: h' = (1-z) * h + z * tanh(Wh x + Uh h + bh),
// z = sigmoid(Wz x + Uz h + bz).
ad::Var gated_cell(ad::Tape& t, ad::Var wz, ad::Var uz, ad::Var bz, ad::Var wh, ad::Var uh,
                   ad::Var bh, ad::Var x, ad::Var h) {
  ad::Var z = t.sigmoid(t.add(t.add(t.matvec(wz, x), t.matvec(uz, h)), bz));
  ad::Var cand = t.tanh(t.add(t.add(t.matvec(wh, x), t.matvec(uh, h)), bh));
  ad::Var ones = t.constant(ad::Mat::Ones(t.value(z).rows(), 1));
  return t.add(t.cmul(t.sub(ones, z), h), t.cmul(z, cand));
}

ad::Var direction_encoding(ad::Tape& t, const CandidateView& c) {
  ad::Mat enc(kDirEncodingDim, 1);
  enc(0, 0) = std::sin(c.heading_rel);
  enc(1, 0) = std::cos(c.heading_rel);
  enc(2, 0) = std::sin(c.elevation);
  enc(3, 0) = std::cos(c.elevation);
  return t.constant(std::move(enc));
}

}  // namespace

ad::Var encode_instruction_t(ad::Tape& tape, const PolicyVars& pv, std::span<const int> tokens) {
  if (tokens.empty()) throw std::invalid_argument("encode_instruction: empty token list");
  const long vocab = tape.value(pv.embedding).rows();
  ad::Var h = tape.constant(ad::Mat::Zero(pv.dim, 1));
  std::vector<ad::Var> states;
  states.reserve(tokens.size());
  for (int id : tokens) {
    if (id < 0 || id >= vocab) throw std::invalid_argument("encode_instruction: token id out of range");
    ad::Var x = tape.row_as_col(pv.embedding, id);
    h = gated_cell(tape, pv.instr_wz, pv.instr_uz, pv.instr_bz, pv.instr_wh, pv.instr_uh,
                   pv.instr_bh, x, h);
    states.push_back(h);
  }
  return tape.mean_of(states);
}

ObsFeaturesT featurize_views_t(ad::Tape& tape, const PolicyVars& pv,
                               std::span<const ad::Var> views48,
                               std::span<const CandidateView> candidates) {
  if (views48.size() != kPanoramaViews) {
    throw std::invalid_argument("featurize: panorama must have 36 sub-images");
  }
  std::vector<ad::Var> projected;
  projected.reserve(kPanoramaViews);
  for (const ad::Var& v : views48) projected.push_back(tape.matvec(pv.obs_proj, v));

  ObsFeaturesT out;
  out.pooled = tape.mean_of(projected);
  out.candidate_feats.reserve(candidates.size());
  for (const CandidateView& c : candidates) {
    const int view = panorama_view_index(c.heading_abs, c.elevation);
    ad::Var feat = tape.add(projected[static_cast<size_t>(view)],
                            tape.matvec(pv.dir_proj, direction_encoding(tape, c)));
    out.candidate_feats.push_back(feat);
  }
  return out;
}

StepOutputT policy_step_t(ad::Tape& tape, const PolicyVars& pv, ad::Var instr_enc,
                          ad::Var history, const ObsFeaturesT& obs) {
  if (obs.candidate_feats.empty()) {
    throw std::invalid_argument("policy_step: at least one candidate required");
  }
  ad::Var cat = tape.concat({instr_enc, history, obs.pooled});
  ad::Var hidden = tape.tanh(tape.add(tape.matvec(pv.fuse_w1, cat), pv.fuse_b1));
  ad::Var fused = tape.tanh(tape.add(tape.matvec(pv.fuse_w2, hidden), pv.fuse_b2));

  std::vector<ad::Var> logit_list;
  logit_list.reserve(obs.candidate_feats.size() + 1);
  for (const ad::Var& feat : obs.candidate_feats) logit_list.push_back(tape.dot(fused, feat));
  logit_list.push_back(tape.dot(fused, pv.stop_embedding));

  StepOutputT out;
  out.logits = tape.stack_scalars(logit_list);
  out.new_history = gated_cell(tape, pv.hist_wz, pv.hist_uz, pv.hist_bz, pv.hist_wh, pv.hist_uh,
                               pv.hist_bh, obs.pooled, history);
  return out;
}

// ------------------------------------------------------- spec-level wrappers

Eigen::VectorXd encode_instruction(std::span<const int> tokens, const PolicyParams& params) {
  ad::Tape tape;
  PolicyVars pv = make_policy_vars(tape, params, false);
  ad::Var enc = encode_instruction_t(tape, pv, tokens);
  return tape.value(enc).col(0);
}

Eigen::VectorXd patch_features(const SubImage& image) {
  if (image.width % kPatchGrid != 0 || image.height % kPatchGrid != 0) {
    throw std::invalid_argument("patch_features: resolution not divisible by patch grid");
  }
  const int pw = image.width / kPatchGrid;
  const int ph = image.height / kPatchGrid;
  const double inv_count = 1.0 / (pw * ph);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(kPatchFeatureDim);
  // Iteration order matches Tape::patch_means so cached and live features
  // agree bit for bit.
  for (int y = 0; y < image.height; ++y) {
    const int gy = y / ph;
    for (int x = 0; x < image.width; ++x) {
      const int gx = x / pw;
      const long base_out = (static_cast<long>(gy) * kPatchGrid + gx) * 3;
      const size_t base_in = (static_cast<size_t>(y) * image.width + x) * 3;
      for (int c = 0; c < 3; ++c) {
        out(base_out + c) += image.pixels[base_in + c] * inv_count;
      }
    }
  }
  return out;
}

std::vector<CandidateView> candidate_views(const NavGraph& graph, NodeId node,
                                           double orientation) {
  std::vector<CandidateView> out;
  for (NodeId nb : graph.neighbors(node)) {
    CandidateView c;
    c.node = nb;
    c.heading_abs = heading_of(graph.position(node), graph.position(nb));
    c.heading_rel = wrap_angle(c.heading_abs - orientation);
    c.elevation = elevation_of(graph.position(node), graph.position(nb));
    out.push_back(c);
  }
  return out;
}

ObsFeatures featurize_observation(const Panorama& panorama,
                                  std::span<const CandidateView> candidates,
                                  const PolicyParams& params) {
  if (panorama.views.size() != kPanoramaViews) {
    throw std::invalid_argument("featurize_observation: panorama must have 36 sub-images");
  }
  ad::Tape tape;
  PolicyVars pv = make_policy_vars(tape, params, false);
  std::vector<ad::Var> views48;
  views48.reserve(kPanoramaViews);
  for (const SubImage& img : panorama.views) {
    views48.push_back(tape.constant(patch_features(img)));
  }
  ObsFeaturesT feats = featurize_views_t(tape, pv, views48, candidates);
  ObsFeatures out;
  out.pooled = tape.value(feats.pooled).col(0);
  for (const ad::Var& v : feats.candidate_feats) out.candidate_feats.push_back(tape.value(v).col(0));
  return out;
}

int ActionDistribution::argmax() const {
  int best = 0;
  for (int i = 1; i < action_count(); ++i) {
    if (probs[static_cast<size_t>(i)] > probs[static_cast<size_t>(best)]) best = i;
  }
  return best;
}

std::pair<ActionDistribution, HistoryState> policy_step(const Eigen::VectorXd& instr_enc,
                                                        const HistoryState& history,
                                                        const ObsFeatures& obs,
                                                        std::span<const CandidateView> candidates,
                                                        const PolicyParams& params) {
  ad::Tape tape;
  PolicyVars pv = make_policy_vars(tape, params, false);
  ObsFeaturesT obs_t;
  for (const auto& f : obs.candidate_feats) obs_t.candidate_feats.push_back(tape.constant(f));
  obs_t.pooled = tape.constant(obs.pooled);
  StepOutputT step = policy_step_t(tape, pv, tape.constant(instr_enc), tape.constant(history.h),
                                   obs_t);
  ad::Var dist = tape.softmax(step.logits);

  ActionDistribution ad_out;
  for (const CandidateView& c : candidates) ad_out.candidates.push_back(c.node);
  const ad::Mat& probs = tape.value(dist);
  for (long i = 0; i < probs.rows(); ++i) ad_out.probs.push_back(probs(i, 0));

  HistoryState new_state;
  new_state.h = tape.value(step.new_history).col(0);
  new_state.orientation = history.orientation;
  return {ad_out, new_state};
}

// ------------------------------------------------------------------ rollouts

namespace {

// One inference step against cached features; returns chosen action index.
struct InferenceContext {
  ad::Tape tape;
  PolicyVars pv;
  ad::Var instr;
  ad::Var history;

  InferenceContext(const PolicyParams& params, std::span<const int> instruction)
      : pv(make_policy_vars(tape, params, false)) {
    instr = encode_instruction_t(tape, pv, instruction);
    history = tape.constant(ad::Mat::Zero(params.dim, 1));
  }
};

std::vector<ad::Var> views_as_constants(ad::Tape& tape,
                                        const std::array<Eigen::VectorXd, kPanoramaViews>& views) {
  std::vector<ad::Var> out;
  out.reserve(kPanoramaViews);
  for (const auto& v : views) out.push_back(tape.constant(v));
  return out;
}

int argmax_logits(const ad::Mat& logits) {
  // Candidates are in ascending node-id order with STOP last, so the first
  // strict maximum realizes "ties to smallest id, STOP last".
  int best = 0;
  for (long i = 1; i < logits.rows(); ++i) {
    if (logits(i, 0) > logits(best, 0)) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace

Trajectory rollout_from_state(const PolicyParams& params, const EnvContext& env,
                              std::span<const int> instruction, NodeId start_node,
                              HistoryState state, int max_steps) {
  if (!env.graph->contains(start_node)) {
    throw std::invalid_argument("rollout: start node not in graph");
  }
  InferenceContext ctx(params, instruction);
  ctx.history = ctx.tape.constant(state.h);
  double orientation = state.orientation;

  Trajectory visited{start_node};
  NodeId cur = start_node;
  while (static_cast<int>(visited.size()) < max_steps) {
    const auto candidates = candidate_views(*env.graph, cur, orientation);
    const auto views = views_as_constants(ctx.tape, env.cache->features(cur));
    ObsFeaturesT obs = featurize_views_t(ctx.tape, ctx.pv, views, candidates);
    StepOutputT step = policy_step_t(ctx.tape, ctx.pv, ctx.instr, ctx.history, obs);
    ctx.history = step.new_history;
    const int action = argmax_logits(ctx.tape.value(step.logits));
    if (action == static_cast<int>(candidates.size())) break;  // STOP
    const CandidateView& chosen = candidates[static_cast<size_t>(action)];
    orientation = chosen.heading_abs;
    cur = chosen.node;
    visited.push_back(cur);
  }
  return visited;
}

Trajectory rollout(const PolicyParams& params, const Scene& scene, const NavGraph& graph,
                   std::span<const int> instruction, NodeId start_node, int max_steps,
                   int resolution) {
  PanoramaCache cache(scene, graph, resolution);
  EnvContext env{&graph, &cache};
  return rollout_from_state(params, env, instruction, start_node,
                            HistoryState::initial(params.dim), max_steps);
}

HistoryState forced_rollout_cached(const PolicyParams& params, const EnvContext& env,
                                   std::span<const int> instruction,
                                   std::span<const NodeId> prefix) {
  HistoryState state = HistoryState::initial(params.dim);
  if (prefix.empty()) return state;
  for (size_t i = 0; i + 1 < prefix.size(); ++i) {
    if (!env.graph->has_edge(prefix[i], prefix[i + 1])) {
      throw std::invalid_argument("forced_rollout: prefix nodes not adjacent");
    }
  }
  InferenceContext ctx(params, instruction);
  double orientation = state.orientation;
  for (size_t i = 0; i < prefix.size(); ++i) {
    const NodeId node = prefix[i];
    const auto candidates = candidate_views(*env.graph, node, orientation);
    const auto views = views_as_constants(ctx.tape, env.cache->features(node));
    ObsFeaturesT obs = featurize_views_t(ctx.tape, ctx.pv, views, candidates);
    StepOutputT step = policy_step_t(ctx.tape, ctx.pv, ctx.instr, ctx.history, obs);
    ctx.history = step.new_history;
    if (i + 1 < prefix.size()) orientation = heading_of(env.graph->position(node),
                                                        env.graph->position(prefix[i + 1]));
  }
  state.h = ctx.tape.value(ctx.history).col(0);
  state.orientation = orientation;
  return state;
}

HistoryState forced_rollout(const PolicyParams& params, const Scene& scene, const NavGraph& graph,
                            std::span<const int> instruction, std::span<const NodeId> prefix,
                            int resolution) {
  PanoramaCache cache(scene, graph, resolution);
  EnvContext env{&graph, &cache};
  return forced_rollout_cached(params, env, instruction, prefix);
}

// ------------------------------------------------------------------ training

BCResult train_bc(const PolicyParams& init, std::span<const Episode> episodes,
                  const std::map<std::string, EnvContext>& envs, const Vocabulary& vocab,
                  const BCConfig& config) {
  if (episodes.empty()) throw std::invalid_argument("train_bc: at least one episode required");

  BCResult result;
  result.params = init;
  std::vector<double> flat = result.params.to_flat();
  AdamState opt(flat.size());
  AdamHyper hp;
  hp.lr = config.lr;

  std::vector<std::vector<int>> token_ids;
  token_ids.reserve(episodes.size());
  for (const Episode& ep : episodes) token_ids.push_back(vocab.encode(ep.instruction));

  Rng rng(mix_seed(config.seed, 0x747261696eull));
  std::vector<size_t> order(episodes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> grad(flat.size(), 0.0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), begin + static_cast<size_t>(config.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (size_t oi = begin; oi < end; ++oi) {
        const Episode& ep = episodes[order[oi]];
        const EnvContext& env = envs.at(ep.env_id);

        ad::Tape tape;
        PolicyVars pv = make_policy_vars(tape, result.params, true);
        ad::Var instr = encode_instruction_t(tape, pv, token_ids[order[oi]]);
        ad::Var history = tape.constant(ad::Mat::Zero(result.params.dim, 1));
        double orientation = 0.0;

        std::vector<ad::Var> step_losses;
        const Trajectory& traj = ep.trajectory;
        for (size_t t = 0; t < traj.size(); ++t) {
          const NodeId node = traj[t];
          const auto candidates = candidate_views(*env.graph, node, orientation);
          const auto views = views_as_constants(tape, env.cache->features(node));
          ObsFeaturesT obs = featurize_views_t(tape, pv, views, candidates);
          StepOutputT step = policy_step_t(tape, pv, instr, history, obs);
          history = step.new_history;

          int target = static_cast<int>(candidates.size());  // STOP by default
          if (t + 1 < traj.size()) {
            target = -1;
            for (size_t c = 0; c < candidates.size(); ++c) {
              if (candidates[c].node == traj[t + 1]) target = static_cast<int>(c);
            }
            if (target < 0) throw std::invalid_argument("train_bc: trajectory not adjacent");
            orientation = candidates[static_cast<size_t>(target)].heading_abs;
          }
          step_losses.push_back(tape.cross_entropy(step.logits, target));
        }
        ad::Var loss = tape.mean_of(step_losses);
        tape.backward(loss);
        batch_loss += tape.value(loss)(0, 0);

        // Accumulate parameter gradients in the fixed entries() order.
        const double scale = 1.0 / static_cast<double>(end - begin);
        size_t at = 0;
        auto add_grad = [&](ad::Var v) {
          const ad::Mat& g = tape.grad(v);
          for (long i = 0; i < g.size(); ++i) grad[at + static_cast<size_t>(i)] += g.data()[i] * scale;
          at += static_cast<size_t>(g.size());
        };
        add_grad(pv.embedding);
        add_grad(pv.instr_wz);
        add_grad(pv.instr_uz);
        add_grad(pv.instr_bz);
        add_grad(pv.instr_wh);
        add_grad(pv.instr_uh);
        add_grad(pv.instr_bh);
        add_grad(pv.hist_wz);
        add_grad(pv.hist_uz);
        add_grad(pv.hist_bz);
        add_grad(pv.hist_wh);
        add_grad(pv.hist_uh);
        add_grad(pv.hist_bh);
        add_grad(pv.obs_proj);
        add_grad(pv.dir_proj);
        add_grad(pv.fuse_w1);
        add_grad(pv.fuse_b1);
        add_grad(pv.fuse_w2);
        add_grad(pv.fuse_b2);
        add_grad(pv.stop_embedding);
      }
      if (config.lr > 0.0) {
        adam_step(opt, grad, flat, hp);
        result.params.from_flat(flat);
      }
      epoch_loss += batch_loss / static_cast<double>(end - begin);
      ++batches;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

}  // namespace vhl
