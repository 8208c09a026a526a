#include "vhl/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace vhl {

double dtw(std::span<const NodeId> p, std::span<const NodeId> q,
           std::span<const Vec3> positions) {
  if (p.empty() || q.empty()) throw std::invalid_argument("dtw: empty path");
  const size_t n = p.size();
  const size_t m = q.size();
  auto cost = [&](size_t i, size_t j) {
    return distance(positions[static_cast<size_t>(p[i])], positions[static_cast<size_t>(q[j])]);
  };
  std::vector<double> prev(m), cur(m);
  prev[0] = cost(0, 0);
  for (size_t j = 1; j < m; ++j) prev[j] = prev[j - 1] + cost(0, j);
  for (size_t i = 1; i < n; ++i) {
    cur[0] = prev[0] + cost(i, 0);
    for (size_t j = 1; j < m; ++j) {
      cur[j] = cost(i, j) + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

double ndtw(std::span<const NodeId> p, std::span<const NodeId> r,
            std::span<const Vec3> positions, double d_th) {
  const double d = dtw(p, r, positions);
  return std::exp(-d / (static_cast<double>(r.size()) * d_th));
}

bool success(std::span<const NodeId> p, std::span<const NodeId> r,
             std::span<const Vec3> positions, double threshold) {
  if (p.empty() || r.empty()) throw std::invalid_argument("success: empty path");
  return distance(positions[static_cast<size_t>(p.back())],
                  positions[static_cast<size_t>(r.back())]) <= threshold;
}

bool oracle_success(std::span<const NodeId> p, std::span<const NodeId> r,
                    std::span<const Vec3> positions, double threshold) {
  if (p.empty() || r.empty()) throw std::invalid_argument("oracle_success: empty path");
  const Vec3& goal = positions[static_cast<size_t>(r.back())];
  for (NodeId v : p) {
    if (distance(positions[static_cast<size_t>(v)], goal) <= threshold) return true;
  }
  return false;
}

void MetricsReport::finalize() {
  sr_pct = osr_pct = ndtw_pct = stop_rate_pct = 0.0;
  if (rows.empty()) return;
  for (const EpisodeResult& r : rows) {
    sr_pct += r.sr ? 1.0 : 0.0;
    osr_pct += r.osr ? 1.0 : 0.0;
    ndtw_pct += r.ndtw;
    stop_rate_pct += r.stopped_at_vatk ? 1.0 : 0.0;
  }
  const double inv = 100.0 / static_cast<double>(rows.size());
  sr_pct *= inv;
  osr_pct *= inv;
  ndtw_pct *= inv;
  stop_rate_pct *= inv;
}

MetricsReport evaluate_instance_cached(const PolicyParams& params, const NavGraph& graph,
                                       const PanoramaCache& cache, const AttackInstance& instance,
                                       std::span<const Episode> episodes, EvalReference reference,
                                       const Vocabulary& vocab, int max_steps) {
  MetricsReport report;
  EnvContext env{&graph, &cache};
  const auto positions = std::span<const Vec3>(graph.positions());

  for (const Episode& ep : episodes) {
    const int at = first_index_of(ep.trajectory, instance.v_atk);
    if (at < 0) {
      throw std::invalid_argument("evaluate_instance: episode does not pass the attack viewpoint");
    }
    const std::vector<int> tokens = vocab.encode(ep.instruction);
    const std::span<const NodeId> prefix(ep.trajectory.data(), static_cast<size_t>(at));
    HistoryState state = forced_rollout_cached(params, env, tokens, prefix);
    if (at > 0) {
      // The hop from the last guide node into v_atk sets the arrival heading.
      state.orientation = heading_of(graph.position(ep.trajectory[static_cast<size_t>(at) - 1]),
                                     graph.position(instance.v_atk));
    }

    EpisodeResult row;
    row.episode_id = ep.id;
    row.post_trajectory =
        rollout_from_state(params, env, tokens, instance.v_atk, std::move(state), max_steps);
    row.stopped_at_vatk = row.post_trajectory.size() == 1;

    Trajectory reference_path;
    if (reference == EvalReference::kAttack) {
      reference_path = instance.attack_trajectory;
      if (reference_path.empty()) reference_path = {instance.v_atk};  // stop mode
    } else {
      reference_path.assign(ep.trajectory.begin() + at, ep.trajectory.end());
    }
    row.sr = success(row.post_trajectory, reference_path, positions);
    row.osr = oracle_success(row.post_trajectory, reference_path, positions);
    row.ndtw = ndtw(row.post_trajectory, reference_path, positions);
    report.rows.push_back(std::move(row));
  }
  report.finalize();
  return report;
}

MetricsReport evaluate_instance(const PolicyParams& params, const Scene& scene,
                                const NavGraph& graph, const AttackInstance& instance,
                                std::span<const Episode> episodes, EvalReference reference,
                                const Vocabulary& vocab, int resolution, int max_steps) {
  PanoramaCache cache(scene, graph, resolution);
  return evaluate_instance_cached(params, graph, cache, instance, episodes, reference, vocab,
                                  max_steps);
}

double heading_entropy(const AttackInstance& instance, std::span<const Episode> episodes,
                       const NavGraph& graph) {
  std::array<double, kPanoramaHeadings> bins{};
  double total = 0.0;
  for (const Episode& ep : episodes) {
    const int at = first_index_of(ep.trajectory, instance.v_atk);
    if (at <= 0) continue;  // absent or starts at v_atk
    const double h = wrap_angle_positive(
        heading_of(graph.position(ep.trajectory[static_cast<size_t>(at) - 1]),
                   graph.position(instance.v_atk)));
    int bin = static_cast<int>(h / (kPi / 6.0));
    if (bin >= kPanoramaHeadings) bin = 0;
    bins[static_cast<size_t>(bin)] += 1.0;
    total += 1.0;
  }
  if (total == 0.0) return 0.0;
  double entropy = 0.0;
  for (double b : bins) {
    if (b > 0.0) {
      const double pr = b / total;
      entropy -= pr * std::log(pr);
    }
  }
  return entropy;
}

bool object_mentioned(std::span<const std::string> instruction_tokens, ObjectCategory category) {
  static const std::vector<std::vector<std::string>> kSynonyms = {
      {"chair", "armchair", "seat"},
      {"cabinet", "cupboard", "dresser"},
      {"table", "desk"},
      {"plant", "fern"},
      {"sofa", "couch"},
      {"tv", "television", "monitor", "screen", "tv_monitor"},
  };
  const auto& words = kSynonyms[static_cast<size_t>(category)];
  for (const std::string& raw : instruction_tokens) {
    std::string tok = raw;
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const std::string& w : words) {
      if (tok == w) return true;
    }
  }
  return false;
}

std::vector<FactorRow> factor_rows(std::span<const InstanceFactors> factors) {
  std::vector<FactorRow> rows;
  rows.reserve(factors.size() * 2);
  for (const InstanceFactors& f : factors) {
    for (int attacked = 0; attacked <= 1; ++attacked) {
      FactorRow row;
      row.instance_id = f.instance_id;
      row.attack = attacked;
      row.category = f.category;
      row.ndtw = attacked ? f.post_ndtw : f.pre_ndtw;
      row.cov_vatk_pct = f.cov_vatk_pct;
      row.cov_mean_pct = f.cov_mean_pct;
      row.heading_entropy_nats = f.heading_entropy_nats;
      row.object_mentioned = f.object_mentioned;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void export_factors(std::span<const InstanceFactors> factors, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("export_factors: cannot open " + path);
  f << kFactorsHeader << "\n";
  for (const FactorRow& row : factor_rows(factors)) {
    f << row.instance_id << ',' << row.attack << ',' << category_name(row.category) << ','
      << format_double(row.ndtw) << ',' << format_double(row.cov_vatk_pct) << ','
      << format_double(row.cov_mean_pct) << ',' << format_double(row.heading_entropy_nats) << ','
      << (row.object_mentioned ? 1 : 0) << "\n";
  }
}

std::vector<FactorRow> parse_factors_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("parse_factors_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("parse_factors_csv: empty file");
  if (line != kFactorsHeader) throw std::runtime_error("parse_factors_csv: unexpected header");
  std::vector<FactorRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    FactorRow row;
    std::getline(ss, row.instance_id, ',');
    std::getline(ss, field, ',');
    row.attack = std::stoi(field);
    std::getline(ss, field, ',');
    row.category = category_from_name(field);
    std::getline(ss, field, ',');
    row.ndtw = std::stod(field);
    std::getline(ss, field, ',');
    row.cov_vatk_pct = std::stod(field);
    std::getline(ss, field, ',');
    row.cov_mean_pct = std::stod(field);
    std::getline(ss, field, ',');
    row.heading_entropy_nats = std::stod(field);
    std::getline(ss, field, ',');
    row.object_mentioned = field == "1";
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace vhl
