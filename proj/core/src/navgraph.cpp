#include "vhl/navgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace vhl {

NodeId NavGraph::add_node(const Vec3& pos) {
  if (!std::isfinite(pos.x) || !std::isfinite(pos.y) || !std::isfinite(pos.z)) {
    throw std::invalid_argument("NavGraph: node position must be finite");
  }
  positions_.push_back(pos);
  adjacency_.emplace_back();
  return static_cast<NodeId>(positions_.size() - 1);
}

void NavGraph::add_edge(NodeId a, NodeId b) {
  if (!contains(a) || !contains(b)) throw std::invalid_argument("NavGraph: edge endpoint out of range");
  if (a == b) throw std::invalid_argument("NavGraph: self-loops are not allowed");
  if (has_edge(a, b)) return;
  auto& na = adjacency_[static_cast<size_t>(a)];
  auto& nb = adjacency_[static_cast<size_t>(b)];
  na.insert(std::lower_bound(na.begin(), na.end(), b), b);
  nb.insert(std::lower_bound(nb.begin(), nb.end(), a), a);
}

bool NavGraph::has_edge(NodeId a, NodeId b) const {
  if (!contains(a) || !contains(b)) return false;
  const auto& na = adjacency_[static_cast<size_t>(a)];
  return std::binary_search(na.begin(), na.end(), b);
}

std::vector<std::pair<NodeId, NodeId>> NavGraph::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId a = 0; a < node_count(); ++a) {
    for (NodeId b : neighbors(a)) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

bool NavGraph::is_connected() const {
  if (node_count() == 0) return false;
  std::vector<char> seen(static_cast<size_t>(node_count()), 0);
  std::queue<NodeId> q;
  q.push(0);
  seen[0] = 1;
  int visited = 1;
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop();
    for (NodeId v : neighbors(u)) {
      if (!seen[static_cast<size_t>(v)]) {
        seen[static_cast<size_t>(v)] = 1;
        ++visited;
        q.push(v);
      }
    }
  }
  return visited == node_count();
}

bool NavGraph::is_valid_trajectory(std::span<const NodeId> traj) const {
  if (traj.empty()) return false;
  if (!contains(traj.front())) return false;
  for (size_t i = 1; i < traj.size(); ++i) {
    if (!contains(traj[i]) || !has_edge(traj[i - 1], traj[i])) return false;
  }
  return true;
}

double NavGraph::path_length(std::span<const NodeId> traj) const {
  double total = 0.0;
  for (size_t i = 1; i < traj.size(); ++i) total += edge_length(traj[i - 1], traj[i]);
  return total;
}

namespace {

// Dijkstra distances from a single source.
std::vector<double> dijkstra_distances(const NavGraph& g, NodeId src) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<size_t>(g.node_count()), kInf);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[static_cast<size_t>(src)] = 0.0;
  pq.emplace(0.0, src);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[static_cast<size_t>(u)]) continue;
    for (NodeId v : g.neighbors(u)) {
      const double nd = d + g.edge_length(u, v);
      if (nd < dist[static_cast<size_t>(v)]) {
        dist[static_cast<size_t>(v)] = nd;
        pq.emplace(nd, v);
      }
    }
  }
  return dist;
}

}  // namespace

Trajectory shortest_path(const NavGraph& graph, NodeId a, NodeId b) {
  if (!graph.contains(a) || !graph.contains(b)) {
    throw std::invalid_argument("shortest_path: endpoint not in graph");
  }
  if (a == b) return {a};

  const auto dist_from_b = dijkstra_distances(graph, b);
  const double total = dist_from_b[static_cast<size_t>(a)];
  if (!std::isfinite(total)) {
    throw std::runtime_error("shortest_path: target unreachable");
  }

  // Greedy reconstruction: always take the smallest neighbor that still lies
  // on some optimal path. This yields the lexicographically smallest optimal
  // node sequence. Edge lengths are strictly positive, so the walk makes
  // progress toward b every step.
  const double slack = 1e-9 * std::max(1.0, total);
  Trajectory path{a};
  NodeId cur = a;
  double walked = 0.0;
  while (cur != b) {
    NodeId next = -1;
    for (NodeId v : graph.neighbors(cur)) {
      const double through = walked + graph.edge_length(cur, v) + dist_from_b[static_cast<size_t>(v)];
      if (through <= total + slack) {
        next = v;
        break;  // neighbors are in ascending id order
      }
    }
    if (next < 0) throw std::runtime_error("shortest_path: reconstruction failed");
    walked += graph.edge_length(cur, next);
    cur = next;
    path.push_back(cur);
  }
  return path;
}

}  // namespace vhl
