#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vhl/geometry.hpp"

namespace vhl {

using NodeId = int32_t;

// Node sequence where consecutive nodes are adjacent in the graph.
using Trajectory = std::vector<NodeId>;

// Undirected navigation graph with metric node positions. Node ids are dense
// from 0; edge length is the Euclidean distance between endpoint positions.
class NavGraph {
 public:
  NavGraph() = default;
  explicit NavGraph(std::vector<Vec3> positions) : positions_(std::move(positions)) {
    adjacency_.resize(positions_.size());
  }

  NodeId add_node(const Vec3& pos);
  void add_edge(NodeId a, NodeId b);

  int node_count() const { return static_cast<int>(positions_.size()); }
  const Vec3& position(NodeId n) const { return positions_[static_cast<size_t>(n)]; }
  const std::vector<Vec3>& positions() const { return positions_; }

  // Neighbors in ascending node-id order.
  const std::vector<NodeId>& neighbors(NodeId n) const {
    return adjacency_[static_cast<size_t>(n)];
  }
  bool has_edge(NodeId a, NodeId b) const;
  std::vector<std::pair<NodeId, NodeId>> edges() const;  // a < b, sorted

  double edge_length(NodeId a, NodeId b) const { return distance(position(a), position(b)); }

  bool contains(NodeId n) const { return n >= 0 && n < node_count(); }
  bool is_connected() const;

  // True iff the node sequence is non-empty and every consecutive pair is an
  // edge of the graph.
  bool is_valid_trajectory(std::span<const NodeId> traj) const;

  double path_length(std::span<const NodeId> traj) const;

 private:
  std::vector<Vec3> positions_;
  std::vector<std::vector<NodeId>> adjacency_;
};

// Minimum-metric-length path from a to b. Ties are broken by the
// lexicographically smallest node-id sequence. Throws std::invalid_argument
// if either endpoint is missing, std::runtime_error if b is unreachable.
Trajectory shortest_path(const NavGraph& graph, NodeId a, NodeId b);

}  // namespace vhl
