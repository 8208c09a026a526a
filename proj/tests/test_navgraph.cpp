#include <doctest.h>

#include <algorithm>
#include <limits>

#include "vhl/navgraph.hpp"
#include "vhl/rng.hpp"

using namespace vhl;

namespace {

// Brute-force minimum over all simple paths, for the oracle-equivalence
// property on small graphs.
void enumerate_paths(const NavGraph& g, NodeId cur, NodeId goal, std::vector<char>& visited,
                     double length, double& best) {
  if (cur == goal) {
    best = std::min(best, length);
    return;
  }
  for (NodeId v : g.neighbors(cur)) {
    if (visited[static_cast<size_t>(v)]) continue;
    visited[static_cast<size_t>(v)] = 1;
    enumerate_paths(g, v, goal, visited, length + g.edge_length(cur, v), best);
    visited[static_cast<size_t>(v)] = 0;
  }
}

double brute_force_shortest(const NavGraph& g, NodeId a, NodeId b) {
  std::vector<char> visited(static_cast<size_t>(g.node_count()), 0);
  visited[static_cast<size_t>(a)] = 1;
  double best = std::numeric_limits<double>::infinity();
  enumerate_paths(g, a, b, visited, 0.0, best);
  return best;
}

NavGraph random_connected_graph(Rng& rng, int nodes) {
  NavGraph g;
  for (int i = 0; i < nodes; ++i) {
    g.add_node({rng.uniform(0, 10), rng.uniform(0, 10), 0.0});
  }
  for (NodeId i = 1; i < nodes; ++i) {
    g.add_edge(i, static_cast<NodeId>(rng.uniform_index(static_cast<uint64_t>(i))));
  }
  const int extra = nodes / 2;
  for (int k = 0; k < extra; ++k) {
    const NodeId a = static_cast<NodeId>(rng.uniform_index(static_cast<uint64_t>(nodes)));
    const NodeId b = static_cast<NodeId>(rng.uniform_index(static_cast<uint64_t>(nodes)));
    if (a != b) g.add_edge(a, b);
  }
  return g;
}

}  // namespace

TEST_CASE("shortest_path identity and direct edge") {
  NavGraph g;
  g.add_node({0, 0, 0});
  g.add_node({1, 0, 0});
  g.add_edge(0, 1);
  CHECK(shortest_path(g, 0, 0) == Trajectory{0});
  CHECK(shortest_path(g, 0, 1) == Trajectory{0, 1});
}

TEST_CASE("shortest_path returns the two-hop route over the long direct edge") {
  // Edge lengths are Euclidean, so a strict detour can never beat a direct
  // edge; with a collinear midpoint the two-hop route ties the direct edge
  // and wins on the lexicographic rule. 5 nodes with decoy detours.
  NavGraph g;
  g.add_node({0, 0, 0});    // 0
  g.add_node({5, 0, 0});    // 1 collinear midpoint
  g.add_node({10, 0, 0});   // 2
  g.add_node({-5, -5, 0});  // 3 decoy
  g.add_node({5, -9, 0});   // 4 decoy
  g.add_edge(0, 2);         // the direct long edge, length 10
  g.add_edge(0, 1);
  g.add_edge(1, 2);         // 0-1-2 also length 10
  g.add_edge(0, 3);
  g.add_edge(3, 4);
  g.add_edge(4, 2);
  CHECK(shortest_path(g, 0, 2) == Trajectory{0, 1, 2});
  CHECK(g.path_length(shortest_path(g, 0, 2)) ==
        doctest::Approx(brute_force_shortest(g, 0, 2)).epsilon(1e-12));

  // Without the direct edge the two-hop route strictly beats both detours.
  NavGraph g2;
  g2.add_node({0, 0, 0});
  g2.add_node({5, 1, 0});
  g2.add_node({10, 0, 0});
  g2.add_node({-5, -5, 0});
  g2.add_node({5, -9, 0});
  g2.add_edge(0, 1);
  g2.add_edge(1, 2);
  g2.add_edge(0, 3);
  g2.add_edge(3, 4);
  g2.add_edge(4, 2);
  CHECK(shortest_path(g2, 0, 2) == Trajectory{0, 1, 2});
  CHECK(g2.path_length(shortest_path(g2, 0, 2)) ==
        doctest::Approx(brute_force_shortest(g2, 0, 2)).epsilon(1e-12));
}

TEST_CASE("shortest_path equals brute force on random graphs up to 10 nodes") {
  Rng rng(20240601);
  for (int trial = 0; trial < 200; ++trial) {
    const int nodes = 3 + static_cast<int>(rng.uniform_index(8));  // 3..10
    NavGraph g = random_connected_graph(rng, nodes);
    const NodeId a = static_cast<NodeId>(rng.uniform_index(static_cast<uint64_t>(nodes)));
    const NodeId b = static_cast<NodeId>(rng.uniform_index(static_cast<uint64_t>(nodes)));
    const Trajectory p = shortest_path(g, a, b);
    REQUIRE(g.is_valid_trajectory(p));
    CHECK(p.front() == a);
    CHECK(p.back() == b);
    CHECK(g.path_length(p) == doctest::Approx(brute_force_shortest(g, a, b)).epsilon(1e-9));
  }
}

TEST_CASE("shortest_path lexicographic tie-break") {
  // Square with equal-length sides: two optimal routes 0-1-3 and 0-2-3.
  NavGraph g;
  g.add_node({0, 0, 0});
  g.add_node({1, 0, 0});
  g.add_node({0, 1, 0});
  g.add_node({1, 1, 0});
  g.add_edge(0, 1);
  g.add_edge(0, 2);
  g.add_edge(1, 3);
  g.add_edge(2, 3);
  CHECK(shortest_path(g, 0, 3) == Trajectory{0, 1, 3});
}

TEST_CASE("shortest_path rejects bad input") {
  NavGraph g;
  g.add_node({0, 0, 0});
  g.add_node({1, 0, 0});
  g.add_node({5, 5, 0});
  g.add_edge(0, 1);
  CHECK_THROWS_AS(shortest_path(g, 0, 7), std::invalid_argument);
  CHECK_THROWS_AS(shortest_path(g, 0, 2), std::runtime_error);  // unreachable
}

TEST_CASE("graph invariants") {
  NavGraph g;
  g.add_node({0, 0, 0});
  g.add_node({1, 0, 0});
  CHECK_THROWS_AS(g.add_edge(0, 0), std::invalid_argument);
  CHECK_THROWS_AS(g.add_node({std::numeric_limits<double>::infinity(), 0, 0}),
                  std::invalid_argument);
  g.add_edge(0, 1);
  g.add_edge(1, 0);  // duplicate collapses
  CHECK(g.edges().size() == 1);
  CHECK(g.is_connected());
  const Trajectory bad{0, 0};
  CHECK_FALSE(g.is_valid_trajectory(bad));
}
