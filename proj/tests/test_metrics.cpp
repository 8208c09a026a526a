#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "vhl/metrics.hpp"
#include "vhl/rng.hpp"

using namespace vhl;

namespace {

// Exhaustive enumeration of monotone alignments with endpoints matched:
// the independent DTW oracle.
double align_rec(const std::vector<Vec3>& p, const std::vector<Vec3>& q, size_t i, size_t j) {
  const double c = distance(p[i], q[j]);
  if (i == p.size() - 1 && j == q.size() - 1) return c;
  double best = std::numeric_limits<double>::infinity();
  if (i + 1 < p.size()) best = std::min(best, align_rec(p, q, i + 1, j));
  if (j + 1 < q.size()) best = std::min(best, align_rec(p, q, i, j + 1));
  if (i + 1 < p.size() && j + 1 < q.size()) best = std::min(best, align_rec(p, q, i + 1, j + 1));
  return c + best;
}

double brute_dtw(const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
  return align_rec(p, q, 0, 0);
}

}  // namespace

TEST_CASE("dtw identity, singleton alignment and the 3.0 example") {
  std::vector<Vec3> positions{{0, 0, 0}, {3, 0, 0}, {1, 1, 0}, {4, 4, 0}};
  const Trajectory p{0, 1};
  const Trajectory single{0};
  CHECK(dtw(p, p, positions) == 0.0);
  CHECK(dtw(single, single, positions) == 0.0);
  // P = [(0,0,0),(3,0,0)], Q = [(0,0,0)]: both P nodes align to the single
  // Q node for cost 0 + 3.
  CHECK(dtw(p, single, positions) == doctest::Approx(3.0));
  CHECK_THROWS_AS(dtw(Trajectory{}, p, positions), std::invalid_argument);
}

TEST_CASE("dtw equals exhaustive alignment enumeration on random paths") {
  Rng rng(0xD7);
  for (int trial = 0; trial < 500; ++trial) {
    const size_t np = 1 + rng.uniform_index(6);
    const size_t nq = 1 + rng.uniform_index(6);
    std::vector<Vec3> positions;
    Trajectory p, q;
    for (size_t i = 0; i < np; ++i) {
      positions.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1)});
      p.push_back(static_cast<NodeId>(positions.size() - 1));
    }
    for (size_t j = 0; j < nq; ++j) {
      positions.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1)});
      q.push_back(static_cast<NodeId>(positions.size() - 1));
    }
    std::vector<Vec3> pp, qq;
    for (NodeId i : p) pp.push_back(positions[static_cast<size_t>(i)]);
    for (NodeId j : q) qq.push_back(positions[static_cast<size_t>(j)]);
    CHECK(dtw(p, q, positions) == doctest::Approx(brute_dtw(pp, qq)).epsilon(1e-12));
  }
}

TEST_CASE("ndtw: exact match, the exp(-0.5) example, range") {
  std::vector<Vec3> positions{{0, 0, 0}, {3, 0, 0}, {0, 3, 0}, {5, 5, 0}};
  const Trajectory p{0, 1, 3};
  CHECK(ndtw(p, p, positions) == 1.0);

  // dtw = 3 against reference of 2 nodes: exp(-3 / (2*3)) = exp(-0.5).
  const Trajectory single{0};
  const Trajectory two{0, 1};
  // dtw(two_as_pred, ref=[0]) = 3; |R| = 1 -> exp(-1). Use ref = {0,2} with
  // dtw 3 instead: P = {0,1}: cost pairs (0,0)=0 then align (1,2): d((3,0),(0,3)) = sqrt(18)..
  // Simplest: reuse the worked example with |R| = 2 by swapping arguments.
  CHECK(dtw(single, two, positions) == doctest::Approx(3.0));
  CHECK(ndtw(single, two, positions) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(ndtw(single, two, positions) == doctest::Approx(0.60653).epsilon(1e-4));

  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Trajectory a{static_cast<NodeId>(rng.uniform_index(4))};
    Trajectory b{static_cast<NodeId>(rng.uniform_index(4)),
                 static_cast<NodeId>(rng.uniform_index(4))};
    const double v = ndtw(a, b, positions);
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("ndtw is strictly decreasing in dtw") {
  std::vector<Vec3> positions{{0, 0, 0}, {1, 0, 0}, {9, 0, 0}};
  const Trajectory ref{0, 1};
  const Trajectory close{0, 1};
  const Trajectory off{0, 2};
  CHECK(dtw(off, ref, positions) > dtw(close, ref, positions));
  CHECK(ndtw(off, ref, positions) < ndtw(close, ref, positions));
}

TEST_CASE("success boundary at exactly 3 m is inclusive; oracle success sees mid-path hits") {
  std::vector<Vec3> positions{{0, 0, 0}, {3, 0, 0}, {0.5, 0, 0}, {8, 0, 0}, {3.0001, 0, 0}};
  const Trajectory ref{0, 1};  // goal at (3,0,0)
  CHECK(success(Trajectory{0}, ref, positions));            // distance 3.0 exactly
  CHECK_FALSE(success(Trajectory{0, 3}, ref, positions));   // 5 m away
  CHECK(success(Trajectory{0, 4}, ref, positions) == true); // 1e-4 m
  CHECK(success(ref, ref, positions));
  CHECK(oracle_success(ref, ref, positions));

  // Passes within 1 m of the goal mid-path but stops 5 m away.
  const Trajectory wander{0, 2, 3};
  CHECK_FALSE(success(wander, ref, positions));
  CHECK(oracle_success(wander, ref, positions));
}

TEST_CASE("heading entropy: single bin, uniform four bins, upper bound") {
  NavGraph g;
  const NodeId center = g.add_node({0, 0, 0});
  const NodeId n = g.add_node({0, -4, 0});   // enters heading north
  const NodeId e = g.add_node({-4, 0, 0});   // enters heading east
  const NodeId s = g.add_node({0, 4, 0});    // enters heading south
  const NodeId w = g.add_node({4, 0, 0});    // enters heading west
  for (NodeId v : {n, e, s, w}) g.add_edge(center, v);

  AttackInstance inst;
  inst.v_atk = center;

  auto ep = [&](const std::string& id, NodeId from) {
    Episode e2;
    e2.id = id;
    e2.env_id = "x";
    e2.instruction = {"walk"};
    e2.trajectory = {from, center};
    return e2;
  };

  std::vector<Episode> one{ep("a", n), ep("b", n), ep("c", n)};
  CHECK(heading_entropy(inst, one, g) == doctest::Approx(0.0));

  std::vector<Episode> four{ep("a", n), ep("b", e), ep("c", s), ep("d", w)};
  CHECK(heading_entropy(inst, four, g) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(heading_entropy(inst, four, g) <= std::log(12.0));

  // Episodes starting at v_atk contribute nothing.
  Episode starts_here;
  starts_here.id = "z";
  starts_here.env_id = "x";
  starts_here.instruction = {"walk"};
  starts_here.trajectory = {center, n};
  std::vector<Episode> mixed{ep("a", n), starts_here};
  CHECK(heading_entropy(inst, mixed, g) == doctest::Approx(0.0));
}

TEST_CASE("object_mentioned uses case-insensitive synonym lists") {
  const std::vector<std::string> instr{"walk", "past", "the", "couch"};
  CHECK(object_mentioned(instr, ObjectCategory::kSofa));
  CHECK_FALSE(object_mentioned(instr, ObjectCategory::kTable));
  const std::vector<std::string> cap{"Sofa"};
  CHECK(object_mentioned(cap, ObjectCategory::kSofa));
  const std::vector<std::string> none{"walk", "left"};
  CHECK_FALSE(object_mentioned(none, ObjectCategory::kPlant));
}

TEST_CASE("factors export: paired long format and round trip") {
  std::vector<InstanceFactors> factors;
  for (int i = 0; i < 3; ++i) {
    InstanceFactors f;
    f.instance_id = "inst" + std::to_string(i);
    f.category = static_cast<ObjectCategory>(i);
    f.pre_ndtw = 0.1 * i;
    f.post_ndtw = 0.5 + 0.1 * i;
    f.cov_vatk_pct = i == 2 ? 0.0 : 43.25;  // a hidden object shows 0.0
    f.cov_mean_pct = 21.5;
    f.heading_entropy_nats = 1.0986122886681098;
    f.object_mentioned = i % 2 == 0;
    factors.push_back(f);
  }
  const auto rows = factor_rows(factors);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].attack == 0);
  CHECK(rows[1].attack == 1);
  CHECK(rows[0].ndtw == doctest::Approx(0.0));
  CHECK(rows[1].ndtw == doctest::Approx(0.5));

  const auto path = std::filesystem::temp_directory_path() / "vhl_factors_test.csv";
  export_factors(factors, path.string());
  const auto parsed = parse_factors_csv(path.string());
  REQUIRE(parsed.size() == 6);
  for (size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].instance_id == rows[i].instance_id);
    CHECK(parsed[i].attack == rows[i].attack);
    CHECK(parsed[i].category == rows[i].category);
    CHECK(parsed[i].ndtw == rows[i].ndtw);
    CHECK(parsed[i].cov_vatk_pct == rows[i].cov_vatk_pct);
    CHECK(parsed[i].cov_mean_pct == rows[i].cov_mean_pct);
    CHECK(parsed[i].heading_entropy_nats == rows[i].heading_entropy_nats);
    CHECK(parsed[i].object_mentioned == rows[i].object_mentioned);
  }
  std::filesystem::remove(path);
}
