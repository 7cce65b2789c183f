#include <doctest.h>

#include <algorithm>
#include <set>

#include "leomoe/topology.hpp"

using namespace leomoe;

namespace {

ConstellationConfig toy(int nx = 6, int ny = 8, int slots = 6) {
  ConstellationConfig c;
  c.n_planes = nx;
  c.sats_per_plane = ny;
  c.phasing = 1 % nx;
  c.n_slots = slots;
  return c;
}

bool grid_neighbors(GridCoord a, GridCoord b, const ConstellationConfig& c) {
  const int dy = std::abs(a.y - b.y), dx = std::abs(a.x - b.x);
  if (a.x == b.x) return dy == 1 || dy == c.sats_per_plane - 1;
  if (a.y != b.y) return false;
  return dx == 1 || (c.n_planes >= 3 && dx == c.n_planes - 1);
}

}  // namespace

TEST_CASE("candidate neighbors") {
  const ConstellationConfig c = toy(33, 32);
  const auto n = candidate_neighbors({5, 0}, c);
  std::set<GridCoord> s(n.begin(), n.end());
  CHECK(s == std::set<GridCoord>{{5, 1}, {5, 31}, {4, 0}, {6, 0}});

  const ConstellationConfig ring = toy(1, 5);
  CHECK(candidate_neighbors({0, 2}, ring).size() == 2);

  // Star seam joins the two edge planes; delta wraps in x.
  const auto seam = candidate_neighbors({0, 3}, c);
  CHECK(std::count(seam.begin(), seam.end(), GridCoord{32, 3}) == 1);
  CHECK(is_seam_link({0, 3}, {32, 3}, c));
  CHECK_FALSE(is_seam_link({0, 3}, {1, 3}, c));
}

TEST_CASE("candidate edges are canonical grid-neighbor pairs") {
  const ConstellationConfig c = toy();
  const auto edges = candidate_edges(c);
  CHECK(std::is_sorted(edges.begin(), edges.end()));
  CHECK(std::adjacent_find(edges.begin(), edges.end()) == edges.end());
  std::vector<int> degree(c.n_sats(), 0);
  for (const Edge& e : edges) {
    CHECK(e.u < e.v);
    CHECK(grid_neighbors(c.coord(e.u), c.coord(e.v), c));
    ++degree[e.u];
    ++degree[e.v];
  }
  for (int d : degree) CHECK(d <= 4);
  // N_x * N_y intra-plane plus N_x * N_y inter-plane (including the seam).
  CHECK(edges.size() == 2u * c.n_sats());
}

TEST_CASE("deterministic feasibility") {
  ConstellationConfig c = toy(33, 32, 200);
  const Ephemeris eph = propagate(c);
  LinkParams p;
  for (int s = 0; s < c.n_slots; s += 17)
    for (int x = 0; x < c.n_planes; ++x)
      for (int y = 0; y < c.sats_per_plane; ++y)
        CHECK(deterministic_feasible(eph, p, {x, y}, {x, (y + 1) % 32}, s));
  LinkParams tiny = p;
  tiny.rate_threshold_rad_s = 1e-12;
  CHECK(deterministic_feasible(eph, tiny, {2, 3}, {2, 4}, 0));
  CHECK_THROWS_AS(deterministic_feasible(eph, p, {0, 0}, {3, 3}, 0), std::invalid_argument);

  LinkParams off = p;
  off.seam_policy = SeamPolicy::hard_disable;
  for (int y = 0; y < 32; ++y) CHECK_FALSE(deterministic_feasible(eph, off, {0, y}, {32, y}, 0));
}

TEST_CASE("seam link between counter-rotating planes fails the rate test") {
  // Three planes, star spread: planes 0 and 2 are counter-rotating neighbors
  // at the seam. Pick the slot where the pair is closest: the LOS rate then
  // exceeds any modest threshold.
  ConstellationConfig c = toy(3, 4, 400);
  c.phasing = 0;
  c.slot_duration_s = 5.0;
  const Ephemeris eph = propagate(c);
  LinkParams p;
  p.rate_threshold_rad_s = 1e-3;
  int rejected_visible = 0;
  for (int s = 0; s < c.n_slots; ++s) {
    if (!clears_earth(eph, {0, 0}, {2, 0}, s)) continue;
    const double rate = los_angular_rate(eph, {0, 0}, {2, 0}, s);
    CHECK(deterministic_feasible(eph, p, {0, 0}, {2, 0}, s) == (rate <= p.rate_threshold_rad_s));
    if (rate > p.rate_threshold_rad_s) ++rejected_visible;
  }
  CHECK(rejected_visible > 0);
}

TEST_CASE("survival sampling") {
  const ConstellationConfig c = toy();
  const Ephemeris eph = propagate(c);
  LinkParams p;
  p.survival_prob = 1.0;
  RandomStream s1(3);
  const TopologyRealization all = sample_realization(eph, p, 2, s1);
  std::vector<Edge> feasible;
  for (const Edge& e : candidate_edges(c))
    if (deterministic_feasible(eph, p, c.coord(e.u), c.coord(e.v), 2)) feasible.push_back(e);
  CHECK(all.edges == feasible);

  p.survival_prob = 0.0;
  RandomStream s0(3);
  CHECK(sample_realization(eph, p, 2, s0).edges.empty());

  // Retention frequency of one edge.
  p.survival_prob = 0.95;
  const TopologyModel model(eph, p);
  const std::size_t target = 0;
  REQUIRE(model.feasible(0, target));
  int kept = 0;
  std::vector<char> alive;
  const RandomStream root(11);
  for (int i = 0; i < 10000; ++i) {
    RandomStream r = root.derive(static_cast<std::uint64_t>(i));
    model.sample_alive(0, r, alive);
    kept += alive[target];
  }
  CHECK(std::abs(kept / 10000.0 - 0.95) < 0.01);
}

TEST_CASE("per-edge survival override") {
  const ConstellationConfig c = toy();
  const Ephemeris eph = propagate(c);
  LinkParams p;
  p.survival_prob = 1.0;
  const Edge dead = candidate_edges(c).front();
  p.survival_override[dead] = 0.0;
  RandomStream r(5);
  const auto edges = sample_realization(eph, p, 0, r).edges;
  CHECK(std::find(edges.begin(), edges.end(), dead) == edges.end());
  p.survival_override[dead] = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("model sampling equals direct sampling") {
  const ConstellationConfig c = toy();
  const Ephemeris eph = propagate(c);
  LinkParams p;
  p.survival_prob = 0.7;
  const TopologyModel model(eph, p);
  for (int s = 0; s < c.n_slots; ++s) {
    RandomStream a(9), b(9);
    CHECK(model.sample(s, a).edges == sample_realization(eph, p, s, b).edges);
  }
}

TEST_CASE("realization sequences are deterministic and slot-isolated") {
  const ConstellationConfig c = toy();
  const Ephemeris eph = propagate(c);
  LinkParams p;
  p.survival_prob = 0.6;
  const auto a = realization_sequence(eph, p, 42);
  const auto b = realization_sequence(eph, p, 42);
  REQUIRE(a.size() == static_cast<std::size_t>(c.n_slots));
  for (std::size_t s = 0; s < a.size(); ++s) {
    CHECK(a[s].slot == static_cast<int>(s));
    CHECK(a[s].edges == b[s].edges);
  }
  // Slot k's draws come from root.derive(k) alone: resampling slot 3 with a
  // different stream leaves the other slots' realizations unchanged.
  for (int s = 0; s < c.n_slots; ++s) {
    RandomStream r = RandomStream(42).derive(static_cast<std::uint64_t>(s));
    CHECK(sample_realization(eph, p, s, r).edges == a[s].edges);
  }
  RandomStream other(7);
  const auto flipped = sample_realization(eph, p, 3, other);
  CHECK(flipped.edges != a[3].edges);

  ConstellationConfig one = c;
  one.n_slots = 1;
  const Ephemeris e1 = propagate(one);
  RandomStream r0 = RandomStream(42).derive(std::uint64_t{0});
  CHECK(realization_sequence(e1, p, 42)[0].edges == sample_realization(e1, p, 0, r0).edges);
}

TEST_CASE("coupled sampling is monotone in threshold and survival") {
  const ConstellationConfig c = toy(8, 8, 4);
  const Ephemeris eph = propagate(c);
  for (int s = 0; s < c.n_slots; ++s) {
    std::vector<Edge> prev;
    for (double th : {2e-4, 5e-4, 1e-3, 0.12}) {
      LinkParams p;
      p.rate_threshold_rad_s = th;
      p.survival_prob = 0.8;
      RandomStream r(17);
      const auto e = sample_realization(eph, p, s, r).edges;
      CHECK(std::includes(e.begin(), e.end(), prev.begin(), prev.end()));
      prev = e;
    }
    prev.clear();
    for (double q : {0.2, 0.5, 0.9, 1.0}) {
      LinkParams p;
      p.survival_prob = q;
      RandomStream r(23);
      const auto e = sample_realization(eph, p, s, r).edges;
      CHECK(std::includes(e.begin(), e.end(), prev.begin(), prev.end()));
      prev = e;
    }
  }
}

TEST_CASE("link parameter validation") {
  LinkParams p;
  p.survival_prob = 1.2;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.rate_threshold_rad_s = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.isl_rate_bps = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK(seam_policy_from_string("hard-disable") == SeamPolicy::hard_disable);
  CHECK(to_string(SeamPolicy::angular_rate_test) == "angular-rate-test");
}
