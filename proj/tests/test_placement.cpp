#include <doctest.h>

#include <map>
#include <numeric>
#include <set>

#include "leomoe/placement.hpp"
#include "oracles.hpp"

using namespace leomoe;

namespace {

ConstellationConfig grid(int nx, int ny) {
  ConstellationConfig c;
  c.n_planes = nx;
  c.sats_per_plane = ny;
  return c;
}

ExpectedPathLatencies table(std::vector<NodeId> cands, std::vector<double> values) {
  ExpectedPathLatencies t;
  t.candidates = std::move(cands);
  t.values = std::move(values);
  return t;
}

int draw(RandomStream& r, int lo, int hi) {
  return lo + static_cast<int>(r.uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace

TEST_CASE("ring partition") {
  const auto cfg = grid(5, 8);
  const auto subnets = ring_partition(cfg, 4, 4);
  REQUIRE(subnets.size() == 4);
  std::set<GridCoord> seen;
  for (const auto& s : subnets) {
    CHECK(s.y_span == 2);
    CHECK(s.nodes.size() == 10);
    for (GridCoord c : s.nodes) {
      CHECK(c.y / 2 == s.layer - 1);
      CHECK(seen.insert(c).second);
    }
  }
  CHECK(seen.size() == 40);

  const auto rows = ring_partition(grid(33, 32), 32, 8);
  for (const auto& s : rows) {
    CHECK(s.y_span == 1);
    CHECK(s.nodes.size() == 33);
    for (GridCoord c : s.nodes) CHECK(c.y == s.layer - 1);
  }
  const auto one = ring_partition(grid(3, 8), 1, 2);
  CHECK(one.size() == 1);
  CHECK(one[0].nodes.size() == 24);
}

TEST_CASE("ring partition remainder rows") {
  const auto cfg = grid(4, 10);
  const auto relay = ring_partition(cfg, 3, 3);
  CHECK(relay.back().nodes.size() == 12);
  for (const auto& s : relay)
    for (GridCoord c : s.nodes) CHECK(c.y < 9);
  const auto append = ring_partition(cfg, 3, 3, RemainderPolicy::append_to_last);
  CHECK(append.back().nodes.size() == 16);
  CHECK(remainder_policy_from_string("append-to-last") == RemainderPolicy::append_to_last);
  CHECK(to_string(RemainderPolicy::relay_only) == "relay-only");
  CHECK_THROWS_AS(remainder_policy_from_string("drop"), std::invalid_argument);
}

TEST_CASE("ring partition infeasibility names the inequality") {
  try {
    ring_partition(grid(33, 32), 33, 8);
    FAIL("expected infeasibility");
  } catch (const InfeasibleError& e) {
    CHECK(std::string(e.what()).find("N_y >= L") != std::string::npos);
  }
  try {
    ring_partition(grid(4, 8), 4, 8);
    FAIL("expected infeasibility");
  } catch (const InfeasibleError& e) {
    CHECK(std::string(e.what()).find("I + 1") != std::string::npos);
  }
  CHECK_NOTHROW(ring_partition(grid(4, 8), 4, 7));
}

TEST_CASE("gateway position") {
  const auto cfg = grid(33, 32);
  CHECK(gateway_position(cfg, 32, 1) == GridCoord{16, 0});
  CHECK(gateway_position(cfg, 32, 32) == GridCoord{16, 31});
  CHECK(gateway_position(grid(4, 10), 2, 2) == GridCoord{2, 7});
  for (const auto& s : ring_partition(grid(5, 12), 3, 4)) {
    const GridCoord g = gateway_position(grid(5, 12), 3, s.layer);
    CHECK(std::find(s.nodes.begin(), s.nodes.end(), g) != s.nodes.end());
  }
}

TEST_CASE("optimal placement sorts experts onto latencies") {
  const auto cfg = grid(4, 8);
  // Candidates a, b, c are node ids 5, 6, 9.
  auto hosts = optimal_expert_placement(std::vector<double>{0.9, 0.5, 0.1}, table({5, 6, 9}, {1, 2, 4}), cfg);
  CHECK(hosts == std::vector<GridCoord>{cfg.coord(5), cfg.coord(6), cfg.coord(9)});
  hosts = optimal_expert_placement(std::vector<double>{0.1, 0.9}, table({5, 6}, {2, 1}), cfg);
  CHECK(hosts == std::vector<GridCoord>{cfg.coord(5), cfg.coord(6)});
  // Extra candidates stay unused; ties break by expert index and node id.
  hosts = optimal_expert_placement(std::vector<double>{0.5, 0.5}, table({9, 3, 7}, {1, 1, 0.5}), cfg);
  CHECK(hosts == std::vector<GridCoord>{cfg.coord(7), cfg.coord(3)});
  CHECK_THROWS_AS(optimal_expert_placement(std::vector<double>{0.5, 0.5}, table({1, 2}, {1, kUnreachable}), cfg),
                  InfeasibleError);
}

TEST_CASE("brute force oracle") {
  const ActivationModel m({2, 1}, 1);
  const auto best = brute_force_placement(m, std::vector<double>{1, 3});
  CHECK(best.rank_of_expert == std::vector<int>{0, 1});
  CHECK(best.objective == doctest::Approx(5.0 / 3).epsilon(1e-15));
  CHECK(enumerated_layer_latency(m, std::vector<int>{1, 0}, std::vector<double>{1, 3}) ==
        doctest::Approx(7.0 / 3).epsilon(1e-15));
  const auto tie = brute_force_placement(ActivationModel(std::vector<double>(4, 1.0), 2),
                                         std::vector<double>{1, 2, 3, 4});
  CHECK(tie.rank_of_expert == std::vector<int>{0, 1, 2, 3});
  CHECK_THROWS_AS(brute_force_placement(ActivationModel(std::vector<double>(9, 1.0), 2),
                                        std::vector<double>(9, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("sorted placement attains the exhaustive minimum") {
  RandomStream r(11);
  const auto cfg = grid(4, 8);
  for (int n = 2; n <= 6; ++n)
    for (int k = 1; k <= std::min(3, n); ++k)
      for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> w(static_cast<std::size_t>(n)), tau_raw(static_cast<std::size_t>(n));
        for (double& x : w) x = 0.05 + r.uniform();
        for (double& x : tau_raw) x = r.uniform();
        const ActivationModel model(w, k);
        std::vector<NodeId> cands(static_cast<std::size_t>(n));
        std::iota(cands.begin(), cands.end(), 0);
        const auto hosts = optimal_expert_placement(model.activation_probs(), table(cands, tau_raw), cfg);
        // Convert to rank form over the sorted latencies.
        std::vector<double> sorted = tau_raw;
        std::sort(sorted.begin(), sorted.end());
        std::vector<int> rank(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
          const double v = tau_raw[cfg.id(hosts[i])];
          rank[i] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
        }
        const double obj = enumerated_layer_latency(model, rank, sorted);
        const double best = oracle::brute_force_min(w, k, sorted);
        CHECK(std::abs(obj - best) <= 1e-12);
        CHECK(brute_force_placement(model, sorted).objective <= obj + 1e-12);
      }
}

TEST_CASE("adjacent exchange never increases the objective") {
  RandomStream r(12);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = draw(r, 2, 7), k = draw(r, 1, std::min(3, n));
    std::vector<double> w(static_cast<std::size_t>(n)), tau(static_cast<std::size_t>(n));
    for (double& x : w) x = 0.05 + r.uniform();
    for (double& x : tau) x = r.uniform();
    std::sort(tau.begin(), tau.end());
    // Ranked weights as an arbitrary permutation; swap an inverted adjacent pair.
    std::vector<int> rank(static_cast<std::size_t>(n));
    std::iota(rank.begin(), rank.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(rank[i], rank[draw(r, 0, i)]);
    std::vector<int> at(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) at[rank[i]] = i;
    for (int a = 0; a + 1 < n; ++a) {
      if (w[at[a]] >= w[at[a + 1]]) continue;
      const ActivationModel model(w, k);
      const double before = enumerated_layer_latency(model, rank, tau);
      auto swapped = rank;
      std::swap(swapped[at[a]], swapped[at[a + 1]]);
      CHECK(enumerated_layer_latency(model, swapped, tau) <= before + 1e-12);
    }
  }
}

TEST_CASE("placement is invariant under weight scaling") {
  const auto cfg = grid(4, 8);
  const std::vector<double> w{0.3, 1.2, 0.7, 0.9};
  auto scaled = w;
  for (double& x : scaled) x *= 1e3;
  const auto t = table({1, 2, 3, 4, 5}, {0.4, 0.1, 0.3, 0.2, 0.9});
  CHECK(optimal_expert_placement(ActivationModel(w, 2).activation_probs(), t, cfg) ==
        optimal_expert_placement(ActivationModel(scaled, 2).activation_probs(), t, cfg));
}

TEST_CASE("plan validation") {
  const auto cfg = grid(4, 8);
  const auto subnets = ring_partition(cfg, 2, 3);
  PlacementPlan plan;
  plan.layers = {{{2, 1}, {{0, 0}, {1, 0}, {3, 3}}}, {{2, 5}, {{0, 4}, {1, 4}, {3, 7}}}};
  CHECK_NOTHROW(validate_plan(plan, cfg, subnets));
  auto bad = plan;
  bad.layers[1].experts[0] = {0, 0};
  CHECK_THROWS_AS(validate_plan(bad, cfg), std::invalid_argument);
  CHECK_NOTHROW(validate_plan(bad, cfg, {}, 2));
  bad = plan;
  bad.layers[0].experts[0] = {2, 1};
  CHECK_THROWS_AS(validate_plan(bad, cfg, {}, 3), std::invalid_argument);
  bad = plan;
  bad.layers[0].experts[0] = {0, 6};
  CHECK_NOTHROW(validate_plan(bad, cfg));
  CHECK_THROWS_AS(validate_plan(bad, cfg, subnets), std::invalid_argument);
  bad.layers[0].experts[0] = {4, 0};
  CHECK_THROWS_AS(validate_plan(bad, cfg), std::invalid_argument);
}

TEST_CASE("baselines satisfy plan invariants") {
  const auto cfg = grid(6, 8);
  const auto subnets = ring_partition(cfg, 4, 4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomStream a(seed), b(seed), c(seed);
    const auto place = baseline_rand_place(cfg, 4, 4, a);
    CHECK_NOTHROW(validate_plan(place, cfg));
    const auto intra = baseline_rand_intra(subnets, 4, b);
    CHECK_NOTHROW(validate_plan(intra, cfg, subnets));
    const auto cg = baseline_rand_intra_cg(cfg, subnets, 4, c);
    CHECK_NOTHROW(validate_plan(cg, cfg, subnets));
    for (int l = 0; l < 4; ++l) CHECK(cg.layers[l].gateway == gateway_position(cfg, 4, l + 1));
    RandomStream again(seed);
    CHECK(baseline_rand_place(cfg, 4, 4, again).layers[2].experts == place.layers[2].experts);
  }
  RandomStream r(1);
  CHECK_THROWS_AS(baseline_rand_place(grid(2, 8), 4, 4, r), InfeasibleError);
}

TEST_CASE("random placement is uniform over satellites") {
  const auto cfg = grid(4, 8);
  RandomStream r(13);
  const int reps = 20000, per = 2 * 3;
  std::vector<int> hits(32, 0);
  for (int i = 0; i < reps; ++i) {
    const auto plan = baseline_rand_place(cfg, 2, 2, r);
    for (const auto& lp : plan.layers) {
      ++hits[cfg.id(lp.gateway)];
      for (GridCoord c : lp.experts) ++hits[cfg.id(c)];
    }
  }
  const double p = per / 32.0, mean = reps * p, sigma = std::sqrt(reps * p * (1 - p));
  for (int h : hits) CHECK(std::abs(h - mean) <= 4 * sigma);
}

TEST_CASE("central gateway routes and the activation-aware plan") {
  const auto cfg = grid(5, 8);
  const auto subnets = ring_partition(cfg, 2, 3);
  const auto routes = central_gateway_routes(cfg, subnets, 0.25);
  REQUIRE(routes.size() == 2);
  CHECK(routes[0].gateway == cfg.id(gateway_position(cfg, 2, 1)));
  CHECK(routes[0].next_gateway == routes[1].gateway);
  CHECK(routes[1].next_gateway == routes[0].gateway);
  CHECK(routes[0].candidates.size() == 19);
  CHECK(std::find(routes[0].candidates.begin(), routes[0].candidates.end(), routes[0].gateway) ==
        routes[0].candidates.end());

  std::vector<ExpectedPathLatencies> lat;
  for (const auto& rt : routes) {
    std::vector<double> v;
    for (NodeId id : rt.candidates) v.push_back(1.0 + 0.01 * id);
    lat.push_back(table(rt.candidates, v));
  }
  const std::vector<std::vector<double>> probs{{0.2, 0.9, 0.5}, {0.9, 0.5, 0.2}};
  const auto plan = spacemoe_plan(cfg, subnets, probs, lat, 42);
  CHECK(plan.seed == 42);
  CHECK_NOTHROW(validate_plan(plan, cfg, subnets));
  CHECK(plan.layers[0].experts[1] == cfg.coord(routes[0].candidates[0]));
  CHECK(plan.layers[1].experts[0] == cfg.coord(routes[1].candidates[0]));
}

TEST_CASE("strategy names") {
  for (Strategy s : kAllStrategies) CHECK(strategy_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(strategy_from_string("greedy"), std::invalid_argument);
}
