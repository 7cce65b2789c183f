#include "leomoe/placement.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace leomoe {

std::string to_string(RemainderPolicy p) {
  return p == RemainderPolicy::relay_only ? "relay-only" : "append-to-last";
}

RemainderPolicy remainder_policy_from_string(const std::string& s) {
  if (s == "relay-only") return RemainderPolicy::relay_only;
  if (s == "append-to-last") return RemainderPolicy::append_to_last;
  throw std::invalid_argument("unknown remainder policy '" + s +
                              "' (expected relay-only|append-to-last)");
}

std::vector<SubnetSpec> ring_partition(const ConstellationConfig& config, int layers, int experts,
                                       RemainderPolicy remainder) {
  if (layers < 1) throw InfeasibleError("ring partition: need at least one layer");
  if (config.sats_per_plane < layers)
    throw InfeasibleError("ring partition: N_y >= L violated (N_y = " +
                          std::to_string(config.sats_per_plane) +
                          ", L = " + std::to_string(layers) + ")");
  const int span = config.sats_per_plane / layers;
  if (config.n_planes * span < experts + 1)
    throw InfeasibleError("ring partition: N_x * floor(N_y / L) >= I + 1 violated (" +
                          std::to_string(config.n_planes * span) + " < " +
                          std::to_string(experts + 1) + ")");
  std::vector<SubnetSpec> subnets(static_cast<std::size_t>(layers));
  for (int l = 1; l <= layers; ++l) {
    SubnetSpec& s = subnets[static_cast<std::size_t>(l - 1)];
    s.layer = l;
    s.y_span = span;
    const int y_end = (l == layers && remainder == RemainderPolicy::append_to_last)
                          ? config.sats_per_plane
                          : l * span;
    for (int x = 0; x < config.n_planes; ++x)
      for (int y = (l - 1) * span; y < y_end; ++y) s.nodes.push_back({x, y});
  }
  return subnets;
}

GridCoord gateway_position(const ConstellationConfig& config, int layers, int layer) {
  const int span = config.sats_per_plane / layers;
  return {config.n_planes / 2, (layer - 1) * span + (span - 1) / 2};
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::spacemoe: return "spacemoe";
    case Strategy::rand_place: return "rand_place";
    case Strategy::rand_intra: return "rand_intra";
    case Strategy::rand_intra_cg: return "rand_intra_cg";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& s) {
  for (Strategy st : kAllStrategies)
    if (to_string(st) == s) return st;
  throw std::invalid_argument("unknown strategy '" + s +
                              "' (expected spacemoe|rand_place|rand_intra|rand_intra_cg)");
}

void validate_plan(const PlacementPlan& plan, const ConstellationConfig& config,
                   std::span<const SubnetSpec> subnets, int max_per_sat) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("placement plan: " + m); };
  if (plan.layers.empty()) fail("no layers");
  if (!subnets.empty() && subnets.size() != plan.layers.size()) fail("layer count differs from subnets");
  std::vector<int> gateways(static_cast<std::size_t>(config.n_sats()), 0);
  std::vector<int> experts(static_cast<std::size_t>(config.n_sats()), 0);
  const std::size_t n_experts = plan.layers.front().experts.size();
  for (std::size_t l = 0; l < plan.layers.size(); ++l) {
    const LayerPlacement& lp = plan.layers[l];
    const std::string where = "layer " + std::to_string(l + 1);
    if (lp.experts.size() != n_experts) fail(where + " has a different expert count");
    if (!config.contains(lp.gateway)) fail(where + " gateway outside the constellation");
    ++gateways[config.id(lp.gateway)];
    for (GridCoord c : lp.experts) {
      if (!config.contains(c)) fail(where + " expert outside the constellation");
      ++experts[config.id(c)];
    }
    if (!subnets.empty()) {
      const auto& nodes = subnets[l].nodes;
      auto inside = [&](GridCoord c) { return std::find(nodes.begin(), nodes.end(), c) != nodes.end(); };
      if (!inside(lp.gateway)) fail(where + " gateway outside its subnet");
      for (GridCoord c : lp.experts)
        if (!inside(c)) fail(where + " expert outside its subnet");
    }
  }
  for (NodeId id = 0; id < config.n_sats(); ++id) {
    const GridCoord c = config.coord(id);
    const std::string at = "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")";
    if (gateways[id] > 1) fail("satellite " + at + " hosts several gateways");
    if (gateways[id] && experts[id]) fail("satellite " + at + " hosts a gateway and an expert");
    if (experts[id] > max_per_sat) fail("satellite " + at + " hosts too many experts");
  }
}

std::vector<GridCoord> optimal_expert_placement(std::span<const double> probs,
                                                const ExpectedPathLatencies& latencies,
                                                const ConstellationConfig& config) {
  const std::size_t n = probs.size();
  std::vector<std::size_t> cands;
  for (std::size_t c = 0; c < latencies.candidates.size(); ++c)
    if (latencies.values[c] != kUnreachable) cands.push_back(c);
  if (cands.size() < n)
    throw InfeasibleError("expert placement: layer " + std::to_string(latencies.layer) + " has " +
                          std::to_string(cands.size()) + " reachable candidates for " +
                          std::to_string(n) + " experts");
  std::sort(cands.begin(), cands.end(), [&](std::size_t a, std::size_t b) {
    if (latencies.values[a] != latencies.values[b]) return latencies.values[a] < latencies.values[b];
    return latencies.candidates[a] < latencies.candidates[b];
  });
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  std::vector<GridCoord> hosts(n);
  for (std::size_t rank = 0; rank < n; ++rank)
    hosts[order[rank]] = config.coord(latencies.candidates[cands[rank]]);
  return hosts;
}

double enumerated_layer_latency(const ActivationModel& model, std::span<const int> rank_of_expert,
                                std::span<const double> sorted_latencies) {
  const int n = model.n_experts(), k = model.k();
  if (static_cast<int>(rank_of_expert.size()) != n || static_cast<int>(sorted_latencies.size()) != n)
    throw std::invalid_argument("enumerated_layer_latency: size mismatch");
  std::vector<char> mask(static_cast<std::size_t>(n), 0);
  std::fill(mask.begin(), mask.begin() + k, 1);
  double mass = 0.0, weighted = 0.0;
  do {
    double p = 1.0, worst = 0.0;
    for (int i = 0; i < n; ++i)
      if (mask[i]) {
        p *= model.weights()[i];
        worst = std::max(worst, sorted_latencies[rank_of_expert[i]]);
      }
    mass += p;
    weighted += p * worst;
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return weighted / mass;
}

BruteForceResult brute_force_placement(const ActivationModel& model,
                                       std::span<const double> sorted_latencies) {
  const int n = model.n_experts();
  if (n > 8) throw std::invalid_argument("brute_force_placement: limited to I <= 8");
  if (static_cast<int>(sorted_latencies.size()) != n)
    throw std::invalid_argument("brute_force_placement: one latency per expert required");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  BruteForceResult best{perm, enumerated_layer_latency(model, perm, sorted_latencies)};
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double obj = enumerated_layer_latency(model, perm, sorted_latencies);
    if (obj < best.objective - 1e-13 * std::max(1.0, std::abs(best.objective))) best = {perm, obj};
  }
  return best;
}

namespace {

// Partial Fisher-Yates: the first `count` entries become a uniform sample.
template <typename T>
void shuffle_prefix(std::vector<T>& items, std::size_t count, RandomStream& stream) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + stream.uniform_index(items.size() - i);
    std::swap(items[i], items[j]);
  }
}

}  // namespace

PlacementPlan baseline_rand_place(const ConstellationConfig& config, int layers, int experts,
                                  RandomStream& stream) {
  const std::size_t need = static_cast<std::size_t>(layers) * (experts + 1);
  if (need > static_cast<std::size_t>(config.n_sats()))
    throw InfeasibleError("rand_place: " + std::to_string(need) + " sub-models exceed " +
                          std::to_string(config.n_sats()) + " satellites");
  std::vector<GridCoord> pool = build_grid(config);
  shuffle_prefix(pool, need, stream);
  PlacementPlan plan;
  plan.strategy = Strategy::rand_place;
  plan.layers.resize(static_cast<std::size_t>(layers));
  for (int l = 0; l < layers; ++l) plan.layers[l].gateway = pool[l];
  std::size_t next = static_cast<std::size_t>(layers);
  for (int l = 0; l < layers; ++l)
    for (int i = 0; i < experts; ++i) plan.layers[l].experts.push_back(pool[next++]);
  return plan;
}

PlacementPlan baseline_rand_intra(std::span<const SubnetSpec> subnets, int experts,
                                  RandomStream& stream) {
  PlacementPlan plan;
  plan.strategy = Strategy::rand_intra;
  for (const SubnetSpec& s : subnets) {
    if (s.nodes.size() < static_cast<std::size_t>(experts) + 1)
      throw InfeasibleError("rand_intra: subnet " + std::to_string(s.layer) + " too small");
    std::vector<GridCoord> pool = s.nodes;
    shuffle_prefix(pool, static_cast<std::size_t>(experts) + 1, stream);
    plan.layers.push_back({pool[0], {pool.begin() + 1, pool.begin() + 1 + experts}});
  }
  return plan;
}

PlacementPlan baseline_rand_intra_cg(const ConstellationConfig& config,
                                     std::span<const SubnetSpec> subnets, int experts,
                                     RandomStream& stream) {
  PlacementPlan plan;
  plan.strategy = Strategy::rand_intra_cg;
  const int layers = static_cast<int>(subnets.size());
  for (const SubnetSpec& s : subnets) {
    const GridCoord gw = gateway_position(config, layers, s.layer);
    std::vector<GridCoord> pool;
    for (GridCoord c : s.nodes)
      if (c != gw) pool.push_back(c);
    if (pool.size() < static_cast<std::size_t>(experts))
      throw InfeasibleError("rand_intra_cg: subnet " + std::to_string(s.layer) + " too small");
    shuffle_prefix(pool, static_cast<std::size_t>(experts), stream);
    plan.layers.push_back({gw, {pool.begin(), pool.begin() + experts}});
  }
  return plan;
}

std::vector<LayerRoute> central_gateway_routes(const ConstellationConfig& config,
                                               std::span<const SubnetSpec> subnets,
                                               double compute_s) {
  const int layers = static_cast<int>(subnets.size());
  std::vector<LayerRoute> routes;
  for (const SubnetSpec& s : subnets) {
    LayerRoute r;
    r.layer = s.layer;
    const GridCoord gw = gateway_position(config, layers, s.layer);
    r.gateway = config.id(gw);
    r.next_gateway = config.id(gateway_position(config, layers, s.layer % layers + 1));
    for (GridCoord c : s.nodes)
      if (c != gw) r.candidates.push_back(config.id(c));
    std::sort(r.candidates.begin(), r.candidates.end());
    r.compute_s = compute_s;
    routes.push_back(std::move(r));
  }
  return routes;
}

PlacementPlan spacemoe_plan(const ConstellationConfig& config, std::span<const SubnetSpec> subnets,
                            std::span<const std::vector<double>> layer_probs,
                            std::span<const ExpectedPathLatencies> latencies, std::uint64_t seed) {
  if (layer_probs.size() != subnets.size() || latencies.size() != subnets.size())
    throw std::invalid_argument("spacemoe_plan: one probability vector and latency table per layer");
  const int layers = static_cast<int>(subnets.size());
  PlacementPlan plan;
  plan.strategy = Strategy::spacemoe;
  plan.seed = seed;
  for (int l = 0; l < layers; ++l)
    plan.layers.push_back({gateway_position(config, layers, l + 1),
                           optimal_expert_placement(layer_probs[l], latencies[l], config)});
  return plan;
}

}  // namespace leomoe
