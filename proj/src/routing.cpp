#include "leomoe/routing.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace leomoe {

void TokenParams::validate() const {
  if (embed_dim < 1) throw std::invalid_argument("token: embed_dim must be >= 1");
  if (quant_bits < 1) throw std::invalid_argument("token: quant_bits must be >= 1");
}

double propagation_latency(double orbit_radius_km, double central_angle_rad) {
  return 2.0 * orbit_radius_km * std::sin(central_angle_rad / 2.0) / kSpeedOfLightKmS;
}

double transmission_latency(const TokenParams& tok, double rate_bps) { return tok.bits() / rate_bps; }

double hop_latency(const Ephemeris& eph, const LinkParams& params, const TokenParams& tok,
                   GridCoord u, GridCoord v, int slot, const TopologyRealization& realization) {
  const auto& config = eph.config();
  const Edge e = make_edge(config.id(u), config.id(v));
  if (!std::binary_search(realization.edges.begin(), realization.edges.end(), e))
    throw std::invalid_argument("hop_latency: (u, v) is not a link of this realization");
  return propagation_latency(config.orbit_radius_km(), central_angle(eph, u, v, slot)) +
         transmission_latency(tok, params.isl_rate_bps);
}

std::vector<double> slot_hop_costs(const TopologyModel& model, const TokenParams& tok, int slot) {
  const double radius = model.config().orbit_radius_km();
  const double tx = transmission_latency(tok, model.params().isl_rate_bps);
  std::vector<double> costs(model.n_candidates());
  for (std::size_t e = 0; e < costs.size(); ++e)
    costs[e] = propagation_latency(radius, model.angle(slot, e)) + tx;
  return costs;
}

Graph::Graph(int n_nodes, std::span<const Edge> edges) : n_edges_(edges.size()) {
  std::vector<std::size_t> degree(static_cast<std::size_t>(n_nodes), 0);
  for (const Edge& e : edges) {
    if (e.u < 0 || e.v < 0 || e.u >= n_nodes || e.v >= n_nodes)
      throw std::invalid_argument("Graph: edge endpoint out of range");
    ++degree[e.u];
    ++degree[e.v];
  }
  offsets_.assign(static_cast<std::size_t>(n_nodes) + 1, 0);
  for (int i = 0; i < n_nodes; ++i) offsets_[i + 1] = offsets_[i] + degree[i];
  arcs_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const Edge& e = edges[k];
    arcs_[fill[e.u]++] = {e.v, static_cast<std::int32_t>(k)};
    arcs_[fill[e.v]++] = {e.u, static_cast<std::int32_t>(k)};
  }
}

std::vector<NodeId> ShortestPathTree::path_to(NodeId target) const {
  std::vector<NodeId> path;
  if (dist[target] == kUnreachable) return path;
  for (NodeId v = target; v != -1; v = pred[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

ShortestPathTree shortest_paths(const Graph& graph, std::span<const double> costs, NodeId source,
                                std::span<const char> alive, std::span<const NodeId> targets) {
  const int n = graph.n_nodes();
  ShortestPathTree tree;
  tree.source = source;
  tree.dist.assign(static_cast<std::size_t>(n), kUnreachable);
  tree.pred.assign(static_cast<std::size_t>(n), -1);
  std::vector<char> settled(static_cast<std::size_t>(n), 0);

  std::vector<char> wanted;
  std::size_t remaining = 0;
  if (!targets.empty()) {
    wanted.assign(static_cast<std::size_t>(n), 0);
    for (NodeId t : targets)
      if (!wanted[t]) {
        wanted[t] = 1;
        ++remaining;
      }
  }

  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  tree.dist[source] = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (settled[u]) continue;
    settled[u] = 1;
    if (!wanted.empty() && wanted[u] && --remaining == 0) break;
    for (const Graph::Arc& arc : graph.arcs(u)) {
      if (!alive.empty() && !alive[arc.edge]) continue;
      const double nd = d + costs[arc.edge];
      if (nd < tree.dist[arc.to]) {
        tree.dist[arc.to] = nd;
        tree.pred[arc.to] = u;
        heap.push({nd, arc.to});
      }
    }
  }
  return tree;
}

ShortestPathTree shortest_paths(int n_nodes, const TopologyRealization& realization,
                                std::span<const double> hop_costs, NodeId source) {
  if (hop_costs.size() != realization.edges.size())
    throw std::invalid_argument("shortest_paths: one cost per realization edge required");
  const Graph graph(n_nodes, realization.edges);
  return shortest_paths(graph, hop_costs, source);
}

DistanceMatrix::DistanceMatrix(int slot, int n_nodes)
    : slot_(slot), n_(n_nodes), entries_(static_cast<std::size_t>(n_nodes) * n_nodes, kUnreachable) {}

DistanceMatrix distance_matrix(const Graph& graph, std::span<const double> costs, int slot,
                               std::span<const char> alive) {
  const int n = graph.n_nodes();
  DistanceMatrix dm(slot, n);
  for (NodeId s = 0; s < n; ++s) {
    const ShortestPathTree tree = shortest_paths(graph, costs, s, alive);
    for (NodeId v = 0; v < n; ++v) dm.at(s, v) = tree.dist[v];
  }
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) {
      const double d = std::min(dm.at(u, v), dm.at(v, u));
      dm.at(u, v) = d;
      dm.at(v, u) = d;
    }
  return dm;
}

DistanceMatrix distance_matrix(int n_nodes, const TopologyRealization& realization,
                               std::span<const double> hop_costs) {
  if (hop_costs.size() != realization.edges.size())
    throw std::invalid_argument("distance_matrix: one cost per realization edge required");
  const Graph graph(n_nodes, realization.edges);
  return distance_matrix(graph, hop_costs, realization.slot);
}

double path_latency(const DistanceMatrix& dm, NodeId gateway, NodeId next_gateway, NodeId s,
                    double compute_s) {
  return path_latency(dm.at(gateway, s), dm.at(s, next_gateway), compute_s);
}

std::string to_string(DisconnectPolicy p) { return p == DisconnectPolicy::skip ? "skip" : "penalty"; }

DisconnectPolicy disconnect_policy_from_string(const std::string& s) {
  if (s == "skip") return DisconnectPolicy::skip;
  if (s == "penalty") return DisconnectPolicy::penalty;
  throw std::invalid_argument("unknown disconnect policy '" + s + "' (expected skip|penalty)");
}

std::vector<ExpectedPathLatencies> expected_path_latencies(const TopologyModel& model,
                                                           const TokenParams& tok,
                                                           std::span<const LayerRoute> layers,
                                                           const ExpectedLatencyOptions& options,
                                                           const RandomStream& stream) {
  const int n_slots = model.n_slots();
  std::vector<double> alpha = options.slot_weights;
  if (alpha.empty()) alpha.assign(static_cast<std::size_t>(n_slots), 1.0 / n_slots);
  if (static_cast<int>(alpha.size()) != n_slots)
    throw std::invalid_argument("expected_path_latencies: one slot weight per slot required");
  const double alpha_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  if (std::abs(alpha_sum - 1.0) > 1e-9 ||
      std::any_of(alpha.begin(), alpha.end(), [](double a) { return a < 0.0; }))
    throw std::invalid_argument("expected_path_latencies: slot weights must be a distribution");
  if (options.survival_averaging && options.n_survival_samples < 1)
    throw std::invalid_argument("expected_path_latencies: n_survival_samples must be >= 1");

  // Sources are gateways; legs toward the next gateway use its tree since
  // the graph is undirected.
  std::map<NodeId, std::vector<NodeId>> targets;
  for (const LayerRoute& layer : layers) {
    for (NodeId src : {layer.gateway, layer.next_gateway}) {
      auto& t = targets[src];
      t.insert(t.end(), layer.candidates.begin(), layer.candidates.end());
    }
  }
  std::vector<NodeId> sources;
  std::map<NodeId, std::size_t> source_index;
  for (auto& [src, t] : targets) {
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    source_index[src] = sources.size();
    sources.push_back(src);
  }

  struct Acc {
    std::vector<double> num, den;
    std::size_t disconnected = 0, total = 0;
  };
  std::vector<Acc> acc(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    acc[l].num.assign(layers[l].candidates.size(), 0.0);
    acc[l].den.assign(layers[l].candidates.size(), 0.0);
  }

  const Graph graph(model.n_nodes(), model.candidates());
  const int samples = options.survival_averaging ? options.n_survival_samples : 1;
  std::vector<char> alive;
  std::vector<ShortestPathTree> trees(sources.size());
  for (int slot = 0; slot < n_slots; ++slot) {
    if (alpha[slot] == 0.0) continue;
    const std::vector<double> costs = slot_hop_costs(model, tok, slot);
    const double w = alpha[slot] / samples;
    const RandomStream slot_stream = stream.derive(static_cast<std::uint64_t>(slot));
    for (int k = 0; k < samples; ++k) {
      if (options.survival_averaging) {
        RandomStream draws = slot_stream.derive(static_cast<std::uint64_t>(k));
        model.sample_alive(slot, draws, alive);
      } else {
        model.feasible_alive(slot, alive);
      }
      for (std::size_t i = 0; i < sources.size(); ++i)
        trees[i] = shortest_paths(graph, costs, sources[i], alive, targets[sources[i]]);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerRoute& layer = layers[l];
        const auto& in = trees[source_index[layer.gateway]].dist;
        const auto& out = trees[source_index[layer.next_gateway]].dist;
        for (std::size_t c = 0; c < layer.candidates.size(); ++c) {
          const NodeId s = layer.candidates[c];
          const double tau = path_latency(in[s], out[s], layer.compute_s);
          ++acc[l].total;
          if (tau != kUnreachable) {
            acc[l].num[c] += w * tau;
            acc[l].den[c] += w;
          } else {
            ++acc[l].disconnected;
            if (options.policy == DisconnectPolicy::penalty) {
              acc[l].num[c] += w * options.penalty_cap_s;
              acc[l].den[c] += w;
            }
          }
        }
      }
    }
  }

  std::vector<ExpectedPathLatencies> out(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    ExpectedPathLatencies& e = out[l];
    e.layer = layers[l].layer;
    e.candidates = layers[l].candidates;
    e.sample_count = n_slots * samples;
    e.alpha = alpha;
    e.values.resize(e.candidates.size());
    for (std::size_t c = 0; c < e.candidates.size(); ++c)
      e.values[c] = acc[l].den[c] > 0.0 ? acc[l].num[c] / acc[l].den[c] : kUnreachable;
    e.disconnect_fraction =
        acc[l].total ? static_cast<double>(acc[l].disconnected) / acc[l].total : 0.0;
  }
  return out;
}

}  // namespace leomoe
