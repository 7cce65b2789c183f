#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "leomoe/constellation.hpp"
#include "leomoe/rng.hpp"
#include "leomoe/topology.hpp"

namespace leomoe {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct TokenParams {
  int embed_dim = 4096;
  int quant_bits = 16;
  void validate() const;
  double bits() const { return static_cast<double>(embed_dim) * quant_bits; }
};

/// Chord length over the speed of light for two satellites on one orbit shell.
double propagation_latency(double orbit_radius_km, double central_angle_rad);
double transmission_latency(const TokenParams& tok, double rate_bps);

/// Per-hop latency of an existing link. Throws std::invalid_argument when
/// (u, v) is not an edge of the realization.
double hop_latency(const Ephemeris& eph, const LinkParams& params, const TokenParams& tok,
                   GridCoord u, GridCoord v, int slot, const TopologyRealization& realization);

/// Hop latency of every candidate link of the model at one slot.
std::vector<double> slot_hop_costs(const TopologyModel& model, const TokenParams& tok, int slot);

/// Undirected graph in adjacency-array form. Arcs keep the index of the edge
/// they came from so a per-edge cost vector and alive mask can be applied
/// without rebuilding the graph.
class Graph {
 public:
  struct Arc {
    NodeId to;
    std::int32_t edge;
  };

  Graph(int n_nodes, std::span<const Edge> edges);

  int n_nodes() const { return static_cast<int>(offsets_.size()) - 1; }
  std::size_t n_edges() const { return n_edges_; }
  std::span<const Arc> arcs(NodeId u) const {
    return {arcs_.data() + offsets_[u], arcs_.data() + offsets_[u + 1]};
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Arc> arcs_;
  std::size_t n_edges_ = 0;
};

struct ShortestPathTree {
  NodeId source = 0;
  std::vector<double> dist;   // kUnreachable where no path exists
  std::vector<NodeId> pred;   // -1 for the source and unreachable nodes

  /// Node sequence source..target, empty when unreachable.
  std::vector<NodeId> path_to(NodeId target) const;
};

/// Single-source Dijkstra.
///
/// `costs` is indexed by edge, `alive` (optional) masks edges out. When
/// `targets` is non-empty the search stops once every target is settled;
/// distances of settled nodes are final, others may be overestimates.
ShortestPathTree shortest_paths(const Graph& graph, std::span<const double> costs, NodeId source,
                                std::span<const char> alive = {},
                                std::span<const NodeId> targets = {});

/// Convenience form over a realization: costs align with realization.edges.
ShortestPathTree shortest_paths(int n_nodes, const TopologyRealization& realization,
                                std::span<const double> hop_costs, NodeId source);

class DistanceMatrix {
 public:
  DistanceMatrix(int slot, int n_nodes);

  int slot() const { return slot_; }
  int size() const { return n_; }
  double at(NodeId u, NodeId v) const { return entries_[static_cast<std::size_t>(u) * n_ + v]; }
  double& at(NodeId u, NodeId v) { return entries_[static_cast<std::size_t>(u) * n_ + v]; }

 private:
  int slot_;
  int n_;
  std::vector<double> entries_;
};

/// All-pairs latencies from one Dijkstra per source. The two directed
/// estimates of each pair are merged with min() so the result is exactly
/// symmetric.
DistanceMatrix distance_matrix(const Graph& graph, std::span<const double> costs, int slot,
                               std::span<const char> alive = {});
DistanceMatrix distance_matrix(int n_nodes, const TopologyRealization& realization,
                               std::span<const double> hop_costs);

/// compute_s + D(gateway, s) + D(s, next_gateway); infinite legs propagate.
inline double path_latency(double leg_in, double leg_out, double compute_s) {
  return compute_s + leg_in + leg_out;
}
double path_latency(const DistanceMatrix& dm, NodeId gateway, NodeId next_gateway, NodeId s,
                    double compute_s);

enum class DisconnectPolicy {
  skip,     // average over realizations where the path exists
  penalty,  // substitute a capped latency for unreachable samples
};

std::string to_string(DisconnectPolicy p);
DisconnectPolicy disconnect_policy_from_string(const std::string& s);

struct ExpectedLatencyOptions {
  int n_survival_samples = 100;
  bool survival_averaging = true;
  DisconnectPolicy policy = DisconnectPolicy::skip;
  double penalty_cap_s = 10.0;
  /// Slot probabilities; empty means uniform.
  std::vector<double> slot_weights;
};

/// Inputs for one layer: its gateway, the next layer's gateway (the first
/// layer's for the last layer), candidate expert satellites and the compute
/// latency charged on every path.
struct LayerRoute {
  int layer = 1;
  NodeId gateway = 0;
  NodeId next_gateway = 0;
  std::vector<NodeId> candidates;
  double compute_s = 0.0;
};

struct ExpectedPathLatencies {
  int layer = 1;
  std::vector<NodeId> candidates;
  std::vector<double> values;  // kUnreachable when never connected
  int sample_count = 0;
  std::vector<double> alpha;
  /// Fraction of (realization, candidate) samples with an unreachable leg.
  double disconnect_fraction = 0.0;
};

/// Expected path latency of every candidate of every layer, averaged over
/// slots (weights alpha) and survival draws. Survival draws for slot n,
/// sample k come from stream.derive(n).derive(k) and are shared by all
/// layers.
std::vector<ExpectedPathLatencies> expected_path_latencies(const TopologyModel& model,
                                                           const TokenParams& tok,
                                                           std::span<const LayerRoute> layers,
                                                           const ExpectedLatencyOptions& options,
                                                           const RandomStream& stream);

}  // namespace leomoe
