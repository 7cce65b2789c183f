#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "leomoe/constellation.hpp"
#include "leomoe/rng.hpp"

namespace leomoe {

enum class SeamPolicy {
  angular_rate_test,  // seam links are gated like any other candidate
  hard_disable,       // seam links never exist
};

std::string to_string(SeamPolicy p);
SeamPolicy seam_policy_from_string(const std::string& s);

/// Undirected link between two flat node ids, stored with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  auto operator<=>(const Edge&) const = default;
};

inline Edge make_edge(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }

struct LinkParams {
  double rate_threshold_rad_s = 0.12;
  double survival_prob = 0.95;
  double isl_rate_bps = 100e9;
  SeamPolicy seam_policy = SeamPolicy::angular_rate_test;
  /// Per-edge survival probabilities that replace survival_prob.
  std::map<Edge, double> survival_override;

  void validate() const;
  double survival_for(const Edge& e) const;
};

/// Up to four grid neighbors: y +/- 1 on the in-plane ring, x +/- 1 across
/// planes. Under star geometry planes 0 and N_x-1 are also candidates (the
/// seam); under delta geometry the x direction is a ring.
std::vector<GridCoord> candidate_neighbors(GridCoord coord, const ConstellationConfig& config);

/// Every candidate link once, in ascending (u, v) order.
std::vector<Edge> candidate_edges(const ConstellationConfig& config);

/// True when the link crosses the star seam between counter-rotating planes.
bool is_seam_link(GridCoord u, GridCoord v, const ConstellationConfig& config);

/// True when the straight chord between the satellites clears the Earth.
bool clears_earth(const Ephemeris& eph, GridCoord u, GridCoord v, int slot);

/// Mobility gate: seam policy, Earth occlusion, and LOS rate <= threshold.
bool deterministic_feasible(const Ephemeris& eph, const LinkParams& params, GridCoord u,
                            GridCoord v, int slot);

struct TopologyRealization {
  int slot = 0;
  std::vector<Edge> edges;  // ascending order
};

/// Draws one uniform per candidate edge in canonical order (feasible or not)
/// and keeps a feasible edge when the draw falls below its survival
/// probability. Reusing a stream therefore couples realizations across
/// thresholds and survival probabilities.
TopologyRealization sample_realization(const Ephemeris& eph, const LinkParams& params, int slot,
                                       RandomStream& stream);

/// One realization per slot; slot n draws from stream(seed).derive(n).
std::vector<TopologyRealization> realization_sequence(const Ephemeris& eph,
                                                      const LinkParams& params,
                                                      std::uint64_t seed);

/// Cached candidate edges, per-slot feasibility and per-slot central angles.
///
/// Sampling through the model is equivalent to sample_realization but avoids
/// recomputing the geometry for every draw.
class TopologyModel {
 public:
  TopologyModel(const Ephemeris& eph, LinkParams params);

  const Ephemeris& ephemeris() const { return *eph_; }
  const ConstellationConfig& config() const { return eph_->config(); }
  const LinkParams& params() const { return params_; }
  int n_slots() const { return eph_->n_slots(); }
  int n_nodes() const { return eph_->config().n_sats(); }

  const std::vector<Edge>& candidates() const { return candidates_; }
  std::size_t n_candidates() const { return candidates_.size(); }
  bool feasible(int slot, std::size_t edge_index) const {
    return feasible_[static_cast<std::size_t>(slot) * candidates_.size() + edge_index] != 0;
  }
  double angle(int slot, std::size_t edge_index) const {
    return angles_[static_cast<std::size_t>(slot) * candidates_.size() + edge_index];
  }
  double survival(std::size_t edge_index) const { return survival_[edge_index]; }

  /// Alive mask over candidates for one survival draw.
  void sample_alive(int slot, RandomStream& stream, std::vector<char>& alive) const;
  /// Alive mask with every feasible edge kept (no survival failures).
  void feasible_alive(int slot, std::vector<char>& alive) const;

  TopologyRealization sample(int slot, RandomStream& stream) const;
  TopologyRealization to_realization(int slot, const std::vector<char>& alive) const;

 private:
  const Ephemeris* eph_;
  LinkParams params_;
  std::vector<Edge> candidates_;
  std::vector<char> feasible_;
  std::vector<double> angles_;
  std::vector<double> survival_;
};

}  // namespace leomoe
