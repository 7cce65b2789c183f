#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "leomoe/activation.hpp"
#include "leomoe/placement.hpp"
#include "leomoe/routing.hpp"
#include "leomoe/topology.hpp"

namespace leomoe {

/// Onboard compute model. Latencies are workload / throughput; experts on a
/// satellite hosting several of them share it with parallelism eta.
struct ComputeProfile {
  double flops_per_expert = 6.9e7;
  double flops_per_gateway = 1.4e8;
  double flops_per_sec = 7.28e9;
  double parallelism = 1.0;
  /// Optional per-satellite parallelism, indexed by node id.
  std::vector<double> parallelism_per_node;
  int max_experts_per_sat = 1;

  void validate() const;
  double expert_s() const;
  double gateway_s() const;
  double eta(NodeId s) const;

  /// Per-token, per-layer workload derived from one forward pass: the pass
  /// is divided by its sequence length and the layer count, half goes to
  /// the gateway and the other half is split across the K active experts.
  static ComputeProfile from_forward_pass(double forward_pass_flops, int sequence_length,
                                          int layers, int k, double flops_per_sec);
};

double compute_latency(const ComputeProfile& profile, double workload_flops);

/// Latency of the route between two satellites in one realization.
using LegLatency = std::function<double(NodeId from, NodeId to)>;

LegLatency legs_from(const DistanceMatrix& dm);

/// Slowest activated expert: max over `active` of
/// D(gateway, s) + T_ex + D(s, next gateway) + T_ga. Infinite when any leg
/// of an active expert is unreachable.
double layer_latency_sample(const PlacementPlan& plan, int layer_index, std::span<const int> active,
                            const LegLatency& legs, const ComputeProfile& profile,
                            const ConstellationConfig& config);

/// Routing latency plus (q / eta) expert compute plus gateway compute.
/// Throws std::invalid_argument unless 0 <= q <= max_experts_per_sat.
double multi_expert_effective_latency(const ComputeProfile& profile, NodeId s,
                                      double routing_latency, int q_active);

/// Bottleneck over the satellites hosting at least one active expert, where
/// each satellite's compute grows with its number of active experts.
double multi_expert_layer_latency(const PlacementPlan& plan, int layer_index,
                                  std::span<const int> active, const LegLatency& legs,
                                  const ComputeProfile& profile,
                                  const ConstellationConfig& config);

struct EvalOptions {
  int n_trials = 500;
  std::uint64_t seed = 1;
  DisconnectPolicy policy = DisconnectPolicy::skip;
  double penalty_cap_s = 10.0;
  SamplerKind sampler = SamplerKind::automatic;
};

struct TrialResult {
  int slot = 0;
  std::vector<double> layer_latency;
  double e2e = 0.0;
  bool disconnected = false;
  std::vector<std::vector<int>> active;  // activated experts per layer
};

struct LayerStats {
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct LatencyReport {
  std::string strategy;
  std::uint64_t seed = 0;
  int n_trials = 0;
  int n_used = 0;  // trials contributing to the statistics
  std::vector<LayerStats> per_layer;
  double e2e_mean = 0.0;
  double e2e_stddev = 0.0;
  double e2e_min = 0.0;
  double e2e_max = 0.0;
  double disconnect_fraction = 0.0;
  std::vector<double> trial_e2e;  // per used trial, in trial order

  double e2e_stderr() const;
};

/// Monte-Carlo emulation of layer-wise token propagation for one plan.
///
/// Trial t draws its slot from root/"topology"/t, its survival realization
/// from root/"survival"/t and the activated set of layer l from
/// root/"activation"/t/l, so trials are independent of each other and of
/// the plan: two plans evaluated with one seed see identical randomness.
class Evaluator {
 public:
  Evaluator(const TopologyModel& model, TokenParams token, PlacementPlan plan,
            std::vector<ActivationModel> layer_models, ComputeProfile profile,
            EvalOptions options);

  const PlacementPlan& plan() const { return plan_; }

  TrialResult trial(std::uint64_t index) const;
  LatencyReport run() const;

 private:
  const std::vector<double>& costs(int slot) const;

  const TopologyModel* model_;
  TokenParams token_;
  PlacementPlan plan_;
  std::vector<TopKSampler> samplers_;
  ComputeProfile profile_;
  EvalOptions options_;
  Graph graph_;
  mutable std::vector<std::vector<double>> cost_cache_;
};

/// Statistics over the trial results. Disconnected trials are counted in
/// disconnect_fraction and, unless `keep_disconnected` (penalty policy, where
/// their latencies are already capped), left out of the statistics.
LatencyReport summarize(std::span<const TrialResult> trials, std::string strategy,
                        std::uint64_t seed, int n_layers, bool keep_disconnected = false);

}  // namespace leomoe
