#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "leomoe/activation.hpp"
#include "leomoe/constellation.hpp"
#include "leomoe/rng.hpp"
#include "leomoe/routing.hpp"

namespace leomoe {

/// Thrown when a constellation cannot host the requested model layout.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RemainderPolicy {
  relay_only,      // rows beyond L * y_span belong to no subnet
  append_to_last,  // those rows join the last subnet
};

std::string to_string(RemainderPolicy p);
RemainderPolicy remainder_policy_from_string(const std::string& s);

/// Satellites of one layer: every plane, rows [(l-1)*y_span, l*y_span).
struct SubnetSpec {
  int layer = 1;
  std::vector<GridCoord> nodes;
  int y_span = 1;
};

/// Splits the constellation into L bands along the in-plane ring. Throws
/// InfeasibleError unless N_y >= L and N_x * floor(N_y / L) >= I + 1.
std::vector<SubnetSpec> ring_partition(const ConstellationConfig& config, int layers, int experts,
                                       RemainderPolicy remainder = RemainderPolicy::relay_only);

/// Central gateway of layer `layer` (1-based):
/// (floor(N_x / 2), (layer - 1) * y_span + floor((y_span - 1) / 2)).
GridCoord gateway_position(const ConstellationConfig& config, int layers, int layer);

enum class Strategy { spacemoe, rand_place, rand_intra, rand_intra_cg };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);
inline constexpr Strategy kAllStrategies[] = {Strategy::spacemoe, Strategy::rand_intra_cg,
                                              Strategy::rand_intra, Strategy::rand_place};

struct LayerPlacement {
  GridCoord gateway;
  std::vector<GridCoord> experts;  // experts[i] hosts expert i
};

/// Gateway and expert hosts of every layer. Layer l's experts send their
/// outputs to layer l+1's gateway; the last layer wraps to the first.
struct PlacementPlan {
  Strategy strategy = Strategy::spacemoe;
  std::uint64_t seed = 0;
  std::vector<LayerPlacement> layers;

  int n_layers() const { return static_cast<int>(layers.size()); }
  const GridCoord& next_gateway(int layer_index) const {
    return layers[static_cast<std::size_t>((layer_index + 1) % n_layers())].gateway;
  }
};

/// Checks host counts per satellite (at most `max_per_sat` experts, never
/// both a gateway and an expert, one gateway per satellite), that every
/// coordinate exists, and, when subnets are given, subnet membership.
/// Throws std::invalid_argument describing the first violation.
void validate_plan(const PlacementPlan& plan, const ConstellationConfig& config,
                   std::span<const SubnetSpec> subnets = {}, int max_per_sat = 1);

/// Activation-ordered placement: experts by descending probability (ties by
/// index) onto candidates by ascending expected latency (ties by node id).
/// Returns the host of each expert. Throws InfeasibleError when fewer than I
/// candidates have finite latency.
std::vector<GridCoord> optimal_expert_placement(std::span<const double> probs,
                                                const ExpectedPathLatencies& latencies,
                                                const ConstellationConfig& config);

struct BruteForceResult {
  std::vector<int> rank_of_expert;  // latency rank (0-based) of each expert
  double objective = 0.0;
};

/// Exhaustive search over the I! assignments of experts to the I given
/// latency ranks; each objective is the exact expectation of the slowest
/// active latency, summed over all K-subsets. Ties resolve to the
/// lexicographically first assignment. Throws std::invalid_argument for I > 8.
BruteForceResult brute_force_placement(const ActivationModel& model,
                                       std::span<const double> sorted_latencies);

/// Exact objective of a given assignment by enumerating every K-subset.
double enumerated_layer_latency(const ActivationModel& model, std::span<const int> rank_of_expert,
                                std::span<const double> sorted_latencies);

/// Gateways and experts drawn without replacement over the whole
/// constellation; the first L draws become the gateways of layers 1..L.
PlacementPlan baseline_rand_place(const ConstellationConfig& config, int layers, int experts,
                                  RandomStream& stream);

/// Per subnet, gateway and experts drawn without replacement from its nodes.
PlacementPlan baseline_rand_intra(std::span<const SubnetSpec> subnets, int experts,
                                  RandomStream& stream);

/// Central gateway per subnet, experts drawn from the remaining subnet nodes.
PlacementPlan baseline_rand_intra_cg(const ConstellationConfig& config,
                                     std::span<const SubnetSpec> subnets, int experts,
                                     RandomStream& stream);

/// Candidate routes of the central-gateway layout: subnet nodes minus the
/// gateway, with the given per-path compute latency.
std::vector<LayerRoute> central_gateway_routes(const ConstellationConfig& config,
                                               std::span<const SubnetSpec> subnets,
                                               double compute_s);

/// Full activation-aware plan from per-layer activation probabilities and
/// expected latencies computed for central_gateway_routes.
PlacementPlan spacemoe_plan(const ConstellationConfig& config, std::span<const SubnetSpec> subnets,
                            std::span<const std::vector<double>> layer_probs,
                            std::span<const ExpectedPathLatencies> latencies, std::uint64_t seed);

}  // namespace leomoe
