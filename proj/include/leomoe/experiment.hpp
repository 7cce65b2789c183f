#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "leomoe/evaluator.hpp"
#include "leomoe/placement.hpp"
#include "leomoe/scenario.hpp"

namespace leomoe {

/// Everything derived from one scenario: ephemeris, feasibility cache, ring
/// partition and per-layer activation models. Plans and reports built from
/// the same Experiment and seed share all randomness.
class Experiment {
 public:
  explicit Experiment(Scenario scenario);

  const Scenario& scenario() const { return scenario_; }
  const ConstellationConfig& config() const { return scenario_.constellation; }
  const Ephemeris& ephemeris() const { return *eph_; }
  const TopologyModel& model() const { return *model_; }
  const std::vector<SubnetSpec>& subnets() const { return subnets_; }
  const std::vector<ActivationModel>& layer_models() const { return layer_models_; }
  const ComputeProfile& profile() const { return profile_; }

  /// Central-gateway routes with T_ex + T_ga charged on every path.
  std::vector<LayerRoute> central_routes() const;

  /// Expected path latencies of the central-gateway candidates; survival
  /// draws come from root/"survival"/"planning".
  std::vector<ExpectedPathLatencies> expected_latencies(std::uint64_t seed) const;

  PlacementPlan plan(Strategy strategy, std::uint64_t seed) const;
  /// Plan for a strategy given precomputed expected latencies (spacemoe only
  /// uses them).
  PlacementPlan plan(Strategy strategy, std::uint64_t seed,
                     std::span<const ExpectedPathLatencies> latencies) const;

  LatencyReport evaluate(const PlacementPlan& plan, int n_trials, std::uint64_t seed) const;

 private:
  Scenario scenario_;
  std::unique_ptr<Ephemeris> eph_;
  std::unique_ptr<TopologyModel> model_;
  std::vector<SubnetSpec> subnets_;
  std::vector<ActivationModel> layer_models_;
  ComputeProfile profile_;
};

struct SweepRow {
  SweepAxis axis;
  double value = 0.0;
  LatencyReport report;
};

/// One report per (value, strategy) cell, values in grid order and
/// strategies in the given order. Every cell uses the same seed.
std::vector<SweepRow> sweep(const Scenario& scenario, const SweepSpec& spec,
                            std::span<const Strategy> strategies, int n_trials,
                            std::uint64_t seed);

}  // namespace leomoe
