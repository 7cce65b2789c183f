#include "leomoe/experiment.hpp"

namespace leomoe {

Experiment::Experiment(Scenario scenario)
    : scenario_(std::move(scenario)),
      eph_(std::make_unique<Ephemeris>(propagate(scenario_.constellation))),
      model_(std::make_unique<TopologyModel>(*eph_, scenario_.links)),
      subnets_(ring_partition(scenario_.constellation, scenario_.moe.layers,
                              scenario_.moe.experts, scenario_.moe.remainder)),
      layer_models_(scenario_.layer_models()),
      profile_(scenario_.compute_profile()) {}

std::vector<LayerRoute> Experiment::central_routes() const {
  return central_gateway_routes(config(), subnets_, profile_.expert_s() + profile_.gateway_s());
}

std::vector<ExpectedPathLatencies> Experiment::expected_latencies(std::uint64_t seed) const {
  ExpectedLatencyOptions opts;
  opts.n_survival_samples = scenario_.eval.n_survival_samples;
  opts.policy = scenario_.eval.policy;
  opts.penalty_cap_s = scenario_.eval.penalty_cap_s;
  const std::vector<LayerRoute> routes = central_routes();
  return expected_path_latencies(*model_, scenario_.token, routes, opts,
                                 RandomStream(seed).derive("survival").derive("planning"));
}

PlacementPlan Experiment::plan(Strategy strategy, std::uint64_t seed) const {
  if (strategy == Strategy::spacemoe) return plan(strategy, seed, expected_latencies(seed));
  return plan(strategy, seed, {});
}

PlacementPlan Experiment::plan(Strategy strategy, std::uint64_t seed,
                               std::span<const ExpectedPathLatencies> latencies) const {
  RandomStream stream = RandomStream(seed).derive("baselines").derive(to_string(strategy));
  PlacementPlan p;
  const int L = scenario_.moe.layers, I = scenario_.moe.experts;
  switch (strategy) {
    case Strategy::spacemoe: {
      std::vector<std::vector<double>> probs;
      for (const ActivationModel& m : layer_models_) probs.push_back(m.activation_probs());
      p = spacemoe_plan(config(), subnets_, probs, latencies, seed);
      break;
    }
    case Strategy::rand_place: p = baseline_rand_place(config(), L, I, stream); break;
    case Strategy::rand_intra: p = baseline_rand_intra(subnets_, I, stream); break;
    case Strategy::rand_intra_cg: p = baseline_rand_intra_cg(config(), subnets_, I, stream); break;
  }
  p.seed = seed;
  return p;
}

LatencyReport Experiment::evaluate(const PlacementPlan& plan, int n_trials,
                                   std::uint64_t seed) const {
  if (plan.n_layers() != scenario_.moe.layers)
    throw ConfigError("plan has " + std::to_string(plan.n_layers()) + " layers, scenario has " +
                      std::to_string(scenario_.moe.layers));
  for (const LayerPlacement& lp : plan.layers)
    if (static_cast<int>(lp.experts.size()) != scenario_.moe.experts)
      throw ConfigError("plan has " + std::to_string(lp.experts.size()) +
                        " experts per layer, scenario has " +
                        std::to_string(scenario_.moe.experts));
  EvalOptions opts;
  opts.n_trials = n_trials;
  opts.seed = seed;
  opts.policy = scenario_.eval.policy;
  opts.penalty_cap_s = scenario_.eval.penalty_cap_s;
  opts.sampler = scenario_.moe.sampler;
  try {
    return Evaluator(*model_, scenario_.token, plan, layer_models_, profile_, opts).run();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("plan does not fit the scenario: ") + e.what());
  }
}

std::vector<SweepRow> sweep(const Scenario& scenario, const SweepSpec& spec,
                            std::span<const Strategy> strategies, int n_trials,
                            std::uint64_t seed) {
  if (spec.values.empty()) throw ConfigError("sweep " + to_string(spec.axis) + ": empty grid");
  std::vector<SweepRow> rows;
  for (double value : spec.values) {
    const Experiment exp(with_axis(scenario, spec.axis, value));
    for (Strategy s : strategies)
      rows.push_back({spec.axis, value, exp.evaluate(exp.plan(s, seed), n_trials, seed)});
  }
  return rows;
}

}  // namespace leomoe
