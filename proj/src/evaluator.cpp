#include "leomoe/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace leomoe {

void ComputeProfile::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("compute profile: " + m); };
  if (!(flops_per_expert >= 0.0)) fail("flops_per_expert must be >= 0");
  if (!(flops_per_gateway >= 0.0)) fail("flops_per_gateway must be >= 0");
  if (!(flops_per_sec > 0.0)) fail("flops_per_sec must be > 0");
  if (!(parallelism >= 1.0)) fail("parallelism must be >= 1");
  for (double eta : parallelism_per_node)
    if (!(eta >= 1.0)) fail("per-node parallelism must be >= 1");
  if (max_experts_per_sat < 1) fail("max_experts_per_sat must be >= 1");
}

double ComputeProfile::expert_s() const { return flops_per_expert / flops_per_sec; }
double ComputeProfile::gateway_s() const { return flops_per_gateway / flops_per_sec; }

double ComputeProfile::eta(NodeId s) const {
  if (parallelism_per_node.empty()) return parallelism;
  return parallelism_per_node.at(static_cast<std::size_t>(s));
}

ComputeProfile ComputeProfile::from_forward_pass(double forward_pass_flops, int sequence_length,
                                                 int layers, int k, double flops_per_sec) {
  if (!(forward_pass_flops > 0.0) || sequence_length < 1 || layers < 1 || k < 1)
    throw std::invalid_argument("from_forward_pass: positive inputs required");
  const double per_layer = forward_pass_flops / sequence_length / layers;
  ComputeProfile p;
  p.flops_per_gateway = 0.5 * per_layer;
  p.flops_per_expert = 0.5 * per_layer / k;
  p.flops_per_sec = flops_per_sec;
  return p;
}

double compute_latency(const ComputeProfile& profile, double workload_flops) {
  if (workload_flops < 0.0) throw std::invalid_argument("compute_latency: negative workload");
  return workload_flops / profile.flops_per_sec;
}

LegLatency legs_from(const DistanceMatrix& dm) {
  return [&dm](NodeId from, NodeId to) { return dm.at(from, to); };
}

namespace {

void check_active(const PlacementPlan& plan, int layer_index, std::span<const int> active) {
  if (layer_index < 0 || layer_index >= plan.n_layers())
    throw std::invalid_argument("layer index out of range");
  const int n = static_cast<int>(plan.layers[layer_index].experts.size());
  for (int i : active)
    if (i < 0 || i >= n) throw std::invalid_argument("activated expert out of range");
}

}  // namespace

double layer_latency_sample(const PlacementPlan& plan, int layer_index, std::span<const int> active,
                            const LegLatency& legs, const ComputeProfile& profile,
                            const ConstellationConfig& config) {
  check_active(plan, layer_index, active);
  const LayerPlacement& lp = plan.layers[layer_index];
  const NodeId gw = config.id(lp.gateway);
  const NodeId next = config.id(plan.next_gateway(layer_index));
  const double compute = profile.expert_s() + profile.gateway_s();
  double worst = 0.0;
  for (int i : active) {
    const NodeId s = config.id(lp.experts[i]);
    worst = std::max(worst, path_latency(legs(gw, s), legs(s, next), compute));
  }
  return worst;
}

double multi_expert_effective_latency(const ComputeProfile& profile, NodeId s,
                                      double routing_latency, int q_active) {
  if (q_active < 0 || q_active > profile.max_experts_per_sat)
    throw std::invalid_argument("multi_expert_effective_latency: q = " + std::to_string(q_active) +
                                " outside [0, " + std::to_string(profile.max_experts_per_sat) +
                                "]");
  return routing_latency + q_active / profile.eta(s) * profile.expert_s() + profile.gateway_s();
}

double multi_expert_layer_latency(const PlacementPlan& plan, int layer_index,
                                  std::span<const int> active, const LegLatency& legs,
                                  const ComputeProfile& profile,
                                  const ConstellationConfig& config) {
  check_active(plan, layer_index, active);
  const LayerPlacement& lp = plan.layers[layer_index];
  const NodeId gw = config.id(lp.gateway);
  const NodeId next = config.id(plan.next_gateway(layer_index));
  std::map<NodeId, int> load;
  for (int i : active) ++load[config.id(lp.experts[i])];
  double worst = 0.0;
  for (const auto& [s, q] : load)
    worst = std::max(worst,
                     multi_expert_effective_latency(profile, s, legs(gw, s) + legs(s, next), q));
  return worst;
}

double LatencyReport::e2e_stderr() const {
  return n_used > 0 ? e2e_stddev / std::sqrt(static_cast<double>(n_used)) : 0.0;
}

Evaluator::Evaluator(const TopologyModel& model, TokenParams token, PlacementPlan plan,
                     std::vector<ActivationModel> layer_models, ComputeProfile profile,
                     EvalOptions options)
    : model_(&model),
      token_(token),
      plan_(std::move(plan)),
      profile_(std::move(profile)),
      options_(options),
      graph_(model.n_nodes(), model.candidates()),
      cost_cache_(static_cast<std::size_t>(model.n_slots())) {
  profile_.validate();
  if (options_.n_trials < 1) throw std::invalid_argument("evaluator: n_trials must be >= 1");
  if (layer_models.size() != plan_.layers.size())
    throw std::invalid_argument("evaluator: one activation model per layer required");
  for (std::size_t l = 0; l < layer_models.size(); ++l) {
    if (layer_models[l].n_experts() != static_cast<int>(plan_.layers[l].experts.size()))
      throw std::invalid_argument("evaluator: layer " + std::to_string(l + 1) +
                                  " expert count differs from its activation model");
    samplers_.emplace_back(layer_models[l], options_.sampler);
  }
  validate_plan(plan_, model.config(), {}, profile_.max_experts_per_sat);
}

const std::vector<double>& Evaluator::costs(int slot) const {
  auto& c = cost_cache_[static_cast<std::size_t>(slot)];
  if (c.empty()) c = slot_hop_costs(*model_, token_, slot);
  return c;
}

TrialResult Evaluator::trial(std::uint64_t index) const {
  const ConstellationConfig& config = model_->config();
  const RandomStream root(options_.seed);
  TrialResult r;
  RandomStream topo = root.derive("topology").derive(index);
  r.slot = static_cast<int>(topo.uniform_index(static_cast<std::uint64_t>(model_->n_slots())));
  RandomStream survival = root.derive("survival").derive(index);
  std::vector<char> alive;
  model_->sample_alive(r.slot, survival, alive);

  const int L = plan_.n_layers();
  const RandomStream act = root.derive("activation").derive(index);
  std::map<NodeId, std::vector<NodeId>> targets;
  for (int l = 0; l < L; ++l) {
    RandomStream draws = act.derive(static_cast<std::uint64_t>(l + 1));
    r.active.push_back(samplers_[l].sample(draws));
    const NodeId gw = config.id(plan_.layers[l].gateway);
    const NodeId next = config.id(plan_.next_gateway(l));
    for (int i : r.active.back()) {
      const NodeId s = config.id(plan_.layers[l].experts[i]);
      targets[gw].push_back(s);
      targets[next].push_back(s);
    }
  }
  const std::vector<double>& c = costs(r.slot);
  std::map<NodeId, ShortestPathTree> trees;
  for (auto& [src, t] : targets) {
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    trees.emplace(src, shortest_paths(graph_, c, src, alive, t));
  }
  // Gateways are the only sources; a leg from an expert uses the tree of
  // the gateway it reaches.
  const LegLatency legs = [&trees](NodeId from, NodeId to) {
    auto it = trees.find(from);
    if (it != trees.end()) return it->second.dist[to];
    return trees.at(to).dist[from];
  };

  r.layer_latency.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    double v = profile_.max_experts_per_sat > 1
                   ? multi_expert_layer_latency(plan_, l, r.active[l], legs, profile_, config)
                   : layer_latency_sample(plan_, l, r.active[l], legs, profile_, config);
    if (v == kUnreachable) {
      r.disconnected = true;
      if (options_.policy == DisconnectPolicy::penalty) v = options_.penalty_cap_s;
    }
    r.layer_latency[l] = v;
    r.e2e += v;
  }
  return r;
}

LatencyReport Evaluator::run() const {
  std::vector<TrialResult> trials;
  trials.reserve(static_cast<std::size_t>(options_.n_trials));
  for (int t = 0; t < options_.n_trials; ++t) trials.push_back(trial(static_cast<std::uint64_t>(t)));
  return summarize(trials, to_string(plan_.strategy), options_.seed, plan_.n_layers(),
                   options_.policy == DisconnectPolicy::penalty);
}

LatencyReport summarize(std::span<const TrialResult> trials, std::string strategy,
                        std::uint64_t seed, int n_layers, bool keep_disconnected) {
  LatencyReport rep;
  rep.strategy = std::move(strategy);
  rep.seed = seed;
  rep.n_trials = static_cast<int>(trials.size());
  rep.per_layer.resize(static_cast<std::size_t>(n_layers));
  std::vector<double> sum(n_layers, 0.0), sq(n_layers, 0.0);
  std::vector<double> lo(n_layers, kUnreachable), hi(n_layers, 0.0);
  std::size_t disconnected = 0;
  for (const TrialResult& t : trials) {
    if (t.disconnected) {
      ++disconnected;
      if (!keep_disconnected) continue;
    }
    rep.trial_e2e.push_back(t.e2e);
    for (int l = 0; l < n_layers; ++l) {
      const double v = t.layer_latency[l];
      sum[l] += v;
      lo[l] = std::min(lo[l], v);
      hi[l] = std::max(hi[l], v);
    }
  }
  rep.n_used = static_cast<int>(rep.trial_e2e.size());
  rep.disconnect_fraction =
      trials.empty() ? 0.0 : static_cast<double>(disconnected) / trials.size();
  if (rep.n_used == 0) {
    rep.e2e_mean = rep.e2e_stddev = rep.e2e_min = rep.e2e_max = kUnreachable;
    for (LayerStats& s : rep.per_layer) s = {kUnreachable, kUnreachable, kUnreachable, kUnreachable};
    return rep;
  }
  const double n = rep.n_used;
  for (int l = 0; l < n_layers; ++l) rep.per_layer[l].mean = sum[l] / n;
  for (const TrialResult& t : trials) {
    if (t.disconnected && !keep_disconnected) continue;
    for (int l = 0; l < n_layers; ++l) {
      const double d = t.layer_latency[l] - rep.per_layer[l].mean;
      sq[l] += d * d;
    }
  }
  for (int l = 0; l < n_layers; ++l) {
    rep.per_layer[l].stddev = rep.n_used > 1 ? std::sqrt(sq[l] / (n - 1)) : 0.0;
    rep.per_layer[l].min = lo[l];
    rep.per_layer[l].max = hi[l];
  }
  double total = 0.0;
  for (double v : rep.trial_e2e) total += v;
  rep.e2e_mean = total / n;
  double var = 0.0;
  for (double v : rep.trial_e2e) var += (v - rep.e2e_mean) * (v - rep.e2e_mean);
  rep.e2e_stddev = rep.n_used > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  rep.e2e_min = *std::min_element(rep.trial_e2e.begin(), rep.trial_e2e.end());
  rep.e2e_max = *std::max_element(rep.trial_e2e.begin(), rep.trial_e2e.end());
  return rep;
}

}  // namespace leomoe
