#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "leomoe/activation.hpp"
#include "leomoe/constellation.hpp"
#include "leomoe/evaluator.hpp"
#include "leomoe/placement.hpp"
#include "leomoe/routing.hpp"
#include "leomoe/topology.hpp"

namespace leomoe {

/// Malformed or invalid configuration text.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File that cannot be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimal INI document: `[section]` headers, `key = value` lines, and
/// comments introduced by '#' or ';' at the start of a line or after
/// whitespace. Keys are unique within a section.
struct IniEntry {
  std::string value;
  int line = 0;
  int column = 0;  // 1-based column of the value
};

struct IniSection {
  std::string name;
  int line = 0;
  std::map<std::string, IniEntry> entries;
  std::vector<std::string> order;  // keys as they appear
};

struct IniDocument {
  std::string source;  // file name used in messages
  std::vector<IniSection> sections;

  const IniSection* find(const std::string& name) const;
};

/// Throws ConfigError "source:line:column: message".
IniDocument parse_ini(const std::string& text, const std::string& source = "<input>");

struct MoeParams {
  int layers = 0;
  int experts = 0;
  int k = 0;
  std::vector<double> weights;  // shared by every layer
  std::string trace_path;       // alternative to weights, resolved path
  SamplerKind sampler = SamplerKind::automatic;
  RemainderPolicy remainder = RemainderPolicy::relay_only;
};

struct EvalParams {
  int n_trials = 500;
  int n_survival_samples = 100;
  std::uint64_t seed = 1;
  DisconnectPolicy policy = DisconnectPolicy::skip;
  double penalty_cap_s = 10.0;
};

struct ComputeParams {
  double flops_per_sec = 7.28e9;
  double forward_pass_flops = 36.3e12;
  int sequence_length = 4096;
  double flops_per_expert = -1.0;   // negative: derived from the forward pass
  double flops_per_gateway = -1.0;  // negative: derived from the forward pass
  double parallelism = 1.0;
  int max_experts_per_sat = 1;
};

struct Scenario {
  ConstellationConfig constellation;
  LinkParams links;
  TokenParams token;
  MoeParams moe;
  ComputeParams compute;
  EvalParams eval;
  /// Per-layer weights fitted from the trace (empty when weights are given).
  std::vector<std::vector<double>> trace_weights;

  /// Throws ConfigError for invalid fields and InfeasibleError when the
  /// constellation cannot host the layer partition.
  void validate() const;

  ComputeProfile compute_profile() const;
  std::vector<ActivationModel> layer_models() const;
};

/// Parses and validates a scenario. Relative trace paths are resolved
/// against the scenario's directory.
Scenario parse_scenario(const std::string& text, const std::string& source = "<input>",
                        const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

/// Every field with defaults filled in, in the same grammar.
std::string resolved_scenario_text(const Scenario& scenario);

/// One axis of a parameter sweep.
enum class SweepAxis { altitude_km, n_planes, sats_per_plane, survival_prob, rate_threshold_rad_s };

std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);

struct SweepSpec {
  SweepAxis axis;
  std::vector<double> values;
};

/// Sweep grid: one section per axis, each with `values = a, b, c`.
/// Throws ConfigError on an empty grid.
std::vector<SweepSpec> parse_sweep_grid(const std::string& text,
                                        const std::string& source = "<input>");

/// Copy of the scenario with one axis set to `value`.
Scenario with_axis(const Scenario& scenario, SweepAxis axis, double value);

}  // namespace leomoe
