#include "leomoe/scenario.hpp"

#include <fmt/format.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace leomoe {

const IniSection* IniDocument::find(const std::string& name) const {
  for (const IniSection& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail_at(const std::string& source, int line, int column, const std::string& msg) {
  throw ConfigError(fmt::format("{}:{}:{}: {}", source, line, column, msg));
}

}  // namespace

IniDocument parse_ini(const std::string& text, const std::string& source) {
  IniDocument doc;
  doc.source = source;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    // Strip comments: '#' or ';' at line start or preceded by whitespace.
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if ((raw[i] == '#' || raw[i] == ';') && (i == 0 || raw[i - 1] == ' ' || raw[i - 1] == '\t')) {
        raw.resize(i);
        break;
      }
    }
    const auto first = raw.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const int col = static_cast<int>(first) + 1;
    if (raw[first] == '[') {
      const auto close = raw.find(']', first);
      if (close == std::string::npos) fail_at(source, line_no, col, "unterminated section header");
      if (!trim(raw.substr(close + 1)).empty())
        fail_at(source, line_no, static_cast<int>(close) + 2, "text after section header");
      const std::string name = trim(raw.substr(first + 1, close - first - 1));
      if (name.empty()) fail_at(source, line_no, col + 1, "empty section name");
      if (doc.find(name)) fail_at(source, line_no, col, "duplicate section [" + name + "]");
      doc.sections.push_back({name, line_no, {}, {}});
      continue;
    }
    const auto eq = raw.find('=', first);
    if (eq == std::string::npos) fail_at(source, line_no, col, "expected 'key = value'");
    if (doc.sections.empty()) fail_at(source, line_no, col, "key outside of any section");
    const std::string key = trim(raw.substr(first, eq - first));
    if (key.empty()) fail_at(source, line_no, col, "missing key before '='");
    const auto vstart = raw.find_first_not_of(" \t\r", eq + 1);
    const std::string value = vstart == std::string::npos ? "" : trim(raw.substr(vstart));
    const int vcol = vstart == std::string::npos ? static_cast<int>(eq) + 2
                                                 : static_cast<int>(vstart) + 1;
    if (value.empty()) fail_at(source, line_no, vcol, "missing value for '" + key + "'");
    IniSection& sec = doc.sections.back();
    if (sec.entries.count(key))
      fail_at(source, line_no, col, "duplicate key '" + key + "' in [" + sec.name + "]");
    sec.entries[key] = {value, line_no, vcol};
    sec.order.push_back(key);
  }
  return doc;
}

namespace {

/// Typed access to the keys of one section; remembers which keys were read
/// so leftovers can be reported as unknown.
class SectionReader {
 public:
  SectionReader(const IniDocument& doc, const std::string& name)
      : source_(doc.source), name_(name), section_(doc.find(name)) {}

  bool has(const std::string& key) const { return section_ && section_->entries.count(key); }

  template <typename T>
  void read(const std::string& key, T& out) {
    const IniEntry* e = entry(key);
    if (e) out = parse<T>(*e, key);
  }

  template <typename T>
  void require(const std::string& key, T& out) {
    if (!has(key)) throw ConfigError(fmt::format("{}: missing required field [{}] {}", source_, name_, key));
    read(key, out);
  }

  std::vector<double> list(const std::string& key) {
    const IniEntry* e = entry(key);
    std::vector<double> out;
    if (!e) return out;
    std::size_t pos = 0;
    while (pos <= e->value.size()) {
      auto comma = e->value.find(',', pos);
      if (comma == std::string::npos) comma = e->value.size();
      const std::string item = trim(e->value.substr(pos, comma - pos));
      const int col = e->column + static_cast<int>(pos);
      if (item.empty()) fail_at(source_, e->line, col, "empty list item in '" + key + "'");
      out.push_back(to_double(item, e->line, col, key));
      pos = comma + 1;
    }
    return out;
  }

  void fail(const std::string& key, const std::string& msg) const {
    const IniEntry& e = section_->entries.at(key);
    fail_at(source_, e.line, e.column, "[" + name_ + "] " + key + ": " + msg);
  }

  void reject_unknown() const {
    if (!section_) return;
    for (const std::string& key : section_->order)
      if (!used_.count(key)) {
        const IniEntry& e = section_->entries.at(key);
        fail_at(source_, e.line, e.column - static_cast<int>(key.size()),
                "unknown key '" + key + "' in [" + name_ + "]");
      }
  }

 private:
  const IniEntry* entry(const std::string& key) {
    if (!has(key)) return nullptr;
    used_.insert(key);
    return &section_->entries.at(key);
  }

  double to_double(const std::string& s, int line, int col, const std::string& key) const {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      fail_at(source_, line, col, "'" + key + "' expects a number, got '" + s + "'");
    return v;
  }

  template <typename T>
  T parse(const IniEntry& e, const std::string& key) const {
    const std::string& s = e.value;
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true") return true;
      if (s == "false") return false;
      fail_at(source_, e.line, e.column, "'" + key + "' expects true or false");
    } else if constexpr (std::is_floating_point_v<T>) {
      return to_double(s, e.line, e.column, key);
    } else {
      T v{};
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size())
        fail_at(source_, e.line, e.column, "'" + key + "' expects an integer, got '" + s + "'");
      return v;
    }
  }

  std::string source_;
  std::string name_;
  const IniSection* section_;
  std::set<std::string> used_;
};

template <typename Enum, typename FromString>
void read_enum(SectionReader& r, const std::string& key, Enum& out, FromString from_string) {
  std::string s;
  r.read(key, s);
  if (s.empty()) return;
  try {
    out = from_string(s);
  } catch (const std::invalid_argument& e) {
    r.fail(key, e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void Scenario::validate() const {
  auto wrap = [](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(fmt::format("[{}] {}", section, e.what()));
    }
  };
  wrap("constellation", [&] { constellation.validate(); });
  wrap("links", [&] { links.validate(); });
  wrap("token", [&] { token.validate(); });
  if (moe.layers < 1) throw ConfigError("[moe] layers must be >= 1");
  if (moe.experts < 1) throw ConfigError("[moe] experts must be >= 1");
  if (moe.k < 1 || moe.k > moe.experts) throw ConfigError("[moe] top_k must lie in [1, experts]");
  if (moe.weights.empty() == trace_weights.empty())
    throw ConfigError("[moe] exactly one of 'weights' and 'trace' is required");
  if (!moe.weights.empty() && static_cast<int>(moe.weights.size()) != moe.experts)
    throw ConfigError(fmt::format("[moe] weights has {} entries, experts = {}", moe.weights.size(),
                                  moe.experts));
  wrap("moe", [&] {
    if (!moe.weights.empty()) ActivationModel(moe.weights, moe.k);
  });
  wrap("compute", [&] { compute_profile().validate(); });
  if (eval.n_trials < 1) throw ConfigError("[eval] trials must be >= 1");
  if (eval.n_survival_samples < 1) throw ConfigError("[eval] survival_samples must be >= 1");
  if (!(eval.penalty_cap_s > 0.0)) throw ConfigError("[eval] penalty_cap_s must be > 0");
  ring_partition(constellation, moe.layers, moe.experts, moe.remainder);
}

ComputeProfile Scenario::compute_profile() const {
  ComputeProfile p;
  if (compute.flops_per_expert < 0.0 || compute.flops_per_gateway < 0.0) {
    const ComputeProfile d = ComputeProfile::from_forward_pass(
        compute.forward_pass_flops, compute.sequence_length, moe.layers, moe.k,
        compute.flops_per_sec);
    p.flops_per_expert = d.flops_per_expert;
    p.flops_per_gateway = d.flops_per_gateway;
  }
  if (compute.flops_per_expert >= 0.0) p.flops_per_expert = compute.flops_per_expert;
  if (compute.flops_per_gateway >= 0.0) p.flops_per_gateway = compute.flops_per_gateway;
  p.flops_per_sec = compute.flops_per_sec;
  p.parallelism = compute.parallelism;
  p.max_experts_per_sat = compute.max_experts_per_sat;
  return p;
}

std::vector<ActivationModel> Scenario::layer_models() const {
  std::vector<ActivationModel> models;
  for (int l = 0; l < moe.layers; ++l)
    models.emplace_back(trace_weights.empty() ? moe.weights : trace_weights[l], moe.k);
  return models;
}

Scenario parse_scenario(const std::string& text, const std::string& source,
                        const std::string& base_dir) {
  const IniDocument doc = parse_ini(text, source);
  static const std::set<std::string> known = {"constellation", "links", "token",
                                              "moe",           "compute", "eval"};
  for (const IniSection& s : doc.sections)
    if (!known.count(s.name))
      fail_at(source, s.line, 1, "unknown section [" + s.name + "]");

  Scenario sc;
  {
    SectionReader r(doc, "constellation");
    ConstellationConfig& c = sc.constellation;
    r.read("n_planes", c.n_planes);
    r.read("sats_per_plane", c.sats_per_plane);
    r.read("altitude_km", c.altitude_km);
    r.read("inclination_deg", c.inclination_deg);
    r.read("phasing", c.phasing);
    r.read("earth_radius_km", c.earth_radius_km);
    r.read("n_slots", c.n_slots);
    r.read("slot_duration_s", c.slot_duration_s);
    read_enum(r, "spread", c.spread, plane_spread_from_string);
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "links");
    LinkParams& l = sc.links;
    r.read("rate_threshold_rad_s", l.rate_threshold_rad_s);
    r.read("survival_prob", l.survival_prob);
    r.read("isl_rate_bps", l.isl_rate_bps);
    read_enum(r, "seam_policy", l.seam_policy, seam_policy_from_string);
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "token");
    r.read("embed_dim", sc.token.embed_dim);
    r.read("quant_bits", sc.token.quant_bits);
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "moe");
    MoeParams& m = sc.moe;
    r.require("layers", m.layers);
    r.require("experts", m.experts);
    r.require("top_k", m.k);
    m.weights = r.list("weights");
    r.read("trace", m.trace_path);
    read_enum(r, "sampler", m.sampler, sampler_kind_from_string);
    read_enum(r, "remainder", m.remainder, remainder_policy_from_string);
    if (!m.weights.empty() && !m.trace_path.empty())
      r.fail("trace", "give either 'weights' or 'trace', not both");
    if (m.weights.empty() && m.trace_path.empty())
      throw ConfigError(fmt::format("{}: missing required field [moe] weights (or trace)", source));
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "compute");
    ComputeParams& c = sc.compute;
    r.read("flops_per_sec", c.flops_per_sec);
    r.read("forward_pass_flops", c.forward_pass_flops);
    r.read("sequence_length", c.sequence_length);
    r.read("flops_per_expert", c.flops_per_expert);
    r.read("flops_per_gateway", c.flops_per_gateway);
    r.read("parallelism", c.parallelism);
    r.read("max_experts_per_sat", c.max_experts_per_sat);
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "eval");
    EvalParams& e = sc.eval;
    r.read("trials", e.n_trials);
    r.read("survival_samples", e.n_survival_samples);
    r.read("seed", e.seed);
    read_enum(r, "disconnect_policy", e.policy, disconnect_policy_from_string);
    r.read("penalty_cap_s", e.penalty_cap_s);
    r.reject_unknown();
  }

  if (!sc.moe.trace_path.empty()) {
    std::filesystem::path p(sc.moe.trace_path);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    sc.moe.trace_path = p.lexically_normal().string();
    std::vector<std::vector<double>> probs;
    try {
      probs = trace_activation_probs(parse_activation_trace(read_file(sc.moe.trace_path)),
                                     sc.moe.layers, sc.moe.experts, sc.moe.k);
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(sc.moe.trace_path + ": " + e.what());
    }
    for (const auto& p_layer : probs) {
      try {
        sc.trace_weights.push_back(fit_weights(p_layer, sc.moe.k));
      } catch (const std::exception& e) {
        throw ConfigError(sc.moe.trace_path + ": cannot fit activation weights: " + e.what());
      }
    }
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  const std::filesystem::path p(path);
  return parse_scenario(read_file(path), path, p.parent_path().empty() ? "." : p.parent_path().string());
}

std::string resolved_scenario_text(const Scenario& sc) {
  const ConstellationConfig& c = sc.constellation;
  const ComputeProfile prof = sc.compute_profile();
  std::string out;
  auto line = [&out](const std::string& k, const auto& v) { out += fmt::format("{} = {}\n", k, v); };
  out += "[constellation]\n";
  line("n_planes", c.n_planes);
  line("sats_per_plane", c.sats_per_plane);
  line("altitude_km", c.altitude_km);
  line("inclination_deg", c.inclination_deg);
  line("phasing", c.phasing);
  line("earth_radius_km", c.earth_radius_km);
  line("n_slots", c.n_slots);
  line("slot_duration_s", c.slot_duration_s);
  line("spread", to_string(c.spread));
  out += "\n[links]\n";
  line("rate_threshold_rad_s", sc.links.rate_threshold_rad_s);
  line("survival_prob", sc.links.survival_prob);
  line("isl_rate_bps", sc.links.isl_rate_bps);
  line("seam_policy", to_string(sc.links.seam_policy));
  out += "\n[token]\n";
  line("embed_dim", sc.token.embed_dim);
  line("quant_bits", sc.token.quant_bits);
  out += "\n[moe]\n";
  line("layers", sc.moe.layers);
  line("experts", sc.moe.experts);
  line("top_k", sc.moe.k);
  if (!sc.moe.weights.empty()) line("weights", fmt::format("{}", fmt::join(sc.moe.weights, ", ")));
  if (!sc.moe.trace_path.empty()) line("trace", sc.moe.trace_path);
  line("sampler", to_string(sc.moe.sampler));
  line("remainder", to_string(sc.moe.remainder));
  out += "\n[compute]\n";
  line("flops_per_sec", prof.flops_per_sec);
  line("forward_pass_flops", sc.compute.forward_pass_flops);
  line("sequence_length", sc.compute.sequence_length);
  line("flops_per_expert", prof.flops_per_expert);
  line("flops_per_gateway", prof.flops_per_gateway);
  line("parallelism", prof.parallelism);
  line("max_experts_per_sat", prof.max_experts_per_sat);
  out += "\n[eval]\n";
  line("trials", sc.eval.n_trials);
  line("survival_samples", sc.eval.n_survival_samples);
  line("seed", sc.eval.seed);
  line("disconnect_policy", to_string(sc.eval.policy));
  line("penalty_cap_s", sc.eval.penalty_cap_s);
  return out;
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::altitude_km: return "altitude_km";
    case SweepAxis::n_planes: return "n_planes";
    case SweepAxis::sats_per_plane: return "sats_per_plane";
    case SweepAxis::survival_prob: return "survival_prob";
    case SweepAxis::rate_threshold_rad_s: return "rate_threshold_rad_s";
  }
  return "unknown";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  for (SweepAxis a : {SweepAxis::altitude_km, SweepAxis::n_planes, SweepAxis::sats_per_plane,
                      SweepAxis::survival_prob, SweepAxis::rate_threshold_rad_s})
    if (to_string(a) == s) return a;
  throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

std::vector<SweepSpec> parse_sweep_grid(const std::string& text, const std::string& source) {
  const IniDocument doc = parse_ini(text, source);
  std::vector<SweepSpec> grid;
  for (const IniSection& s : doc.sections) {
    SweepSpec spec;
    try {
      spec.axis = sweep_axis_from_string(s.name);
    } catch (const std::invalid_argument& e) {
      fail_at(source, s.line, 1, e.what());
    }
    SectionReader r(doc, s.name);
    if (!r.has("values")) fail_at(source, s.line, 1, "[" + s.name + "] needs 'values'");
    spec.values = r.list("values");
    r.reject_unknown();
    grid.push_back(std::move(spec));
  }
  if (grid.empty()) throw ConfigError(source + ": empty sweep grid");
  return grid;
}

Scenario with_axis(const Scenario& scenario, SweepAxis axis, double value) {
  Scenario s = scenario;
  auto as_int = [&](const char* what) {
    const int v = static_cast<int>(value);
    if (v != value) throw ConfigError(fmt::format("sweep {}: {} is not an integer", what, value));
    return v;
  };
  switch (axis) {
    case SweepAxis::altitude_km: s.constellation.altitude_km = value; break;
    case SweepAxis::n_planes: s.constellation.n_planes = as_int("n_planes"); break;
    case SweepAxis::sats_per_plane: s.constellation.sats_per_plane = as_int("sats_per_plane"); break;
    case SweepAxis::survival_prob: s.links.survival_prob = value; break;
    case SweepAxis::rate_threshold_rad_s: s.links.rate_threshold_rad_s = value; break;
  }
  s.validate();
  return s;
}

}  // namespace leomoe
