#include "leomoe/commands.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace leomoe {

namespace fs = std::filesystem;

std::string resolve_out_dir(const std::optional<std::string>& flag, const std::string& fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return fallback;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + target.parent_path().string() + "': " + ec.message());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

void write_run_stamp(const std::string& dir, const std::string& command, const Scenario& scenario,
                     std::uint64_t seed) {
  write_file_atomic((fs::path(dir) / "resolved_scenario.ini").string(),
                    resolved_scenario_text(scenario));
  write_file_atomic((fs::path(dir) / "run_info.txt").string(),
                    fmt::format("tool = {}\ncommand = {}\nseed = {}\n", kToolVersion, command, seed));
}

namespace {

std::string path_in(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
T parse_field(const std::string& s, const std::string& source, int line, const char* what) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(fmt::format("{}:{}: bad {} '{}'", source, line, what, s));
  return v;
}

}  // namespace

std::string plan_csv(const PlacementPlan& plan) {
  std::string out = "layer,role,expert,x,y,strategy,seed\n";
  const std::string tag = to_string(plan.strategy);
  for (int l = 0; l < plan.n_layers(); ++l) {
    const LayerPlacement& lp = plan.layers[l];
    out += fmt::format("{},gateway,-1,{},{},{},{}\n", l + 1, lp.gateway.x, lp.gateway.y, tag, plan.seed);
    for (std::size_t i = 0; i < lp.experts.size(); ++i)
      out += fmt::format("{},expert,{},{},{},{},{}\n", l + 1, i, lp.experts[i].x, lp.experts[i].y,
                         tag, plan.seed);
  }
  return out;
}

PlacementPlan parse_plan_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || line != "layer,role,expert,x,y,strategy,seed")
    throw ConfigError(source + ":1: expected header 'layer,role,expert,x,y,strategy,seed'");
  PlacementPlan plan;
  std::vector<bool> has_gateway;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 7) throw ConfigError(fmt::format("{}:{}: expected 7 fields", source, line_no));
    const int layer = parse_field<int>(f[0], source, line_no, "layer");
    const int expert = parse_field<int>(f[2], source, line_no, "expert");
    const GridCoord c{parse_field<int>(f[3], source, line_no, "x"),
                      parse_field<int>(f[4], source, line_no, "y")};
    const std::uint64_t seed = parse_field<std::uint64_t>(f[6], source, line_no, "seed");
    Strategy strategy;
    try {
      strategy = strategy_from_string(f[5]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
    if (first) {
      plan.strategy = strategy;
      plan.seed = seed;
      first = false;
    } else if (strategy != plan.strategy || seed != plan.seed) {
      throw ConfigError(fmt::format("{}:{}: strategy/seed differ from the first row", source, line_no));
    }
    if (layer < 1 || layer > plan.n_layers() + 1)
      throw ConfigError(fmt::format("{}:{}: layers must be listed in order", source, line_no));
    if (layer == plan.n_layers() + 1) {
      plan.layers.emplace_back();
      has_gateway.push_back(false);
    }
    LayerPlacement& lp = plan.layers[layer - 1];
    if (f[1] == "gateway") {
      if (has_gateway[layer - 1])
        throw ConfigError(fmt::format("{}:{}: second gateway for layer {}", source, line_no, layer));
      lp.gateway = c;
      has_gateway[layer - 1] = true;
    } else if (f[1] == "expert") {
      if (expert != static_cast<int>(lp.experts.size()))
        throw ConfigError(fmt::format("{}:{}: experts must be listed in index order", source, line_no));
      lp.experts.push_back(c);
    } else {
      throw ConfigError(fmt::format("{}:{}: unknown role '{}'", source, line_no, f[1]));
    }
  }
  if (plan.layers.empty()) throw ConfigError(source + ": plan has no rows");
  for (std::size_t l = 0; l < has_gateway.size(); ++l)
    if (!has_gateway[l]) throw ConfigError(fmt::format("{}: layer {} has no gateway", source, l + 1));
  return plan;
}

PlacementPlan load_plan(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_plan_csv(ss.str(), path);
}

std::string expected_latency_csv(const ConstellationConfig& config,
                                 const std::vector<ExpectedPathLatencies>& latencies) {
  std::string out = "layer,node,x,y,expected_latency_s,rank\n";
  for (const ExpectedPathLatencies& e : latencies) {
    std::vector<std::size_t> order(e.candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (e.values[a] != e.values[b]) return e.values[a] < e.values[b];
      return e.candidates[a] < e.candidates[b];
    });
    std::vector<std::size_t> rank(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
    for (std::size_t c = 0; c < e.candidates.size(); ++c) {
      const GridCoord g = config.coord(e.candidates[c]);
      out += fmt::format("{},{},{},{},{},{}\n", e.layer, e.candidates[c], g.x, g.y, e.values[c], rank[c]);
    }
  }
  return out;
}

std::string report_csv(const LatencyReport& r) {
  std::string out = "scope,mean_s,stddev_s,min_s,max_s\n";
  for (std::size_t l = 0; l < r.per_layer.size(); ++l) {
    const LayerStats& s = r.per_layer[l];
    out += fmt::format("layer_{},{},{},{},{}\n", l + 1, s.mean, s.stddev, s.min, s.max);
  }
  out += fmt::format("e2e,{},{},{},{}\n", r.e2e_mean, r.e2e_stddev, r.e2e_min, r.e2e_max);
  return out;
}

std::string report_summary_csv(const std::vector<LatencyReport>& reports) {
  std::string out =
      "strategy,seed,n_trials,n_used,e2e_mean_s,e2e_stddev_s,e2e_stderr_s,disconnect_fraction\n";
  for (const LatencyReport& r : reports)
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.strategy, r.seed, r.n_trials, r.n_used,
                       r.e2e_mean, r.e2e_stddev, r.e2e_stderr(), r.disconnect_fraction);
  return out;
}

std::string report_plot_csv(const std::vector<LatencyReport>& reports) {
  std::string out = "x,series,value\n";
  for (const LatencyReport& r : reports)
    for (std::size_t l = 0; l < r.per_layer.size(); ++l)
      out += fmt::format("{},{},{}\n", l + 1, r.strategy, r.per_layer[l].mean);
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "axis,value,strategy,n_used,e2e_mean_s,e2e_stderr_s,disconnect_fraction\n";
  for (const SweepRow& row : rows)
    out += fmt::format("{},{},{},{},{},{},{}\n", to_string(row.axis), row.value,
                       row.report.strategy, row.report.n_used, row.report.e2e_mean,
                       row.report.e2e_stderr(), row.report.disconnect_fraction);
  return out;
}

std::string sweep_plot_csv(const std::vector<SweepRow>& rows) {
  std::string out = "x,series,value\n";
  for (const SweepRow& row : rows)
    out += fmt::format("{},{},{}\n", row.value, row.report.strategy, row.report.e2e_mean);
  return out;
}

void cmd_topology(const Scenario& scenario, const std::string& out_dir, std::uint64_t seed) {
  const Experiment exp(scenario);
  const TopologyModel& model = exp.model();
  const int n = model.n_nodes();
  const RandomStream stream = RandomStream(seed).derive("survival").derive("snapshots");
  std::string edges = "slot,u,v\n";
  std::string summary = "slot,edges,mean_degree,components,disconnected_pair_fraction\n";
  double total_pairs_cut = 0.0;
  for (int slot = 0; slot < model.n_slots(); ++slot) {
    RandomStream draws = stream.derive(static_cast<std::uint64_t>(slot));
    const TopologyRealization r = model.sample(slot, draws);
    std::vector<NodeId> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](NodeId a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    for (const Edge& e : r.edges) {
      edges += fmt::format("{},{},{}\n", slot, e.u, e.v);
      parent[find(e.u)] = find(e.v);
    }
    std::vector<double> size(static_cast<std::size_t>(n), 0.0);
    for (NodeId v = 0; v < n; ++v) size[find(v)] += 1.0;
    int components = 0;
    double same = 0.0;
    for (double s : size)
      if (s > 0.0) {
        ++components;
        same += s * (s - 1.0);
      }
    const double pairs = static_cast<double>(n) * (n - 1);
    const double cut = pairs > 0.0 ? 1.0 - same / pairs : 0.0;
    total_pairs_cut += cut;
    summary += fmt::format("{},{},{},{},{}\n", slot, r.edges.size(), 2.0 * r.edges.size() / n,
                           components, cut);
  }
  summary += fmt::format("mean,,,,{}\n", total_pairs_cut / model.n_slots());
  write_file_atomic(path_in(out_dir, "edges.csv"), edges);
  write_file_atomic(path_in(out_dir, "topology_summary.csv"), summary);
  write_run_stamp(out_dir, "topology", scenario, seed);
}

PlacementPlan cmd_place(const Scenario& scenario, Strategy strategy, const std::string& out_dir,
                        std::uint64_t seed) {
  const Experiment exp(scenario);
  PlacementPlan plan;
  if (strategy == Strategy::spacemoe) {
    const std::vector<ExpectedPathLatencies> lat = exp.expected_latencies(seed);
    plan = exp.plan(strategy, seed, lat);
    write_file_atomic(path_in(out_dir, "expected_latency.csv"), expected_latency_csv(exp.config(), lat));
  } else {
    plan = exp.plan(strategy, seed);
  }
  validate_plan(plan, exp.config(), strategy == Strategy::rand_place
                                        ? std::span<const SubnetSpec>{}
                                        : std::span<const SubnetSpec>{exp.subnets()});
  write_file_atomic(path_in(out_dir, "plan.csv"), plan_csv(plan));
  write_run_stamp(out_dir, "place --strategy " + to_string(strategy), scenario, seed);
  return plan;
}

std::vector<LatencyReport> cmd_evaluate(const Scenario& scenario,
                                        const std::vector<PlacementPlan>& plans,
                                        const std::string& out_dir, int n_trials,
                                        std::uint64_t seed) {
  const Experiment exp(scenario);
  std::vector<LatencyReport> reports;
  for (const PlacementPlan& plan : plans) {
    reports.push_back(exp.evaluate(plan, n_trials, seed));
    write_file_atomic(path_in(out_dir, "report_" + reports.back().strategy + ".csv"),
                      report_csv(reports.back()));
  }
  write_file_atomic(path_in(out_dir, "summary.csv"), report_summary_csv(reports));
  write_file_atomic(path_in(out_dir, "plot.csv"), report_plot_csv(reports));
  write_run_stamp(out_dir, "evaluate", scenario, seed);
  return reports;
}

std::vector<SweepRow> cmd_sweep(const Scenario& scenario, const std::string& grid_path,
                                const std::vector<Strategy>& strategies,
                                const std::string& out_dir, int n_trials, std::uint64_t seed) {
  std::ifstream in(grid_path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + grid_path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::vector<SweepSpec> grid = parse_sweep_grid(ss.str(), grid_path);
  std::vector<SweepRow> all;
  for (const SweepSpec& spec : grid) {
    const std::vector<SweepRow> rows = sweep(scenario, spec, strategies, n_trials, seed);
    const std::string axis = to_string(spec.axis);
    write_file_atomic(path_in(out_dir, "sweep_" + axis + ".csv"), sweep_csv(rows));
    write_file_atomic(path_in(out_dir, "sweep_" + axis + "_plot.csv"), sweep_plot_csv(rows));
    all.insert(all.end(), rows.begin(), rows.end());
  }
  write_run_stamp(out_dir, "sweep", scenario, seed);
  return all;
}

bool cmd_validate(const ValidationOptions& options, std::ostream& out) {
  bool ok = true;
  out << fmt::format("validation level={} seed={}\n", to_string(options.level), options.seed);
  for (const PropertyResult& r : run_validation(options)) {
    out << fmt::format("{:<34} instances={:<5} failures={:<5} max_error={:.3e} {}\n", r.property,
                       r.instances, r.failures, r.max_error, r.passed() ? "PASS" : "FAIL");
    ok = ok && r.passed();
  }
  return ok;
}

}  // namespace leomoe
