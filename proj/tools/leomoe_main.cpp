// Command-line front end: topology | place | evaluate | sweep | validate.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <optional>

#include "leomoe/commands.hpp"

using namespace leomoe;

namespace {

struct Common {
  std::string scenario;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
};

void add_common(CLI::App* cmd, Common& c, bool trials) {
  cmd->add_option("--scenario", c.scenario, "scenario file")->required();
  cmd->add_option("--out", c.out, "output directory (default: $LEOMOE_OUT_DIR or out/<command>)");
  cmd->add_option("--seed", c.seed, "root seed (default: scenario [eval] seed)");
  if (trials) cmd->add_option("--trials", c.trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
}

std::vector<Strategy> parse_strategies(const std::vector<std::string>& names) {
  std::vector<Strategy> out;
  for (const std::string& n : names) {
    if (n == "all") {
      out.assign(std::begin(kAllStrategies), std::end(kAllStrategies));
      continue;
    }
    out.push_back(strategy_from_string(n));
  }
  if (out.empty()) out.assign(std::begin(kAllStrategies), std::end(kAllStrategies));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed MoE inference over a polar LEO constellation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common topo, place, eval, sw;
  std::string place_strategy;
  std::vector<std::string> eval_strategies, sweep_strategies;
  std::string plan_path, grid_path;
  std::string level = "small";
  std::uint64_t validate_seed = 1;
  bool inject = false;

  const std::vector<std::string> names{"spacemoe", "rand_place", "rand_intra", "rand_intra_cg"};
  auto* c_topo = app.add_subcommand("topology", "sample per-slot ISL topologies");
  add_common(c_topo, topo, false);

  auto* c_place = app.add_subcommand("place", "compute a placement plan");
  add_common(c_place, place, false);
  c_place->add_option("--strategy", place_strategy, "placement strategy")
      ->required()
      ->check(CLI::IsMember(names));

  auto* c_eval = app.add_subcommand("evaluate", "Monte-Carlo token latency of plans");
  add_common(c_eval, eval, true);
  auto* plan_opt = c_eval->add_option("--plan", plan_path, "plan.csv written by 'place'");
  c_eval->add_option("--strategy", eval_strategies, "build plans for these strategies (default: all)")
      ->excludes(plan_opt);

  auto* c_sweep = app.add_subcommand("sweep", "parameter sweeps over a grid file");
  add_common(c_sweep, sw, true);
  c_sweep->add_option("--grid", grid_path, "sweep grid file")->required();
  c_sweep->add_option("--strategy", sweep_strategies, "strategies (default: all)");

  auto* c_val = app.add_subcommand("validate", "run the enumerable-instance oracle batteries");
  c_val->add_option("--level", level, "battery size")->check(CLI::IsMember({"small", "full"}));
  c_val->add_option("--seed", validate_seed, "instance seed");
  c_val->add_flag("--inject-inversion", inject)->group("");  // mutation check, hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*c_val) {
      ValidationOptions opts;
      opts.level = validation_level_from_string(level);
      opts.seed = validate_seed;
      opts.inject_inversion = inject;
      return cmd_validate(opts, std::cout) ? kExitOk : kExitValidation;
    }
    if (*c_topo) {
      const Scenario sc = load_scenario(topo.scenario);
      const std::string dir = resolve_out_dir(topo.out, "out/topology");
      cmd_topology(sc, dir, topo.seed.value_or(sc.eval.seed));
      std::cout << "wrote " << dir << "/edges.csv\n";
    } else if (*c_place) {
      const Scenario sc = load_scenario(place.scenario);
      const std::string dir = resolve_out_dir(place.out, "out/place");
      cmd_place(sc, strategy_from_string(place_strategy), dir, place.seed.value_or(sc.eval.seed));
      std::cout << "wrote " << dir << "/plan.csv\n";
    } else if (*c_eval) {
      const Scenario sc = load_scenario(eval.scenario);
      const std::string dir = resolve_out_dir(eval.out, "out/evaluate");
      const std::uint64_t seed = eval.seed.value_or(sc.eval.seed);
      std::vector<PlacementPlan> plans;
      if (!plan_path.empty()) {
        plans.push_back(load_plan(plan_path));
      } else {
        const Experiment exp(sc);
        for (Strategy s : parse_strategies(eval_strategies)) plans.push_back(exp.plan(s, seed));
      }
      for (const LatencyReport& r :
           cmd_evaluate(sc, plans, dir, eval.trials.value_or(sc.eval.n_trials), seed))
        std::cout << fmt::format("{:<14} {:.6f} s/token (stderr {:.2e}, disconnected {:.4f})\n",
                                 r.strategy, r.e2e_mean, r.e2e_stderr(), r.disconnect_fraction);
    } else if (*c_sweep) {
      const Scenario sc = load_scenario(sw.scenario);
      const std::string dir = resolve_out_dir(sw.out, "out/sweep");
      for (const SweepRow& row :
           cmd_sweep(sc, grid_path, parse_strategies(sweep_strategies), dir,
                     sw.trials.value_or(sc.eval.n_trials), sw.seed.value_or(sc.eval.seed)))
        std::cout << fmt::format("{}={:<10} {:<14} {:.6f}\n", to_string(row.axis), row.value,
                                 row.report.strategy, row.report.e2e_mean);
    }
    return kExitOk;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
