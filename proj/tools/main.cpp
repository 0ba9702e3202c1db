#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "cotransport/errors.hpp"
#include "cotransport/mission.hpp"
#include "cotransport/scenario.hpp"

namespace fs = std::filesystem;
using namespace cotransport;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string mode;
  int trials = 100;
  bool even = false;
};

Scenario load(const Options& o) {
  Scenario s = resolve_scenario(o.scenario);
  if (o.seed) s.seed = *o.seed;
  if (!o.mode.empty()) {
    try {
      s.formation.mode = formation_mode_from_string(o.mode);
    } catch (const ConfigError& e) {
      throw ScenarioError("--mode", 0, "formation.mode", e.what());
    }
  }
  s.validate();
  return s;
}

std::ofstream open_out(const Options& o, const std::string& name) {
  fs::create_directories(o.out_dir);
  const fs::path path = fs::path(o.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_json(const Options& o, const std::string& name, const Json& j) {
  std::ofstream out = open_out(o, name);
  write_canonical(out, j, 2);
  out << '\n';
}

std::pair<Formation, OptimizationReport> pick_formation(const Scenario& s, bool even, std::mt19937_64& rng) {
  if (!even) return optimize_formation(s.payload, s.theta_true, s.payload.n_robots, s.formation, rng);
  Formation f = even_formation(s.payload, s.payload.n_robots, s.theta_true.com(), s.formation.rotor);
  OptimizationReport rep;
  rep.objective = gramian_objective(f.B);
  rep.balance_residuals = balance_residuals(f.B);
  rep.min_separation = min_separation(s.payload.rail, f.arc);
  rep.mode = s.formation.mode;
  rep.feasible = formation_feasible(f, s.payload.rail, s.formation.epsilon, s.formation.min_spacing);
  return {std::move(f), rep};
}

int cmd_estimate(const Options& o) {
  const Scenario s = load(o);
  std::mt19937_64 rng(s.seed);
  const EstimationRun run =
      run_estimation(s.payload, s.theta_true, build_parameter_grid(s.grid, s.payload.com_region), s.estimator, rng);
  std::ofstream trace = open_out(o, "estimation.jsonl");
  write_estimation_jsonl(trace, run.state.history);
  Json j = estimate_json(run.result);
  j["scenario"] = s.name;
  j["seed"] = s.seed;
  j["theta_true"] = {s.theta_true.com_x, s.theta_true.com_y, s.theta_true.mass};
  write_json(o, "estimate.json", j);
  std::cout << s.name << ": theta_map = [" << run.result.theta_map.com_x << ", " << run.result.theta_map.com_y << ", "
            << run.result.theta_map.mass << "] after " << run.result.measurement_count << " measurements, "
            << (run.result.converged ? "converged" : "not converged") << '\n';
  return run.result.converged ? 0 : kExitFailure;
}

int cmd_formation(const Options& o) {
  const Scenario s = load(o);
  std::mt19937_64 rng(s.seed);
  const auto [f, rep] = pick_formation(s, o.even, rng);
  Json j = formation_json(f, rep);
  j["even"] = o.even;
  j["theta"] = {s.theta_true.com_x, s.theta_true.com_y, s.theta_true.mass};
  write_json(o, "formation.json", j);
  std::cout << s.name << ": det(BB^T) = " << rep.objective << ", residuals [" << rep.balance_residuals[0] << ", "
            << rep.balance_residuals[1] << "], " << (rep.feasible ? "feasible" : "infeasible") << '\n';
  return rep.feasible ? 0 : kExitFailure;
}

int cmd_fly(const Options& o) {
  const Scenario s = load(o);
  std::mt19937_64 rng(s.seed);
  const auto [f, rep] = pick_formation(s, o.even, rng);
  if (!o.even && !rep.feasible) throw PlanningError("no feasible formation for " + s.name);
  const FlightLog log = run_flight(s.payload, f, s.theta_true, s.theta_true, s.flight);
  std::ofstream csv = open_out(o, "flight.csv");
  write_flight_csv(csv, log);
  Json j = flight_summary_json(log, s.flight.trajectory, s.success_tolerance);
  j["scenario"] = s.name;
  j["formation"] = o.even ? "even" : "optimized";
  write_json(o, "flight_summary.json", j);
  write_json(o, "formation.json", formation_json(f, rep));
  const bool ok = flight_succeeded(log, s.success_tolerance);
  std::cout << s.name << " (" << (o.even ? "even" : "optimized") << "): " << log.verdict()
            << ", final error " << log.final_error << " m, peak takeoff tilt " << log.peak_tilt_takeoff << " rad\n";
  return ok ? 0 : kExitFailure;
}

int cmd_mission(const Options& o) {
  const Scenario s = load(o);
  const MissionReport r = run_mission(s);
  write_json(o, "mission.json", mission_json(r, s));
  std::ofstream trace = open_out(o, "estimation.jsonl");
  write_estimation_jsonl(trace, r.trace);
  if (r.formation) write_json(o, "formation.json", formation_json(*r.formation, r.formation_report));
  if (r.flight) {
    std::ofstream csv = open_out(o, "flight.csv");
    write_flight_csv(csv, *r.flight);
    write_json(o, "flight_summary.json", flight_summary_json(*r.flight, s.flight.trajectory, s.success_tolerance));
  }
  if (r.success)
    std::cout << s.name << ": success\n";
  else
    std::cout << s.name << ": failure in " << r.failed_stage << ": " << r.error << '\n';
  return r.success ? 0 : kExitFailure;
}

int cmd_sweep(const Options& o) {
  const Scenario s = load(o);
  const SweepResult r = run_sweep(s, o.trials);
  write_json(o, "sweep.json", sweep_json(r, s));
  std::ofstream trials = open_out(o, "trials.jsonl");
  write_trials_jsonl(trials, r.trials);
  const SweepStats& st = r.stats;
  std::cout << s.name << ": " << st.trials << " trials, mean [" << st.mean[0] << ", " << st.mean[1] << ", "
            << st.mean[2] << "], stddev [" << st.stddev[0] << ", " << st.stddev[1] << ", " << st.stddev[2]
            << "], converged " << st.converged << '\n';
  return sweep_passes(st) ? 0 : kExitFailure;
}

int cmd_compare(const Options& o) {
  const Scenario s = load(o);
  const FormationComparison c = compare_formations(s);
  std::ofstream csv = open_out(o, "comparison.csv");
  write_comparison_csv(csv, c);
  const Json j = comparison_json(c, s);
  write_json(o, "comparison.json", j);
  std::cout << s.name << ": optimized " << c.optimized.verdict() << " (takeoff tilt " << c.optimized.peak_tilt_takeoff
            << "), even " << c.even.verdict() << " (takeoff tilt " << c.even.peak_tilt_takeoff << ")\n";
  const bool ok = flight_succeeded(c.optimized, s.success_tolerance) && j["takeoff_dominance"].get<bool>();
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative aerial transport: estimation, formation and flight simulation"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "built-in name or JSON file")->required();
    sub->add_option("--seed", seed, "override the scenario seed");
    sub->add_option("--out-dir", o.out_dir, "output directory");
    sub->add_option("--mode", o.mode, "formation mode: free or symmetric");
  };
  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Entry entries[] = {
      {"estimate", "run the active estimation only", cmd_estimate},
      {"formation", "optimize the formation for the true parameters", cmd_formation},
      {"fly", "fly one formation for the true parameters", cmd_fly},
      {"mission", "estimate, rearrange, optimize and fly", cmd_mission},
      {"sweep", "Monte-Carlo estimation sweep", cmd_sweep},
      {"compare-formations", "fly the optimized and the even formation", cmd_compare},
  };
  std::vector<CLI::App*> subs;
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub);
    if (std::string(e.name) == "sweep") sub->add_option("--trials", o.trials, "number of trials")->check(CLI::PositiveNumber);
    if (std::string(e.name) == "fly" || std::string(e.name) == "formation")
      sub->add_flag("--even", o.even, "use the evenly spaced formation");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    if (subs[i]->count("--seed")) o.seed = seed;
    try {
      return entries[i].run(o);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kExitConfig;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitFailure;
    }
  }
  return kExitConfig;
}
