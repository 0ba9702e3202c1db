#include "cotransport/mission.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "cotransport/equilibrium.hpp"
#include "cotransport/errors.hpp"

namespace cotransport {
namespace {

Json theta_json(const PhysicalParams& t) { return Json::array({t.com_x, t.com_y, t.mass}); }
Json vec_json(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }
Json arr_json(const std::array<double, 3>& a) { return Json::array({a[0], a[1], a[2]}); }

template <class T>
Json matrix_json(const T& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

PhysicalParams theta_from(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
std::array<double, 3> arr_from(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

std::string describe(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

TrialRecord run_trial(const Scenario& s, const EstimationState& initial, int trial) {
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = s.seed + static_cast<std::uint64_t>(trial);
  std::mt19937_64 rng(rec.seed);
  const std::vector<PhysicalParams>& points = initial.grid.points();
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  rec.theta_true = points[pick(rng)];

  const EstimationRun run = run_estimation(s.payload, rec.theta_true, initial, s.estimator, rng);
  rec.theta_map = run.result.theta_map;
  rec.converged = run.result.converged;
  rec.measurements = run.result.measurement_count;
  for (std::size_t a = 0; a < 3; ++a) {
    const double d = (rec.theta_map[a] - rec.theta_true[a]) / s.grid.axes[a].resolution;
    rec.signed_error[a] = d;
    rec.normalized_error[a] = std::abs(d);
  }
  for (const MeasurementRecord& m : run.state.history)
    rec.max_normalization_error = std::max(rec.max_normalization_error, std::abs(m.posterior_sum - 1.0));
  return rec;
}

// Flat indices of the MAP's Chebyshev-1 neighbourhood, MAP first, then by
// decreasing probability (ties to the lower index).
std::vector<long> neighborhood_by_probability(const ParameterGrid& grid, long map_index) {
  std::vector<long> out;
  if (map_index < 0) return out;
  const std::array<int, 3> c = grid.indices()[static_cast<std::size_t>(map_index)];
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dm = -1; dm <= 1; ++dm) {
        const long h = grid.find({c[0] + dx, c[1] + dy, c[2] + dm});
        if (h >= 0 && h != map_index) out.push_back(h);
      }
  const std::vector<double>& p = grid.probability();
  std::stable_sort(out.begin(), out.end(), [&](long a, long b) {
    return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)];
  });
  out.insert(out.begin(), map_index);
  return out;
}

std::vector<double> measurement_layout(const PayloadModel& payload, SlotPair pair) {
  std::vector<double> arc{payload.candidates.at(static_cast<std::size_t>(pair.first)),
                          payload.candidates.at(static_cast<std::size_t>(pair.second))};
  for (int slot : default_idle_slots(payload, pair)) arc.push_back(payload.candidates.at(static_cast<std::size_t>(slot)));
  return arc;
}

std::vector<EstimationMove> plan_estimation_moves(const Scenario& s, const std::vector<MeasurementRecord>& trace) {
  std::vector<EstimationMove> out;
  std::vector<double> at;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    EstimationMove m;
    m.iteration = static_cast<int>(i);
    const std::vector<double> layout = measurement_layout(s.payload, trace[i].pair);
    if (at.empty()) {
      m.layout = layout;
      m.plan = RearrangePlan{{}, layout, 0.0};
    } else {
      try {
        m.layout = assign_targets(s.payload.rail, at, layout);
        m.plan = plan_rearrangement(s.payload.rail, at, m.layout, s.formation.min_spacing);
      } catch (const Error& e) {
        m.layout = layout;
        m.error = e.what();
      }
    }
    at = m.layout;
    out.push_back(std::move(m));
  }
  return out;
}

EstimationState sweep_state(const Scenario& s) {
  ParameterGrid grid = build_parameter_grid(s.grid, s.payload.com_region);
  return make_estimation_state(s.payload, std::move(grid), s.estimator.compensate_idle_robots);
}

void mean_std(const std::vector<double>& x, double& mean, double& sd) {
  mean = sd = 0.0;
  if (x.empty()) return;
  mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  if (x.size() < 2) return;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace

bool flight_succeeded(const FlightLog& log, double tolerance) {
  return !log.dropped && log.final_error <= tolerance;
}

MissionReport run_mission(const Scenario& s) {
  s.validate();
  MissionReport report;
  report.scenario = s.name;
  report.seed = s.seed;
  report.theta_true = s.theta_true;
  std::mt19937_64 rng(s.seed);

  auto fail = [&](const std::string& stage, const std::string& msg) {
    report.failed_stage = stage;
    report.error = msg;
    return report;
  };

  ParameterGrid grid = build_parameter_grid(s.grid, s.payload.com_region);
  std::vector<PhysicalParams> candidates;
  try {
    EstimationRun run = run_estimation(s.payload, s.theta_true, std::move(grid), s.estimator, rng);
    report.estimate = run.result;
    report.trace = std::move(run.state.history);
    report.estimation_moves = plan_estimation_moves(s, report.trace);
    for (long h : neighborhood_by_probability(run.state.grid, run.result.map_index))
      candidates.push_back(run.state.grid.points()[static_cast<std::size_t>(h)]);
  } catch (const Error& e) {
    return fail("estimation", e.what());
  }
  if (!report.estimate->converged)
    return fail("estimation", "not converged after " + std::to_string(report.estimate->measurement_count) +
                                  " measurements (neighborhood mass " + describe(report.estimate->neighborhood_mass) +
                                  ")");
  PhysicalParams theta_hat = report.estimate->theta_map;

  // MAP first, then the rest of its neighbourhood by posterior mass.
  try {
    for (std::size_t rank = 0; rank < candidates.size(); ++rank) {
      const PhysicalParams& theta = candidates[rank];
      auto [f, rep] = optimize_formation(s.payload, theta, s.payload.n_robots, s.formation, rng);
      if (!rep.feasible) continue;
      report.formation = std::move(f);
      report.formation_report = rep;
      report.formation_theta = theta;
      report.formation_rank = static_cast<int>(rank);
      theta_hat = theta;
      break;
    }
  } catch (const Error& e) {
    return fail("formation", e.what());
  }
  if (!report.formation) return fail("formation", "no feasible formation for any hypothesis near the estimate");

  try {
    report.initial_arc = report.estimation_moves.empty()
                             ? even_formation(s.payload, s.payload.n_robots, theta_hat.com(), s.formation.rotor).arc
                             : report.estimation_moves.back().layout;
    const std::vector<double> targets = assign_targets(s.payload.rail, report.initial_arc, report.formation->arc);
    report.rearrangement =
        plan_rearrangement(s.payload.rail, report.initial_arc, targets, s.formation.min_spacing);
  } catch (const Error& e) {
    return fail("rearrangement", e.what());
  }

  try {
    report.flight = run_flight(s.payload, *report.formation, s.theta_true, theta_hat, s.flight);
  } catch (const Error& e) {
    return fail("flight", e.what());
  }
  const FlightLog& log = *report.flight;
  if (log.dropped) return fail("flight", "dropped at t = " + describe(log.drop_time) + " s");
  if (log.final_error > s.success_tolerance)
    return fail("flight", "final error " + describe(log.final_error) + " m exceeds tolerance " +
                              describe(s.success_tolerance) + " m");
  report.success = true;
  return report;
}

SweepStats compute_sweep_stats(const std::vector<TrialRecord>& trials) {
  SweepStats st;
  st.trials = static_cast<int>(trials.size());
  if (trials.empty()) return st;
  for (std::size_t a = 0; a < 3; ++a) {
    std::vector<double> abs_err, signed_err;
    for (const TrialRecord& t : trials) {
      abs_err.push_back(t.normalized_error[a]);
      signed_err.push_back(t.signed_error[a]);
      st.max[a] = std::max(st.max[a], t.normalized_error[a]);
    }
    mean_std(abs_err, st.mean[a], st.stddev[a]);
    mean_std(signed_err, st.signed_mean[a], st.signed_stddev[a]);
  }
  st.min_measurements = trials.front().measurements;
  for (const TrialRecord& t : trials) {
    st.converged += t.converged ? 1 : 0;
    const bool close = std::all_of(t.normalized_error.begin(), t.normalized_error.end(),
                                   [](double e) { return e <= 1.0 + 1e-9; });
    st.within_one_step += close ? 1 : 0;
    st.total_measurements += t.measurements;
    st.min_measurements = std::min(st.min_measurements, t.measurements);
    st.max_measurements = std::max(st.max_measurements, t.measurements);
    st.max_normalization_error = std::max(st.max_normalization_error, t.max_normalization_error);
  }
  st.convergence_rate = static_cast<double>(st.converged) / st.trials;
  st.mean_measurements = static_cast<double>(st.total_measurements) / st.trials;
  return st;
}

bool sweep_passes(const SweepStats& st) {
  if (st.trials == 0) return false;
  for (std::size_t a = 0; a < 3; ++a)
    if (!(st.mean[a] <= 1.0 && st.stddev[a] <= 1.0)) return false;
  return true;
}

SweepResult run_sweep(const Scenario& s, int n_trials) {
  if (n_trials < 1) throw ConfigError("sweep needs at least one trial");
  s.validate();
  const EstimationState initial = sweep_state(s);
  SweepResult out;
  out.trials.resize(static_cast<std::size_t>(n_trials));
  bool failed = false;
  std::string message;
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < n_trials; ++k) {
    try {
      out.trials[static_cast<std::size_t>(k)] = run_trial(s, initial, k);
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        message = e.what();
      }
    }
  }
  if (failed) throw Error("sweep trial failed: " + message);
  out.stats = compute_sweep_stats(out.trials);
  return out;
}

SweepResult run_sweep_serial(const Scenario& s, int n_trials) {
  if (n_trials < 1) throw ConfigError("sweep needs at least one trial");
  s.validate();
  const EstimationState initial = sweep_state(s);
  SweepResult out;
  for (int k = 0; k < n_trials; ++k) out.trials.push_back(run_trial(s, initial, k));
  out.stats = compute_sweep_stats(out.trials);
  return out;
}

Json estimate_json(const EstimateResult& r) {
  return {{"theta_map", theta_json(r.theta_map)},
          {"map_index", r.map_index},
          {"neighborhood_mass", r.neighborhood_mass},
          {"measurement_count", r.measurement_count},
          {"converged", r.converged}};
}

Json measurement_json(const MeasurementRecord& r, int iteration) {
  return {{"iteration", iteration},
          {"pair_index", r.pair_index},
          {"pair", Json::array({r.pair.first, r.pair.second})},
          {"z", r.z},
          {"information", r.information},
          {"information_all", r.information_all},
          {"outlier", r.outlier},
          {"map_index", r.map_index},
          {"theta_map", theta_json(r.theta_map)},
          {"neighborhood_mass", r.neighborhood_mass},
          {"posterior_sum", r.posterior_sum}};
}

Json formation_json(const Formation& f, const OptimizationReport& rep) {
  Json pos = Json::array();
  for (const Vec2& p : f.positions) pos.push_back({p.x(), p.y()});
  return {{"arc", f.arc},
          {"positions", pos},
          {"signs", f.signs},
          {"com", Json::array({f.com.x(), f.com.y()})},
          {"c_t", f.rotor.c_t},
          {"c_q", f.rotor.c_q},
          {"B", matrix_json(f.B)},
          {"objective", rep.objective},
          {"balance_residuals", Json::array({rep.balance_residuals[0], rep.balance_residuals[1]})},
          {"iterations", rep.iterations},
          {"restarts_used", rep.restarts_used},
          {"mode", to_string(rep.mode)},
          {"feasible", rep.feasible},
          {"min_separation", rep.min_separation}};
}

Json rearrangement_json(const RearrangePlan& plan, const std::vector<double>& initial_arc) {
  Json moves = Json::array();
  for (const RearrangeMove& m : plan.moves)
    moves.push_back({{"robot", m.robot}, {"from", m.from}, {"to", m.to}, {"travel", m.travel}});
  return {{"initial", initial_arc}, {"targets", plan.targets}, {"moves", moves}, {"total_travel", plan.total_travel}};
}

Json estimation_move_json(const EstimationMove& m) {
  Json j = {{"iteration", m.iteration}, {"layout", m.layout}, {"feasible", m.plan.has_value()}};
  if (m.plan) {
    Json moves = Json::array();
    for (const RearrangeMove& mv : m.plan->moves)
      moves.push_back({{"robot", mv.robot}, {"from", mv.from}, {"to", mv.to}, {"travel", mv.travel}});
    j["moves"] = moves;
    j["total_travel"] = m.plan->total_travel;
  }
  j["error"] = m.error.empty() ? Json() : Json(m.error);
  return j;
}

Json flight_summary_json(const FlightLog& log, const TrajectorySpec& trajectory, double tolerance) {
  return {{"verdict", log.verdict()},
          {"success", flight_succeeded(log, tolerance)},
          {"dropped", log.dropped},
          {"drop_time", log.dropped ? Json(log.drop_time) : Json()},
          {"liftoff_time", log.liftoff_time},
          {"engage_time", log.engage_time},
          {"peak_tilt", log.peak_tilt},
          {"peak_tilt_takeoff", log.peak_tilt_takeoff},
          {"rmse", vec_json(log.rmse)},
          {"final_position", vec_json(log.final_position)},
          {"final_error", log.final_error},
          {"target", vec_json(trajectory.target)},
          {"tolerance", tolerance},
          {"saturation_fraction", log.saturation_fraction},
          {"samples", log.samples.size()}};
}

Json mission_json(const MissionReport& r, const Scenario& s) {
  Json j;
  j["scenario"] = scenario_to_json(s);
  j["theta_true"] = theta_json(r.theta_true);
  j["seed"] = r.seed;
  j["success"] = r.success;
  j["verdict"] = r.success ? "success" : "failure";
  j["failed_stage"] = r.failed_stage.empty() ? Json() : Json(r.failed_stage);
  j["error"] = r.error.empty() ? Json() : Json(r.error);
  if (r.estimate) {
    Json e = estimate_json(*r.estimate);
    Json trace = Json::array();
    for (std::size_t i = 0; i < r.trace.size(); ++i) trace.push_back(measurement_json(r.trace[i], static_cast<int>(i)));
    e["trace"] = trace;
    Json moves = Json::array();
    for (const EstimationMove& m : r.estimation_moves) moves.push_back(estimation_move_json(m));
    e["rail_moves"] = moves;
    std::array<double, 3> err{};
    for (std::size_t a = 0; a < 3; ++a)
      err[a] = (r.estimate->theta_map[a] - r.theta_true[a]) / s.grid.axes[a].resolution;
    e["normalized_error"] = arr_json(err);
    j["estimation"] = e;
  }
  if (r.formation) {
    j["formation"] = formation_json(*r.formation, r.formation_report);
    j["formation"]["theta"] = theta_json(r.formation_theta);
    j["formation"]["fallback_rank"] = r.formation_rank;
  }
  if (r.rearrangement) j["rearrangement"] = rearrangement_json(*r.rearrangement, r.initial_arc);
  if (r.flight) j["flight"] = flight_summary_json(*r.flight, s.flight.trajectory, s.success_tolerance);
  return j;
}

Json trial_json(const TrialRecord& t) {
  return {{"trial", t.trial},
          {"seed", t.seed},
          {"theta_true", theta_json(t.theta_true)},
          {"theta_map", theta_json(t.theta_map)},
          {"converged", t.converged},
          {"measurements", t.measurements},
          {"normalized_error", arr_json(t.normalized_error)},
          {"signed_error", arr_json(t.signed_error)},
          {"max_normalization_error", t.max_normalization_error}};
}

TrialRecord trial_from_json(const Json& j) {
  TrialRecord t;
  t.trial = j.at("trial").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.theta_true = theta_from(j.at("theta_true"));
  t.theta_map = theta_from(j.at("theta_map"));
  t.converged = j.at("converged").get<bool>();
  t.measurements = j.at("measurements").get<int>();
  t.normalized_error = arr_from(j.at("normalized_error"));
  t.signed_error = arr_from(j.at("signed_error"));
  t.max_normalization_error = j.at("max_normalization_error").get<double>();
  return t;
}

Json sweep_json(const SweepResult& r, const Scenario& s) {
  const SweepStats& st = r.stats;
  return {{"scenario", s.name},
          {"seed", s.seed},
          {"trials", st.trials},
          {"resolution", Json::array({s.grid.axes[0].resolution, s.grid.axes[1].resolution, s.grid.axes[2].resolution})},
          {"normalized_error",
           {{"mean", arr_json(st.mean)}, {"stddev", arr_json(st.stddev)}, {"max", arr_json(st.max)}}},
          {"signed_error", {{"mean", arr_json(st.signed_mean)}, {"stddev", arr_json(st.signed_stddev)}}},
          {"converged", st.converged},
          {"convergence_rate", st.convergence_rate},
          {"within_one_step", st.within_one_step},
          {"measurements",
           {{"total", st.total_measurements},
            {"mean", st.mean_measurements},
            {"min", st.min_measurements},
            {"max", st.max_measurements}}},
          {"max_normalization_error", st.max_normalization_error},
          {"passes", sweep_passes(st)}};
}

void write_estimation_jsonl(std::ostream& out, const std::vector<MeasurementRecord>& trace) {
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << canonical_dump(measurement_json(trace[i], static_cast<int>(i))) << '\n';
}

void write_trials_jsonl(std::ostream& out, const std::vector<TrialRecord>& trials) {
  for (const TrialRecord& t : trials) out << canonical_dump(trial_json(t)) << '\n';
}

FormationComparison compare_formations(const Scenario& s) {
  s.validate();
  FormationComparison c;
  std::mt19937_64 rng(s.seed);
  auto [f, rep] = optimize_formation(s.payload, s.theta_true, s.payload.n_robots, s.formation, rng);
  if (!rep.feasible) throw PlanningError("no feasible formation for " + s.name);
  c.optimized_formation = std::move(f);
  c.report = rep;
  c.even_formation = even_formation(s.payload, s.payload.n_robots, s.theta_true.com(), s.formation.rotor);
  c.optimized = run_flight(s.payload, c.optimized_formation, s.theta_true, s.theta_true, s.flight);
  c.even = run_flight(s.payload, c.even_formation, s.theta_true, s.theta_true, s.flight);
  return c;
}

void write_comparison_csv(std::ostream& out, const FormationComparison& c) {
  out << "t,z_ref,z_optimized,z_even,roll_optimized,pitch_optimized,roll_even,pitch_even\n";
  const std::size_t rows = std::max(c.optimized.samples.size(), c.even.samples.size());
  const FlightLog& longer = c.optimized.samples.size() >= c.even.samples.size() ? c.optimized : c.even;
  for (std::size_t i = 0; i < rows; ++i) {
    const FlightSample& ref = longer.samples[i];
    out << format_double(ref.t) << ',' << format_double(ref.reference.z());
    const FlightSample* o = i < c.optimized.samples.size() ? &c.optimized.samples[i] : nullptr;
    const FlightSample* e = i < c.even.samples.size() ? &c.even.samples[i] : nullptr;
    out << ',' << (o ? format_double(o->position.z()) : "") << ',' << (e ? format_double(e->position.z()) : "");
    out << ',' << (o ? format_double(o->rpy.x()) : "") << ',' << (o ? format_double(o->rpy.y()) : "");
    out << ',' << (e ? format_double(e->rpy.x()) : "") << ',' << (e ? format_double(e->rpy.y()) : "");
    out << '\n';
  }
}

Json comparison_json(const FormationComparison& c, const Scenario& s) {
  return {{"scenario", s.name},
          {"seed", s.seed},
          {"theta", theta_json(s.theta_true)},
          {"optimized", flight_summary_json(c.optimized, s.flight.trajectory, s.success_tolerance)},
          {"even", flight_summary_json(c.even, s.flight.trajectory, s.success_tolerance)},
          {"optimized_formation", formation_json(c.optimized_formation, c.report)},
          {"even_arc", c.even_formation.arc},
          {"takeoff_dominance", c.even.peak_tilt_takeoff > c.optimized.peak_tilt_takeoff}};
}

}  // namespace cotransport
