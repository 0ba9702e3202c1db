#include "cotransport/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cotransport/errors.hpp"

namespace cotransport {
namespace {

std::string format_error(const std::string& source, int line, const std::string& field, const std::string& msg) {
  std::ostringstream out;
  out << source;
  if (line > 0) out << ':' << line;
  out << ": ";
  if (!field.empty()) out << field << ": ";
  out << msg;
  return out.str();
}

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

// Walks the dotted path through the raw text, each key searched after the
// previous one. Returns 0 when the text is unavailable or a key is missing.
int locate_field(const std::string& text, const std::string& field) {
  if (text.empty() || field.empty()) return 0;
  std::size_t pos = 0;
  std::string key;
  std::istringstream parts(field);
  bool found = false;
  while (std::getline(parts, key, '.')) {
    const std::size_t bracket = key.find('[');
    if (bracket != std::string::npos) key.resize(bracket);
    if (key.empty()) continue;
    const std::size_t at = text.find('"' + key + '"', pos);
    if (at == std::string::npos) break;
    pos = at;
    found = true;
  }
  return found ? line_of_offset(text, pos) : 0;
}

class Reader {
 public:
  Reader(std::string source, const std::string& text) : source_(std::move(source)), text_(text) {}

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
    throw ScenarioError(source_, locate_field(text_, field), field, msg);
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  void expect_object(const Json& j, const std::string& path) const {
    if (!j.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  }

  void allow_keys(const Json& j, const std::string& path, std::initializer_list<const char*> keys) const {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!allowed.count(it.key())) fail(join(path, it.key()), "unknown field");
  }

  const Json* find(const Json& j, const std::string& key) const {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
  }

  const Json& require(const Json& j, const std::string& path, const std::string& key) const {
    const Json* v = find(j, key);
    if (!v) fail(join(path, key), "missing required field");
    return *v;
  }

  double number(const Json& v, const std::string& field) const {
    if (!v.is_number()) fail(field, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(field, "must be finite");
    return d;
  }

  double number(const Json& j, const std::string& path, const std::string& key, double fallback) const {
    const Json* v = find(j, key);
    return v ? number(*v, join(path, key)) : fallback;
  }

  long integer(const Json& j, const std::string& path, const std::string& key, long fallback) const {
    const Json* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(join(path, key), "expected an integer");
    return v->get<long>();
  }

  bool boolean(const Json& j, const std::string& path, const std::string& key, bool fallback) const {
    const Json* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(join(path, key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const Json& j, const std::string& path, const std::string& key, std::string fallback) const {
    const Json* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_string()) fail(join(path, key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const Json& v, const std::string& field, std::size_t size = 0) const {
    if (!v.is_array()) fail(field, "expected an array of numbers");
    if (size && v.size() != size) fail(field, "expected " + std::to_string(size) + " numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], field + "[" + std::to_string(i) + "]"));
    return out;
  }

  Eigen::Vector3d vec3(const Json& j, const std::string& path, const std::string& key,
                       const Eigen::Vector3d& fallback) const {
    const Json* v = find(j, key);
    if (!v) return fallback;
    const std::vector<double> x = numbers(*v, join(path, key), 3);
    return {x[0], x[1], x[2]};
  }

  std::vector<Vec2> points(const Json& v, const std::string& field) const {
    if (!v.is_array()) fail(field, "expected an array of [x, y] points");
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::vector<double> p = numbers(v[i], field + "[" + std::to_string(i) + "]", 2);
      out.emplace_back(p[0], p[1]);
    }
    return out;
  }

 private:
  std::string source_;
  const std::string& text_;
};

Json vec_json(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json points_json(const std::vector<Vec2>& pts) {
  Json a = Json::array();
  for (const Vec2& p : pts) a.push_back({p.x(), p.y()});
  return a;
}

// Builds the payload and returns the spec with every default filled in.
std::pair<PayloadModel, Json> read_payload(const Reader& r, const Json& j) {
  const std::string path = "payload";
  r.expect_object(j, path);
  r.allow_keys(j, path,
               {"shape", "length", "width", "outer", "arm", "footprint", "rail", "candidates", "contacts",
                "robot_mass", "robot_max_thrust", "n_robots", "gravity"});
  Json spec = Json::object();
  const std::string shape = r.string(j, path, "shape", "rectangle");
  spec["shape"] = shape;

  int slots = 12;
  std::vector<double> explicit_slots;
  const Json* cand = r.find(j, "candidates");
  if (cand && cand->is_string()) {
    const std::string s = cand->get<std::string>();
    const std::string prefix = "auto:";
    if (s.rfind(prefix, 0) != 0) r.fail("payload.candidates", "expected \"auto: N\" or an array of arc lengths");
    try {
      std::size_t used = 0;
      const std::string tail = s.substr(prefix.size());
      slots = std::stoi(tail, &used);
      if (tail.find_first_not_of(' ', used) != std::string::npos) throw std::invalid_argument(tail);
    } catch (const std::exception&) {
      r.fail("payload.candidates", "expected \"auto: N\" with an integer N");
    }
    if (slots < 2) r.fail("payload.candidates", "need at least 2 slots");
    spec["candidates"] = "auto: " + std::to_string(slots);
  } else if (cand) {
    explicit_slots = r.numbers(*cand, "payload.candidates");
    spec["candidates"] = explicit_slots;
  } else {
    spec["candidates"] = "auto: 12";
  }

  PayloadModel p;
  if (shape == "rectangle") {
    r.allow_keys(j, path, {"shape", "length", "width", "candidates", "contacts", "robot_mass", "robot_max_thrust",
                           "n_robots", "gravity"});
    const double length = r.number(j, path, "length", 1.76);
    const double width = r.number(j, path, "width", 0.2);
    if (!(length > 0.0)) r.fail("payload.length", "must be > 0");
    if (!(width > 0.0)) r.fail("payload.width", "must be > 0");
    p = make_rectangle_payload(length, width, slots);
    spec["length"] = length;
    spec["width"] = width;
  } else if (shape == "lshape") {
    r.allow_keys(j, path, {"shape", "outer", "arm", "candidates", "contacts", "robot_mass", "robot_max_thrust",
                           "n_robots", "gravity"});
    const double outer = r.number(j, path, "outer", 0.62);
    const double arm = r.number(j, path, "arm", 0.25);
    if (!(outer > 0.0)) r.fail("payload.outer", "must be > 0");
    if (!(arm > 0.0 && arm < outer)) r.fail("payload.arm", "must be in (0, outer)");
    p = make_lshape_payload(outer, arm, slots);
    spec["outer"] = outer;
    spec["arm"] = arm;
  } else if (shape == "polygon") {
    r.allow_keys(j, path, {"shape", "footprint", "rail", "candidates", "contacts", "robot_mass", "robot_max_thrust",
                           "n_robots", "gravity"});
    const std::vector<Vec2> footprint = r.points(r.require(j, path, "footprint"), "payload.footprint");
    if (footprint.size() < 3) r.fail("payload.footprint", "needs at least 3 vertices");
    if (!(polygon_area(footprint) > 0.0)) r.fail("payload.footprint", "vertices must be counter-clockwise with positive area");
    std::vector<Vec2> rail;
    if (const Json* v = r.find(j, "rail")) {
      rail = r.points(*v, "payload.rail");
      if (rail.size() < 2) r.fail("payload.rail", "needs at least 2 vertices");
      spec["rail"] = points_json(rail);
    }
    p = make_polygon_payload(footprint, slots, rail);
    spec["footprint"] = points_json(footprint);
  } else {
    r.fail("payload.shape", "expected \"rectangle\", \"lshape\" or \"polygon\"");
  }
  if (!explicit_slots.empty()) p.candidates = explicit_slots;

  if (const Json* v = r.find(j, "contacts")) {
    if (v->is_string()) {
      if (v->get<std::string>() != "auto: vertices")
        r.fail("payload.contacts", "expected \"auto: vertices\" or an array of points");
    } else {
      p.contacts = r.points(*v, "payload.contacts");
      spec["contacts"] = points_json(p.contacts);
    }
  }
  if (!spec.contains("contacts")) spec["contacts"] = "auto: vertices";

  p.robot_mass = r.number(j, path, "robot_mass", 0.1);
  p.robot_max_thrust = r.number(j, path, "robot_max_thrust", 14.2);
  p.n_robots = static_cast<int>(r.integer(j, path, "n_robots", 8));
  p.gravity = r.number(j, path, "gravity", 9.81);
  spec["robot_mass"] = p.robot_mass;
  spec["robot_max_thrust"] = p.robot_max_thrust;
  spec["n_robots"] = p.n_robots;
  spec["gravity"] = p.gravity;
  try {
    p.validate();
  } catch (const ConfigError& e) {
    r.fail("payload", e.what());
  }
  return {std::move(p), std::move(spec)};
}

PidGains read_gains(const Reader& r, const Json& j, const std::string& path, const PidGains& fallback) {
  r.expect_object(j, path);
  r.allow_keys(j, path, {"kp", "ki", "kd", "integral_limit"});
  PidGains g;
  g.kp = r.vec3(j, path, "kp", fallback.kp);
  g.ki = r.vec3(j, path, "ki", fallback.ki);
  g.kd = r.vec3(j, path, "kd", fallback.kd);
  g.integral_limit = r.vec3(j, path, "integral_limit", fallback.integral_limit);
  return g;
}

Json gains_json(const PidGains& g) {
  return {{"kp", vec_json(g.kp)}, {"ki", vec_json(g.ki)}, {"kd", vec_json(g.kd)},
          {"integral_limit", vec_json(g.integral_limit)}};
}

void read_flight(const Reader& r, const Json& j, FlightConfig& f) {
  const std::string path = "flight";
  r.expect_object(j, path);
  r.allow_keys(j, path,
               {"start", "target", "duration", "horizon", "physics_rate_hz", "log_rate_hz", "ramp_time", "ramp_factor",
                "takeoff_window", "liftoff_latency", "drop_angle", "linear_model", "disturbance", "controller"});
  f.trajectory.start = r.vec3(j, path, "start", f.trajectory.start);
  f.trajectory.target = r.vec3(j, path, "target", f.trajectory.target);
  f.trajectory.duration = r.number(j, path, "duration", f.trajectory.duration);
  f.sim.horizon = r.number(j, path, "horizon", f.sim.horizon);
  f.sim.physics_rate_hz = r.number(j, path, "physics_rate_hz", f.sim.physics_rate_hz);
  f.sim.log_rate_hz = r.number(j, path, "log_rate_hz", f.sim.log_rate_hz);
  f.sim.ramp_time = r.number(j, path, "ramp_time", f.sim.ramp_time);
  f.sim.ramp_factor = r.number(j, path, "ramp_factor", f.sim.ramp_factor);
  f.sim.takeoff_window = r.number(j, path, "takeoff_window", f.sim.takeoff_window);
  f.sim.liftoff_latency = r.number(j, path, "liftoff_latency", f.sim.liftoff_latency);
  f.sim.drop_angle = r.number(j, path, "drop_angle", f.sim.drop_angle);
  f.sim.linear_model = r.boolean(j, path, "linear_model", f.sim.linear_model);

  if (const Json* d = r.find(j, "disturbance")) {
    if (!d->is_array()) r.fail("flight.disturbance", "expected an array of pulses");
    f.disturbance.clear();
    for (std::size_t i = 0; i < d->size(); ++i) {
      const std::string p = "flight.disturbance[" + std::to_string(i) + "]";
      const Json& e = (*d)[i];
      r.expect_object(e, p);
      r.allow_keys(e, p, {"start", "duration", "torque"});
      DisturbancePulse pulse;
      pulse.start = r.number(r.require(e, p, "start"), p + ".start");
      pulse.duration = r.number(r.require(e, p, "duration"), p + ".duration");
      pulse.torque = r.vec3(e, p, "torque", Eigen::Vector3d::Zero());
      if (!(pulse.duration >= 0.0)) r.fail(p + ".duration", "must be >= 0");
      f.disturbance.push_back(pulse);
    }
  }

  if (const Json* c = r.find(j, "controller")) {
    const std::string p = "flight.controller";
    r.expect_object(*c, p);
    r.allow_keys(*c, p,
                 {"position", "velocity", "angle", "rate", "outer_rate_hz", "inner_rate_hz", "max_tilt", "max_velocity"});
    ControllerConfig& cc = f.controller;
    if (const Json* g = r.find(*c, "position")) cc.position = read_gains(r, *g, p + ".position", cc.position);
    if (const Json* g = r.find(*c, "velocity")) cc.velocity = read_gains(r, *g, p + ".velocity", cc.velocity);
    if (const Json* g = r.find(*c, "angle")) cc.angle = read_gains(r, *g, p + ".angle", cc.angle);
    if (const Json* g = r.find(*c, "rate")) cc.rate = read_gains(r, *g, p + ".rate", cc.rate);
    cc.outer_rate_hz = r.number(*c, p, "outer_rate_hz", cc.outer_rate_hz);
    cc.inner_rate_hz = r.number(*c, p, "inner_rate_hz", cc.inner_rate_hz);
    cc.max_tilt = r.number(*c, p, "max_tilt", cc.max_tilt);
    cc.max_velocity = r.number(*c, p, "max_velocity", cc.max_velocity);
  }
}

Scenario base_scenario(const std::string& name, std::uint64_t seed) {
  Scenario s;
  s.name = name;
  s.seed = seed;
  return s;
}

void set_payload(Scenario& s, const Json& spec) {
  const std::string none;
  const Reader r("<builtin>", none);
  auto [payload, filled] = read_payload(r, spec);
  s.payload = std::move(payload);
  s.payload_spec = std::move(filled);
}

Scenario rectangle_sim(const std::string& name, PhysicalParams theta) {
  Scenario s = base_scenario(name, 1);
  set_payload(s, {{"shape", "rectangle"}});
  s.theta_true = theta;
  s.grid = {{AxisSpec{-0.5, 0.5, 0.1}, AxisSpec{-0.05, 0.05, 0.03}, AxisSpec{2.5, 4.0, 0.5}}};
  s.formation.epsilon = 1e-5;
  return s;
}

Scenario lshape_sim(const std::string& name, PhysicalParams theta) {
  Scenario s = base_scenario(name, 1);
  set_payload(s, {{"shape", "lshape"}});
  s.theta_true = theta;
  s.grid = {{AxisSpec{0.05, 0.57, 0.065}, AxisSpec{0.02, 0.57, 0.065}, AxisSpec{2.2, 4.0, 0.45}}};
  s.formation.epsilon = 0.1;
  return s;
}

Scenario experiment(const std::string& name, PhysicalParams theta) {
  Scenario s = base_scenario(name, 1);
  set_payload(s, {{"shape", "rectangle"}});
  s.theta_true = theta;
  s.grid = {{AxisSpec{-0.26, 0.26, 0.065}, AxisSpec{-0.06, 0.06, 0.04}, AxisSpec{2.2, 4.0, 0.45}}};
  s.estimator.threshold = 0.53;
  s.estimator.filter_variance = 9.0;
  s.estimator.max_iterations = 200;
  s.formation.mode = FormationMode::kSymmetric;
  s.formation.epsilon = 0.0;
  s.formation.min_spacing = 0.1;
  return s;
}

const std::map<std::string, Scenario (*)()>& builtins() {
  static const std::map<std::string, Scenario (*)()> table{
      {"rect_sim1", [] { return rectangle_sim("rect_sim1", {0.33, 0.01, 3.5}); }},
      {"rect_sim2", [] { return rectangle_sim("rect_sim2", {0.4, 0.01, 3.0}); }},
      {"rectangle", [] { return rectangle_sim("rectangle", {0.33, 0.01, 3.5}); }},
      {"lshape_sim1", [] { return lshape_sim("lshape_sim1", {0.31, 0.1, 3.5}); }},
      {"lshape_sim2", [] { return lshape_sim("lshape_sim2", {0.4, 0.1, 3.5}); }},
      {"lshape", [] { return lshape_sim("lshape", {0.31, 0.1, 3.5}); }},
      {"experiment1", [] { return experiment("experiment1", {0.21, 0.0, 3.23}); }},
      {"experiment2", [] { return experiment("experiment2", {-0.17, 0.014, 3.13}); }},
  };
  return table;
}

}  // namespace

ScenarioError::ScenarioError(const std::string& source, int line, const std::string& field, const std::string& message)
    : ConfigError(format_error(source, line, field, message)), line_(line), field_(field) {}

void Scenario::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) { throw ScenarioError("scenario", 0, field, msg); };
  if (name.empty()) fail("name", "must not be empty");
  try {
    payload.validate();
  } catch (const ConfigError& e) {
    fail("payload", e.what());
  }
  const char* axis_names[3] = {"com_x", "com_y", "mass"};
  for (std::size_t a = 0; a < 3; ++a) {
    const AxisSpec& ax = grid.axes[a];
    if (!(ax.resolution > 0.0)) fail("grid.resolution", std::string(axis_names[a]) + " resolution must be > 0");
    if (!(ax.max >= ax.min)) fail("grid.max", std::string(axis_names[a]) + " max must be >= min");
    if (theta_true[a] < ax.min - 1e-12 || theta_true[a] > ax.max + 1e-12)
      fail("theta_true", std::string(axis_names[a]) + " lies outside the grid range");
  }
  if (!(theta_true.mass > 0.0)) fail("theta_true", "mass must be > 0");
  if (!point_in_polygon(payload.com_region, theta_true.com(), 1e-9))
    fail("theta_true", "COM lies outside the payload footprint");
  if (!(estimator.threshold > 0.0 && estimator.threshold <= 1.0)) fail("estimation.threshold", "must be in (0, 1]");
  if (!(estimator.filter_variance > 0.0)) fail("estimation.filter_variance", "must be > 0");
  if (!(estimator.noise_variance >= 0.0)) fail("estimation.noise_variance", "must be >= 0");
  if (estimator.max_iterations < 0) fail("estimation.max_iterations", "must be >= 0");
  if (estimator.quadrature_nodes < 2) fail("estimation.quadrature_nodes", "must be >= 2");
  if (!(formation.epsilon >= 0.0)) fail("formation.epsilon", "must be >= 0");
  if (!(formation.min_spacing >= 0.0)) fail("formation.min_spacing", "must be >= 0");
  if (formation.restarts < 1) fail("formation.restarts", "must be >= 1");
  if (!(formation.rotor.c_t > 0.0)) fail("formation.c_t", "must be > 0");
  if (!(formation.rotor.c_q >= 0.0)) fail("formation.c_q", "must be >= 0");
  if (payload.n_robots * formation.min_spacing > payload.rail.length())
    fail("formation.min_spacing", "n_robots robots do not fit on the rail at this spacing");
  try {
    ControllerConfig c = flight.controller;
    c.estimated_mass = 1.0;
    c.validate();
  } catch (const ConfigError& e) {
    fail("flight.controller", e.what());
  }
  if (!(flight.trajectory.duration > 0.0)) fail("flight.duration", "must be > 0");
  if (!(flight.sim.horizon > 0.0)) fail("flight.horizon", "must be > 0");
  if (!(flight.sim.physics_rate_hz > 0.0)) fail("flight.physics_rate_hz", "must be > 0");
  if (!(flight.sim.drop_angle > 0.0)) fail("flight.drop_angle", "must be > 0");
  if (!(success_tolerance > 0.0)) fail("success_tolerance", "must be > 0");
}

Scenario scenario_from_json(const Json& j, const std::string& source, const std::string& text) {
  const Reader r(source, text);
  r.expect_object(j, "");
  r.allow_keys(j, "",
               {"name", "seed", "payload", "theta_true", "grid", "estimation", "formation", "flight",
                "success_tolerance"});
  Scenario s;
  s.name = r.string(j, "", "name", "");
  if (s.name.empty()) r.fail("name", "missing required field");
  const Json& seed = r.require(j, "", "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
    r.fail("seed", "expected a non-negative integer");
  s.seed = seed.get<std::uint64_t>();

  auto [payload, spec] = read_payload(r, r.require(j, "", "payload"));
  s.payload = std::move(payload);
  s.payload_spec = std::move(spec);

  const std::vector<double> theta = r.numbers(r.require(j, "", "theta_true"), "theta_true", 3);
  s.theta_true = {theta[0], theta[1], theta[2]};

  const Json& g = r.require(j, "", "grid");
  r.expect_object(g, "grid");
  r.allow_keys(g, "grid", {"min", "max", "resolution"});
  const std::vector<double> lo = r.numbers(r.require(g, "grid", "min"), "grid.min", 3);
  const std::vector<double> hi = r.numbers(r.require(g, "grid", "max"), "grid.max", 3);
  const std::vector<double> res = r.numbers(r.require(g, "grid", "resolution"), "grid.resolution", 3);
  for (std::size_t a = 0; a < 3; ++a) s.grid.axes[a] = {lo[a], hi[a], res[a]};

  if (const Json* e = r.find(j, "estimation")) {
    const std::string p = "estimation";
    r.expect_object(*e, p);
    r.allow_keys(*e, p,
                 {"threshold", "filter_variance", "noise_variance", "max_iterations", "compensate_idle_robots",
                  "quadrature_nodes"});
    EstimatorConfig& c = s.estimator;
    c.threshold = r.number(*e, p, "threshold", c.threshold);
    c.filter_variance = r.number(*e, p, "filter_variance", c.filter_variance);
    c.noise_variance = r.number(*e, p, "noise_variance", c.noise_variance);
    c.max_iterations = static_cast<int>(r.integer(*e, p, "max_iterations", c.max_iterations));
    c.compensate_idle_robots = r.boolean(*e, p, "compensate_idle_robots", c.compensate_idle_robots);
    c.quadrature_nodes = static_cast<int>(r.integer(*e, p, "quadrature_nodes", c.quadrature_nodes));
  }

  if (const Json* f = r.find(j, "formation")) {
    const std::string p = "formation";
    r.expect_object(*f, p);
    r.allow_keys(*f, p, {"mode", "epsilon", "min_spacing", "restarts", "c_t", "c_q", "anchors"});
    FormationConfig& c = s.formation;
    try {
      c.mode = formation_mode_from_string(r.string(*f, p, "mode", to_string(c.mode)));
    } catch (const ConfigError& err) {
      r.fail("formation.mode", err.what());
    }
    c.epsilon = r.number(*f, p, "epsilon", c.epsilon);
    c.min_spacing = r.number(*f, p, "min_spacing", c.min_spacing);
    c.restarts = static_cast<int>(r.integer(*f, p, "restarts", c.restarts));
    c.rotor.c_t = r.number(*f, p, "c_t", c.rotor.c_t);
    c.rotor.c_q = r.number(*f, p, "c_q", c.rotor.c_q);
    if (const Json* a = r.find(*f, "anchors")) c.anchors = r.numbers(*a, "formation.anchors");
  }

  if (const Json* f = r.find(j, "flight")) read_flight(r, *f, s.flight);
  s.flight.controller.max_thrust = s.payload.robot_max_thrust;
  s.success_tolerance = r.number(j, "", "success_tolerance", s.success_tolerance);

  try {
    s.validate();
  } catch (const ScenarioError& e) {
    const std::string what = e.what();
    const std::string prefix = "scenario: " + e.field() + ": ";
    r.fail(e.field(), what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what);
  }
  return s;
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ScenarioError(source, line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0), "", e.what());
  }
  return scenario_from_json(j, source, text);
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path, 0, "", "cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> names;
  for (const auto& [name, make] : builtins()) names.push_back(name);
  return names;
}

Scenario builtin_scenario(const std::string& name) {
  auto it = builtins().find(name);
  if (it == builtins().end()) throw ScenarioError("scenario", 0, "", "unknown built-in scenario '" + name + "'");
  Scenario s = it->second();
  s.flight.controller.max_thrust = s.payload.robot_max_thrust;
  s.validate();
  return s;
}

Scenario resolve_scenario(const std::string& name_or_path) {
  if (builtins().count(name_or_path)) return builtin_scenario(name_or_path);
  return load_scenario_file(name_or_path);
}

Json scenario_to_json(const Scenario& s) {
  Json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["payload"] = s.payload_spec;
  j["theta_true"] = {s.theta_true.com_x, s.theta_true.com_y, s.theta_true.mass};
  Json g;
  for (const AxisSpec& a : s.grid.axes) {
    g["min"].push_back(a.min);
    g["max"].push_back(a.max);
    g["resolution"].push_back(a.resolution);
  }
  j["grid"] = g;
  const EstimatorConfig& e = s.estimator;
  j["estimation"] = {{"threshold", e.threshold},
                     {"filter_variance", e.filter_variance},
                     {"noise_variance", e.noise_variance},
                     {"max_iterations", e.max_iterations},
                     {"compensate_idle_robots", e.compensate_idle_robots},
                     {"quadrature_nodes", e.quadrature_nodes}};
  const FormationConfig& f = s.formation;
  j["formation"] = {{"mode", to_string(f.mode)}, {"epsilon", f.epsilon},     {"min_spacing", f.min_spacing},
                    {"restarts", f.restarts},    {"c_t", f.rotor.c_t},      {"c_q", f.rotor.c_q},
                    {"anchors", f.anchors}};
  const FlightConfig& fl = s.flight;
  Json dist = Json::array();
  for (const DisturbancePulse& p : fl.disturbance)
    dist.push_back({{"start", p.start}, {"duration", p.duration}, {"torque", vec_json(p.torque)}});
  const ControllerConfig& c = fl.controller;
  j["flight"] = {{"start", vec_json(fl.trajectory.start)},
                 {"target", vec_json(fl.trajectory.target)},
                 {"duration", fl.trajectory.duration},
                 {"horizon", fl.sim.horizon},
                 {"physics_rate_hz", fl.sim.physics_rate_hz},
                 {"log_rate_hz", fl.sim.log_rate_hz},
                 {"ramp_time", fl.sim.ramp_time},
                 {"ramp_factor", fl.sim.ramp_factor},
                 {"takeoff_window", fl.sim.takeoff_window},
                 {"liftoff_latency", fl.sim.liftoff_latency},
                 {"drop_angle", fl.sim.drop_angle},
                 {"linear_model", fl.sim.linear_model},
                 {"disturbance", dist},
                 {"controller",
                  {{"position", gains_json(c.position)},
                   {"velocity", gains_json(c.velocity)},
                   {"angle", gains_json(c.angle)},
                   {"rate", gains_json(c.rate)},
                   {"outer_rate_hz", c.outer_rate_hz},
                   {"inner_rate_hz", c.inner_rate_hz},
                   {"max_tilt", c.max_tilt},
                   {"max_velocity", c.max_velocity}}}};
  j["success_tolerance"] = s.success_tolerance;
  return j;
}

}  // namespace cotransport
