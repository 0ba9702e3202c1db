#include "cotransport/flightsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <Eigen/Dense>

#include "cotransport/errors.hpp"

namespace cotransport {

namespace {

using Vec13 = Eigen::Matrix<double, 13, 1>;

Eigen::Matrix3d point_mass_inertia(double m, const Eigen::Vector3d& d) {
  return m * (d.squaredNorm() * Eigen::Matrix3d::Identity() - d * d.transpose());
}

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

Vec13 pack(const RigidBodyState& s, bool linear) {
  Vec13 x;
  x.segment<3>(0) = s.position;
  x.segment<3>(3) = s.velocity;
  if (linear) {
    x.segment<3>(6) = euler_angles(s.attitude);
    x(9) = 0.0;
  } else {
    x(6) = s.attitude.w();
    x(7) = s.attitude.x();
    x(8) = s.attitude.y();
    x(9) = s.attitude.z();
  }
  x.segment<3>(10) = s.angular_velocity;
  return x;
}

RigidBodyState unpack(const Vec13& x, bool linear) {
  RigidBodyState s;
  s.position = x.segment<3>(0);
  s.velocity = x.segment<3>(3);
  if (linear) {
    s.attitude = quaternion_from_euler(x.segment<3>(6));
  } else {
    s.attitude = Eigen::Quaterniond(x(6), x(7), x(8), x(9)).normalized();
  }
  s.angular_velocity = x.segment<3>(10);
  return s;
}

Vec13 derivative(const Vec13& x, double thrust, const Eigen::Vector3d& torque, const RigidBodyModel& m) {
  Vec13 dx = Vec13::Zero();
  const Eigen::Vector3d w = x.segment<3>(10);
  dx.segment<3>(0) = x.segment<3>(3);
  if (m.linear) {
    const Eigen::Vector3d rpy = x.segment<3>(6);
    dx.segment<3>(3) = Eigen::Vector3d(rpy.y(), -rpy.x(), 1.0) * (thrust / m.mass) -
                       Eigen::Vector3d(0.0, 0.0, m.gravity);
    dx.segment<3>(6) = w;
    dx.segment<3>(10) = m.inertia_inv * torque;
    return dx;
  }
  // RK4 stages drift off unit length; rotate with the normalized copy.
  const Eigen::Quaterniond q(x(6), x(7), x(8), x(9));
  const Eigen::Quaterniond qn = q.normalized();
  dx.segment<3>(3) = qn * Eigen::Vector3d(0.0, 0.0, thrust / m.mass) - Eigen::Vector3d(0.0, 0.0, m.gravity);
  const Eigen::Quaterniond qdot = q * Eigen::Quaterniond(0.0, w.x(), w.y(), w.z());
  dx(6) = 0.5 * qdot.w();
  dx(7) = 0.5 * qdot.x();
  dx(8) = 0.5 * qdot.y();
  dx(9) = 0.5 * qdot.z();
  dx.segment<3>(10) = m.inertia_inv * (torque - w.cross(m.inertia * w));
  return dx;
}

}  // namespace

Eigen::Matrix3d slab_inertia(const Polygon& footprint, double mass) {
  const std::size_t n = footprint.size();
  double area2 = 0.0, ix = 0.0, iy = 0.0, ixy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = footprint[i];
    const Vec2& b = footprint[(i + 1) % n];
    const double cross = a.x() * b.y() - b.x() * a.y();
    area2 += cross;
    ix += cross * (a.y() * a.y() + a.y() * b.y() + b.y() * b.y());
    iy += cross * (a.x() * a.x() + a.x() * b.x() + b.x() * b.x());
    ixy += cross * (a.x() * b.y() + 2.0 * a.x() * a.y() + 2.0 * b.x() * b.y() + b.x() * a.y());
  }
  const double area = 0.5 * area2;
  if (std::abs(area) < 1e-15) throw GeometryError("degenerate footprint");
  ix /= 12.0;
  iy /= 12.0;
  ixy /= 24.0;
  const Vec2 c = polygon_centroid(footprint);
  // Second moments about the centroid, normalized by area.
  const double syy = ix / area - c.y() * c.y();
  const double sxx = iy / area - c.x() * c.x();
  const double sxy = ixy / area - c.x() * c.y();
  Eigen::Matrix3d J;
  J << mass * syy, -mass * sxy, 0.0,
       -mass * sxy, mass * sxx, 0.0,
       0.0, 0.0, mass * (sxx + syy);
  return J;
}

MassProperties assembly_inertia(const PayloadModel& payload, std::span<const Vec2> robot_positions,
                                const PhysicalParams& theta, bool slab) {
  MassProperties mp;
  const Eigen::Vector3d cp(theta.com_x, theta.com_y, 0.0);
  mp.mass = theta.mass + payload.robot_mass * static_cast<double>(robot_positions.size());
  Eigen::Vector3d moment = theta.mass * cp;
  for (const Vec2& r : robot_positions) moment += payload.robot_mass * Eigen::Vector3d(r.x(), r.y(), 0.0);
  mp.com = moment / mp.mass;
  mp.inertia = slab ? slab_inertia(payload.footprint, theta.mass) : Eigen::Matrix3d::Zero();
  mp.inertia += point_mass_inertia(theta.mass, cp - mp.com);
  for (const Vec2& r : robot_positions)
    mp.inertia += point_mass_inertia(payload.robot_mass, Eigen::Vector3d(r.x(), r.y(), 0.0) - mp.com);
  return mp;
}

Eigen::Vector3d euler_angles(const Eigen::Quaterniond& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  const double roll = std::atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y));
  const double pitch = std::asin(std::clamp(2.0 * (w * y - z * x), -1.0, 1.0));
  const double yaw = std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
  return {roll, pitch, yaw};
}

Eigen::Quaterniond quaternion_from_euler(const Eigen::Vector3d& rpy) {
  return Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
         Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
         Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX());
}

RigidBodyModel make_rigid_body(const MassProperties& mp, const Formation& formation, double gravity,
                               bool linear) {
  RigidBodyModel m;
  m.mass = mp.mass;
  m.inertia = mp.inertia;
  m.inertia_inv = mp.inertia.inverse();
  if (!m.inertia_inv.allFinite()) throw GeometryError("singular assembly inertia");
  for (std::size_t j = 0; j < formation.positions.size(); ++j) {
    const Vec2& p = formation.positions[j];
    m.arms.push_back(Eigen::Vector3d(p.x(), p.y(), 0.0) - mp.com);
    m.yaw_per_newton.push_back(formation.signs[j] * formation.rotor.c_q / formation.rotor.c_t);
  }
  m.gravity = gravity;
  m.linear = linear;
  return m;
}

Eigen::Vector3d thrust_torque(const RigidBodyModel& model, std::span<const double> thrusts) {
  Eigen::Vector3d tau = Eigen::Vector3d::Zero();
  for (std::size_t j = 0; j < thrusts.size(); ++j) {
    const Eigen::Vector3d& r = model.arms[j];
    tau += Eigen::Vector3d(r.y() * thrusts[j], -r.x() * thrusts[j], model.yaw_per_newton[j] * thrusts[j]);
  }
  return tau;
}

RigidBodyState dynamics_step(const RigidBodyState& s, std::span<const double> thrusts,
                             const Eigen::Vector3d& disturbance, const RigidBodyModel& model, double dt) {
  if (!(dt > 0.0 && dt <= 0.01)) throw SimulationError("integration step must be in (0, 0.01] s");
  if (thrusts.size() != model.arms.size()) throw SimulationError("thrust count does not match the robots");
  double total = 0.0;
  for (double f : thrusts) total += f;
  const Eigen::Vector3d torque = thrust_torque(model, thrusts) + disturbance;

  const Vec13 x = pack(s, model.linear);
  const Vec13 k1 = derivative(x, total, torque, model);
  const Vec13 k2 = derivative(x + 0.5 * dt * k1, total, torque, model);
  const Vec13 k3 = derivative(x + 0.5 * dt * k2, total, torque, model);
  const Vec13 k4 = derivative(x + dt * k3, total, torque, model);
  const Vec13 next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return unpack(next, model.linear);
}

Eigen::Vector3d Pid::step(const Eigen::Vector3d& error, double dt) {
  integral_ = (integral_ + error * dt).cwiseMax(-gains_.integral_limit).cwiseMin(gains_.integral_limit);
  const Eigen::Vector3d derivative = primed_ ? Eigen::Vector3d((error - previous_) / dt) : Eigen::Vector3d::Zero();
  previous_ = error;
  primed_ = true;
  return gains_.kp.cwiseProduct(error) + gains_.ki.cwiseProduct(integral_) + gains_.kd.cwiseProduct(derivative);
}

void Pid::reset() {
  integral_.setZero();
  previous_.setZero();
  primed_ = false;
}

ControllerConfig ControllerConfig::defaults() {
  ControllerConfig c;
  c.position.kp = {1.2, 1.2, 1.5};
  c.velocity.kp = {2.5, 2.5, 4.0};
  c.velocity.ki = {0.4, 0.4, 1.5};
  c.velocity.integral_limit = {2.0, 2.0, 3.0};
  c.angle.kp = {7.0, 7.0, 4.0};
  c.rate.kp = {25.0, 25.0, 12.0};
  c.rate.ki = {10.0, 10.0, 2.0};
  c.rate.integral_limit = {20.0, 20.0, 5.0};
  return c;
}

void ControllerConfig::validate() const {
  for (const PidGains* g : {&position, &velocity, &angle, &rate}) {
    if ((g->kp.array() < 0).any() || (g->ki.array() < 0).any() || (g->kd.array() < 0).any())
      throw ConfigError("controller gains must be >= 0");
    if ((g->integral_limit.array() < 0).any()) throw ConfigError("integrator limits must be >= 0");
  }
  if (!(outer_rate_hz > 0.0) || inner_rate_hz < outer_rate_hz)
    throw ConfigError("controller rates: need inner_rate_hz >= outer_rate_hz > 0");
  if (!(max_thrust > 0.0)) throw ConfigError("max_thrust must be > 0");
  if (!(max_tilt > 0.0 && max_tilt < 1.5)) throw ConfigError("max_tilt must be in (0, 1.5) rad");
}

TrajectoryPoint TrajectorySpec::at(double t, double t_start) const {
  TrajectoryPoint p;
  const Eigen::Vector3d delta = target - start;
  if (!(duration > 0.0)) {
    p.position = t >= t_start ? target : start;
    return p;
  }
  const double tau = std::clamp((t - t_start) / duration, 0.0, 1.0);
  const double s = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
  double ds = 0.0, dds = 0.0;
  if (tau > 0.0 && tau < 1.0) {
    ds = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) / duration;
    dds = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau) / (duration * duration);
  }
  p.position = start + delta * s;
  p.velocity = delta * ds;
  p.acceleration = delta * dds;
  return p;
}

CascadedController::CascadedController(ControllerConfig config, double gravity)
    : config_(std::move(config)),
      gravity_(gravity),
      position_(config_.position),
      velocity_(config_.velocity),
      angle_(config_.angle),
      rate_(config_.rate) {
  config_.validate();
  if (!(config_.estimated_mass > 0.0)) throw ConfigError("controller needs an estimated mass > 0");
}

void CascadedController::update_outer(const RigidBodyState& s, const TrajectoryPoint& ref) {
  const double dt = 1.0 / config_.outer_rate_hz;
  const Eigen::Vector3d v_cmd = (position_.step(ref.position - s.position, dt) + ref.velocity)
                                    .cwiseMax(-config_.max_velocity)
                                    .cwiseMin(config_.max_velocity);
  const Eigen::Vector3d a = velocity_.step(v_cmd - s.velocity, dt) + ref.acceleration;
  const Eigen::Vector3d rpy = euler_angles(s.attitude);
  const double c = std::cos(rpy.z()), sn = std::sin(rpy.z());
  attitude_ref_.x() = std::clamp((a.x() * sn - a.y() * c) / gravity_, -config_.max_tilt, config_.max_tilt);
  attitude_ref_.y() = std::clamp((a.x() * c + a.y() * sn) / gravity_, -config_.max_tilt, config_.max_tilt);
  attitude_ref_.z() = 0.0;
  const double tilt = std::max(std::cos(rpy.x()) * std::cos(rpy.y()), 0.5);
  thrust_ = std::max(0.0, config_.estimated_mass * (gravity_ + a.z()) / tilt);
}

ControlWrench CascadedController::update_inner(const RigidBodyState& s) {
  const double dt = 1.0 / config_.inner_rate_hz;
  const Eigen::Vector3d rpy = euler_angles(s.attitude);
  Eigen::Vector3d e = attitude_ref_ - rpy;
  e.z() = wrap_angle(e.z());
  const Eigen::Vector3d w_cmd = angle_.step(e, dt);
  const Eigen::Vector3d& w = s.angular_velocity;
  const Eigen::Vector3d alpha = rate_.step(w_cmd - w, dt);
  const Eigen::Matrix3d& J = config_.estimated_inertia;
  return {thrust_, J * alpha + w.cross(J * w)};
}

Mixer::Mixer(const Formation& formation, const Vec2& estimated_com, double max_thrust)
    : max_thrust_(max_thrust) {
  const std::size_t n = formation.positions.size();
  A_.resize(4, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const Vec2 r = formation.positions[j] - estimated_com;
    const Eigen::Index c = static_cast<Eigen::Index>(j);
    A_(0, c) = 1.0;
    A_(1, c) = r.y();
    A_(2, c) = -r.x();
    A_(3, c) = formation.signs[j] * formation.rotor.c_q / formation.rotor.c_t;
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(A_);
  if (lu.rank() < 4) throw PlanningError("formation allocation matrix is rank deficient");
  const Eigen::Matrix4d AAt = A_ * A_.transpose();
  pinv_ = A_.transpose() * AAt.inverse();
}

MixResult Mixer::mix(const ControlWrench& w) const {
  Eigen::Vector4d target;
  target << w.thrust, w.torque;
  const Eigen::VectorXd f = pinv_ * target;
  MixResult r;
  r.residual = A_ * f - target;
  r.thrusts.resize(static_cast<std::size_t>(f.size()));
  r.saturated.resize(r.thrusts.size());
  for (Eigen::Index j = 0; j < f.size(); ++j) {
    const double clamped = std::clamp(f(j), 0.0, max_thrust_);
    r.saturated[j] = clamped != f(j);
    r.any_saturated = r.any_saturated || r.saturated[j];
    r.thrusts[j] = clamped;
  }
  return r;
}

Eigen::Vector3d disturbance_at(std::span<const DisturbancePulse> profile, double t) {
  Eigen::Vector3d tau = Eigen::Vector3d::Zero();
  for (const DisturbancePulse& p : profile)
    if (t >= p.start && t < p.start + p.duration) tau += p.torque;
  return tau;
}

std::vector<DisturbancePulse> default_disturbance() {
  return {{5.0, 0.3, {0.3, 1.5, 0.05}}, {8.0, 0.3, {-0.3, -1.5, -0.05}}};
}

FlightLog run_flight(const PayloadModel& payload, const Formation& formation, const PhysicalParams& theta_true,
                     const PhysicalParams& theta_hat, const FlightConfig& config) {
  const SimConfig& sim = config.sim;
  if (!(sim.physics_rate_hz > 0.0 && sim.log_rate_hz > 0.0 && sim.horizon > 0.0))
    throw ConfigError("sim rates and horizon must be > 0");
  const double dt = 1.0 / sim.physics_rate_hz;
  auto divisor = [&](double rate, const char* what) {
    const double d = sim.physics_rate_hz / rate;
    const long k = std::lround(d);
    if (k < 1 || std::abs(d - static_cast<double>(k)) > 1e-9)
      throw ConfigError(std::string(what) + " rate must divide the physics rate");
    return k;
  };
  const long outer_div = divisor(config.controller.outer_rate_hz, "outer loop");
  const long inner_div = divisor(config.controller.inner_rate_hz, "inner loop");
  const long log_div = divisor(sim.log_rate_hz, "log");
  if (outer_div % inner_div != 0) throw ConfigError("inner loop rate must be a multiple of the outer rate");

  const MassProperties truth = assembly_inertia(payload, formation.positions, theta_true);
  const MassProperties estimate = assembly_inertia(payload, formation.positions, theta_hat);
  const RigidBodyModel model = make_rigid_body(truth, formation, payload.gravity, sim.linear_model);

  ControllerConfig ctrl_cfg = config.controller;
  ctrl_cfg.estimated_mass = estimate.mass;
  ctrl_cfg.estimated_inertia = estimate.inertia;
  CascadedController controller(ctrl_cfg, payload.gravity);
  const Mixer mixer(formation, estimate.com.head<2>(), ctrl_cfg.max_thrust);

  const std::size_t n = formation.positions.size();
  const long steps = std::lround(sim.horizon * sim.physics_rate_hz);
  long engage = std::lround(std::max(0.0, sim.ramp_time) * sim.physics_rate_hz);
  auto align = [&](long k) { return ((k + outer_div - 1) / outer_div) * outer_div; };
  engage = align(engage);
  const long ramp_steps = engage;
  double t_engage = static_cast<double>(engage) * dt;
  const double ramp_total = sim.ramp_factor * estimate.mass * payload.gravity;
  const double per_robot_cap = ctrl_cfg.max_thrust;

  FlightLog log;
  RigidBodyState state;
  state.position = config.trajectory.start;
  bool airborne = false;
  std::vector<double> thrusts(n, 0.0);
  long inner_updates = 0, saturated_updates = 0;
  Eigen::Vector3d sq_err = Eigen::Vector3d::Zero();
  long tracked = 0;

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const TrajectoryPoint ref = config.trajectory.at(t, t_engage);
    if (k >= engage) {
      if ((k - engage) % outer_div == 0) controller.update_outer(state, ref);
      if ((k - engage) % inner_div == 0) {
        const MixResult m = mixer.mix(controller.update_inner(state));
        thrusts = m.thrusts;
        ++inner_updates;
        if (m.any_saturated) ++saturated_updates;
      }
    } else {
      const double ramp = ramp_steps > 0 ? static_cast<double>(k) / static_cast<double>(ramp_steps) : 1.0;
      std::fill(thrusts.begin(), thrusts.end(), std::min(per_robot_cap, ramp * ramp_total / n));
    }
    const Eigen::Vector3d dist = disturbance_at(config.disturbance, t);

    if (k % log_div == 0 || k == steps) {
      FlightSample sample;
      sample.t = t;
      sample.position = state.position;
      sample.rpy = euler_angles(state.attitude);
      sample.reference = ref.position;
      sample.thrusts = thrusts;
      sample.disturbance = dist;
      const double tilt = std::max(std::abs(sample.rpy.x()), std::abs(sample.rpy.y()));
      log.peak_tilt = std::max(log.peak_tilt, tilt);
      if (t <= t_engage + sim.takeoff_window) log.peak_tilt_takeoff = std::max(log.peak_tilt_takeoff, tilt);
      if (t >= t_engage) {
        sq_err += (sample.position - sample.reference).cwiseAbs2();
        ++tracked;
      }
      log.samples.push_back(std::move(sample));
      if (tilt > sim.drop_angle) {
        log.dropped = true;
        log.drop_time = t;
        break;
      }
    }
    if (k == steps) break;

    if (!airborne) {
      double total = 0.0;
      for (double f : thrusts) total += f;
      if (total > model.mass * payload.gravity) {
        airborne = true;
        log.liftoff_time = t;
        if (sim.liftoff_latency >= 0.0 && k < engage) {
          engage = std::min(engage, align(k + 1 + std::lround(sim.liftoff_latency * sim.physics_rate_hz)));
          t_engage = static_cast<double>(engage) * dt;
        }
      }
    }
    if (airborne) {
      state = dynamics_step(state, thrusts, dist, model, dt);
      if (state.position.z() < 0.0) {
        state.position.z() = 0.0;
        state.velocity.z() = std::max(0.0, state.velocity.z());
      }
      if (!state.position.allFinite() || !state.velocity.allFinite() || !state.angular_velocity.allFinite() ||
          !state.attitude.coeffs().allFinite()) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "non-finite state at t = %.6f s", t + dt);
        throw SimulationError(buf);
      }
    }
  }

  log.engage_time = t_engage;
  if (tracked > 0) log.rmse = (sq_err / static_cast<double>(tracked)).cwiseSqrt();
  log.final_position = log.samples.back().position;
  log.final_error = (log.final_position - config.trajectory.target).norm();
  log.saturation_fraction =
      inner_updates > 0 ? static_cast<double>(saturated_updates) / static_cast<double>(inner_updates) : 0.0;
  return log;
}

bool exceeds_tilt(const FlightLog& log, double angle) {
  return std::any_of(log.samples.begin(), log.samples.end(), [&](const FlightSample& s) {
    return std::max(std::abs(s.rpy.x()), std::abs(s.rpy.y())) > angle;
  });
}

void write_flight_csv(std::ostream& out, const FlightLog& log) {
  const std::size_t n = log.samples.empty() ? 0 : log.samples.front().thrusts.size();
  out << "t,x,y,z,roll,pitch,yaw,x_ref,y_ref,z_ref";
  for (std::size_t j = 0; j < n; ++j) out << ",u_" << j + 1;
  out << ",dist_x,dist_y,dist_z\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (const FlightSample& s : log.samples) {
    put(s.t);
    for (double v : {s.position.x(), s.position.y(), s.position.z(), s.rpy.x(), s.rpy.y(), s.rpy.z(),
                     s.reference.x(), s.reference.y(), s.reference.z()}) {
      out << ',';
      put(v);
    }
    for (double u : s.thrusts) {
      out << ',';
      put(u);
    }
    for (int a = 0; a < 3; ++a) {
      out << ',';
      put(s.disturbance(a));
    }
    out << '\n';
  }
}

}  // namespace cotransport
