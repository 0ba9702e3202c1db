#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "cotransport/formation.hpp"
#include "cotransport/payload_model.hpp"

namespace cotransport {

struct MassProperties {
  double mass = 0.0;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();          // payload frame
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();      // about com, body axes
};

// Second moments of a thin uniform slab with the footprint's shape, about its centroid.
Eigen::Matrix3d slab_inertia(const Polygon& footprint, double mass);

/// Payload (mass theta.mass at theta.com) plus point-mass robots at
/// `robot_positions`. With slab = false the payload is a point mass.
MassProperties assembly_inertia(const PayloadModel& payload, std::span<const Vec2> robot_positions,
                                const PhysicalParams& theta, bool slab = true);

struct RigidBodyState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // world, of the assembly COM
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // world
  Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();  // body to world
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();    // body
};

// ZYX roll, pitch, yaw.
Eigen::Vector3d euler_angles(const Eigen::Quaterniond& q);
Eigen::Quaterniond quaternion_from_euler(const Eigen::Vector3d& rpy);

struct RigidBodyModel {
  double mass = 1.0;
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d inertia_inv = Eigen::Matrix3d::Identity();
  std::vector<Eigen::Vector3d> arms;  // robot positions relative to the COM, body frame
  std::vector<double> yaw_per_newton;  // s_j * c_q / c_t
  double gravity = 9.81;
  bool linear = false;  // small-angle model instead of full rigid body
};

RigidBodyModel make_rigid_body(const MassProperties& mp, const Formation& formation, double gravity,
                               bool linear = false);

// Net body force along z and body torque produced by per-robot thrusts (N).
Eigen::Vector3d thrust_torque(const RigidBodyModel& model, std::span<const double> thrusts);

/// One fixed-step RK4 update with thrusts and disturbance torque held.
RigidBodyState dynamics_step(const RigidBodyState& s, std::span<const double> thrusts,
                             const Eigen::Vector3d& disturbance, const RigidBodyModel& model, double dt);

struct PidGains {
  Eigen::Vector3d kp = Eigen::Vector3d::Zero();
  Eigen::Vector3d ki = Eigen::Vector3d::Zero();
  Eigen::Vector3d kd = Eigen::Vector3d::Zero();
  Eigen::Vector3d integral_limit = Eigen::Vector3d::Constant(1e9);
};

/// Per-axis PID with derivative on error and clamped integrator.
class Pid {
 public:
  Pid() = default;
  explicit Pid(PidGains gains) : gains_(std::move(gains)) {}
  Eigen::Vector3d step(const Eigen::Vector3d& error, double dt);
  void reset();
  const Eigen::Vector3d& integral() const { return integral_; }

 private:
  PidGains gains_;
  Eigen::Vector3d integral_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d previous_ = Eigen::Vector3d::Zero();
  bool primed_ = false;
};

struct ControllerConfig {
  PidGains position;
  PidGains velocity;
  PidGains angle;
  PidGains rate;
  double outer_rate_hz = 50.0;
  double inner_rate_hz = 250.0;
  double max_tilt = 0.35;      // rad
  double max_velocity = 1.5;   // m/s per axis
  double max_thrust = 14.2;    // per robot, N
  double estimated_mass = 0.0;  // assembly, for gravity compensation
  Eigen::Matrix3d estimated_inertia = Eigen::Matrix3d::Identity();

  static ControllerConfig defaults();
  void validate() const;
};

struct TrajectoryPoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
};

/// Quintic rest-to-rest move from start to target over [t_start, t_start + duration].
struct TrajectorySpec {
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d target{0.3, 1.98, 0.5};
  double duration = 6.0;

  TrajectoryPoint at(double t, double t_start) const;
};

struct ControlWrench {
  double thrust = 0.0;
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();
};

/// Position -> velocity -> attitude -> rate cascade. The outer pair runs at
/// outer_rate_hz, the inner pair at inner_rate_hz; between ticks outputs hold.
class CascadedController {
 public:
  CascadedController() = default;
  CascadedController(ControllerConfig config, double gravity);

  void update_outer(const RigidBodyState& s, const TrajectoryPoint& ref);
  ControlWrench update_inner(const RigidBodyState& s);

  const Eigen::Vector3d& attitude_reference() const { return attitude_ref_; }
  double collective() const { return thrust_; }
  const ControllerConfig& config() const { return config_; }

 private:
  ControllerConfig config_;
  double gravity_ = 9.81;
  Pid position_, velocity_, angle_, rate_;
  Eigen::Vector3d attitude_ref_ = Eigen::Vector3d::Zero();
  double thrust_ = 0.0;
};

struct MixResult {
  std::vector<double> thrusts;
  std::vector<bool> saturated;
  bool any_saturated = false;
  Eigen::Vector4d residual = Eigen::Vector4d::Zero();  // A f - w before clamping
};

/// Allocation A f = (T, tau_x, tau_y, tau_z) with rows 1, y_j, -x_j and s_j c_q / c_t,
/// i.e. B's rows reordered to physical torques about the estimated COM.
class Mixer {
 public:
  Mixer() = default;
  // Throws PlanningError when A does not have full row rank.
  Mixer(const Formation& formation, const Vec2& estimated_com, double max_thrust);

  MixResult mix(const ControlWrench& w) const;
  const Eigen::MatrixXd& allocation() const { return A_; }

 private:
  Eigen::MatrixXd A_;
  Eigen::MatrixXd pinv_;
  double max_thrust_ = 0.0;
};

struct DisturbancePulse {
  double start = 0.0;
  double duration = 0.0;
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();  // body frame, N m
};

Eigen::Vector3d disturbance_at(std::span<const DisturbancePulse> profile, double t);
std::vector<DisturbancePulse> default_disturbance();

struct SimConfig {
  double physics_rate_hz = 1000.0;
  double log_rate_hz = 100.0;
  double horizon = 12.0;
  double ramp_time = 1.5;     // equal-thrust takeoff ramp, closed loop engages at its end
  double ramp_factor = 1.1;   // ramp target as a multiple of estimated weight
  double liftoff_latency = 0.05;  // closed loop engages this long after liftoff; < 0 waits for the ramp end
  double takeoff_window = 2.0;  // after engagement, for the takeoff attitude metric
  double drop_angle = 0.7853981633974483;
  bool linear_model = false;
};

struct FlightConfig {
  ControllerConfig controller = ControllerConfig::defaults();
  SimConfig sim;
  TrajectorySpec trajectory;
  std::vector<DisturbancePulse> disturbance = default_disturbance();
};

struct FlightSample {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
  Eigen::Vector3d reference = Eigen::Vector3d::Zero();
  std::vector<double> thrusts;
  Eigen::Vector3d disturbance = Eigen::Vector3d::Zero();
};

struct FlightLog {
  std::vector<FlightSample> samples;
  bool dropped = false;
  double drop_time = 0.0;
  double liftoff_time = -1.0;
  double engage_time = 0.0;
  double peak_tilt = 0.0;          // max |roll|, |pitch| over the flight (rad)
  double peak_tilt_takeoff = 0.0;  // same, up to engage_time + takeoff_window
  Eigen::Vector3d rmse = Eigen::Vector3d::Zero();
  Eigen::Vector3d final_position = Eigen::Vector3d::Zero();
  double final_error = 0.0;        // distance to the trajectory target
  double saturation_fraction = 0.0;

  std::string verdict() const { return dropped ? "dropped" : "completed"; }
};

FlightLog run_flight(const PayloadModel& payload, const Formation& formation, const PhysicalParams& theta_true,
                     const PhysicalParams& theta_hat, const FlightConfig& config);

// True iff some logged |roll| or |pitch| exceeds the angle.
bool exceeds_tilt(const FlightLog& log, double angle);

void write_flight_csv(std::ostream& out, const FlightLog& log);

}  // namespace cotransport
