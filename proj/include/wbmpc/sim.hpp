#pragma once

#include "wbmpc/contact.hpp"
#include "wbmpc/cost.hpp"
#include "wbmpc/mpc.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace wbmpc {

struct PlantSettings {
  double h = 0.0005;
  double mass_scale = 1.0;
  double inertia_scale = 1.0;
  double delay = 0.010;  // measurement to actuation, s
  // Measurement noise standard deviations per state group.
  double noise_base_pose = 0.0;
  double noise_joint_positions = 0.0;
  double noise_base_twist = 0.0;
  double noise_joint_velocities = 0.0;
};

void validate(const PlantSettings& settings);

struct DisturbanceEvent {
  enum class Kind { base_push, ground_step };
  Kind kind = Kind::base_push;
  double start = 0.0;
  double duration = 0.0;
  double magnitude = 0.0;  // N for pushes, m for ground steps
  Vector2d direction = Vector2d(1.0, 0.0);  // world direction of a push
  int foot = 0;  // foot under which the ground is raised

  bool active(double t) const { return t >= start && t < start + duration; }
};

std::string to_string(DisturbanceEvent::Kind kind);
DisturbanceEvent::Kind disturbance_kind_from_string(const std::string& name);
void validate(const DisturbanceEvent& event, int n_ee);

struct TrackingGains {
  VectorXd kp;  // per joint
  VectorXd kd;
  double torque_limit = 40.0;
  double dt = 0.0025;  // tracking controller period
};

void validate(const TrackingGains& gains, int nu);

struct TrackingOutput {
  VectorXd torque;     // saturated, applied
  VectorXd commanded;  // before saturation
  VectorXd ff;
  VectorXd fb;
  VectorXd pd;
  bool saturated = false;
  bool outside_policy = false;  // t beyond the policy, last stage held
};

/// tau = u_ff(t) + K(t) (x - x_ref(t)) + P (q_ref - q) + D (v_ref - v) on the joints,
/// clamped entrywise to the torque limit.
TrackingOutput tracking_control(const MpcPolicy& policy, const VectorXd& x, double t,
                                const TrackingGains& gains);

/// Simulated robot: mismatched model, ground steps under individual feet and pushes
/// on the base.
class Plant {
 public:
  Plant(const RobotModel& nominal, ContactParams contact, GroundPlane ground,
        PlantSettings settings, std::vector<DisturbanceEvent> disturbances);

  /// One substep of length settings.h at time t.
  VectorXd step(const VectorXd& x, const VectorXd& tau, double t);
  const RobotDynamics& dynamics_at(double t);
  const RobotModel& model() const { return *model_; }
  const PlantSettings& settings() const { return settings_; }

 private:
  std::shared_ptr<const RobotModel> model_;
  ContactParams contact_;
  GroundPlane ground_;
  PlantSettings settings_;
  std::vector<DisturbanceEvent> disturbances_;
  std::vector<bool> active_;
  std::unique_ptr<RobotDynamics> dynamics_;
};

/// Stance-based ground estimate. Each foot's last stance contact point, corrected by
/// the penetration that explains its normal force under the contact model, enters a
/// fit through all feet seen in stance so far.
class GroundEstimator {
 public:
  GroundEstimator(int n_ee, ContactParams contact, double stance_threshold, GroundFit fit);

  /// `normal_forces` are the measured contact-normal forces of each foot.
  void observe(const RobotModel& model, const VectorXd& x, const VectorXd& normal_forces);
  bool has_estimate() const;
  GroundPlane estimate() const;

 private:
  ContactParams contact_;
  double threshold_;
  GroundFit fit_;
  std::vector<Vector2d> points_;
  std::vector<bool> seen_;
};

struct SimSettings {
  double duration = 2.0;
  bool lockstep = true;
  double lockstep_solve_time = 0.012;  // simulated solver time per update
  std::uint64_t seed = 1;
  double fall_fraction = 0.4;  // of the nominal base height
  double stance_threshold = 1.0;  // N
  bool estimate_ground = true;
  GroundFit ground_fit = GroundFit::line;
};

struct LogRow {
  double time = 0.0;
  VectorXd state;
  VectorXd torque;
  VectorXd ff;
  VectorXd fb;
  VectorXd pd;
  double solve_ms = 0.0;
  double cost = 0.0;
  double defect_norm = 0.0;
  double alpha = 0.0;
  VectorXd normal_forces;
  VectorXd reference;
  bool saturated = false;
};

struct UpdateRecord {
  double t_meas = 0.0;
  double t_available = 0.0;
  double solve_ms = 0.0;  // time charged to the solver (simulated in lockstep)
  double wall_ms = 0.0;   // measured wall clock
  double prepare_ms = 0.0;
  double cost = 0.0;
  double defect_norm = 0.0;
  double ff_norm = 0.0;
  double alpha = 0.0;
  double handoff_jump = 0.0;
  bool fallback = false;
};

struct ClosedLoopLog {
  std::vector<std::string> state_names;
  int nu = 0;
  int n_ee = 0;
  std::vector<LogRow> rows;
  std::vector<UpdateRecord> updates;
  double nominal_height = 0.0;
  bool success = true;
  std::string failure;
};

/// Everything a closed-loop run needs, already resolved.
struct ClosedLoopSetup {
  RobotModel model;
  ContactParams contact;
  GroundPlane ground;
  VectorXd x0;
  CostFunction cost;
  NlocSettings solver;
  MpcSettings mpc;
  PlantSettings plant;
  TrackingGains tracking;
  std::vector<DisturbanceEvent> disturbances;
  SimSettings sim;
  double nominal_height = 0.0;  // 0 means the initial base height
};

/// Runs plant, tracking controller and MPC. The plant and tracking loop advance in
/// simulated time; each MPC update is charged its solve time (simulated in lockstep,
/// measured otherwise) plus the actuation delay before its policy takes effect.
/// Failures (fall, divergence) end the run with success == false and a reason.
ClosedLoopLog run_closed_loop(const ClosedLoopSetup& setup);

std::vector<std::string> state_names(const RobotModel& model);

void write_log_csv(const ClosedLoopLog& log, std::ostream& out);
void write_updates_csv(const ClosedLoopLog& log, std::ostream& out);

/// Column of the closed-loop CSV by name; throws IndexOutOfRange.
std::vector<double> log_column(const ClosedLoopLog& log, const std::string& name);

}  // namespace wbmpc
