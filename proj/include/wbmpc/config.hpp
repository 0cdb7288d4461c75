#pragma once

#include "wbmpc/sim.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace wbmpc {

inline constexpr int kSchemaVersion = 1;

/// Fully resolved task: symbolic references ("nominal", "gravity_compensation") are
/// replaced by numbers, so serializing and re-parsing gives the same task.
struct TaskConfig {
  int schema_version = kSchemaVersion;
  std::string name = "task";

  std::string model_type = "quadruped";  // quadruped, hopper, point_mass
  RobotModel model;                      // rigid-body models
  int point_mass_dims = 2;
  double point_mass_mass = 1.0;

  ContactParams contact;
  double ground_height = 0.0;
  double ground_incline = 0.0;  // rad

  VectorXd nominal_joints;  // robots: stance joint angles solved for static equilibrium
  double nominal_base_x = 0.0;
  VectorXd nominal_state;     // static stance (or the given state for point masses)
  VectorXd nominal_controls;  // holding torques
  VectorXd x0;

  CostFunction cost;
  NlocSettings solver;
  MpcSettings mpc;
  PlantSettings plant;
  TrackingGains tracking;
  std::vector<DisturbanceEvent> disturbances;
  SimSettings sim;
  std::string output_dir = "out";

  GroundPlane ground() const { return GroundPlane::inclined(ground_height, ground_incline); }
  bool is_robot() const { return model_type != "point_mass"; }
  std::vector<std::string> state_names() const;
};

/// Parses a task. Failures throw ConfigError carrying the dotted field path and line.
TaskConfig parse_task(const std::string& text);
TaskConfig load_task(const std::string& path);
std::string serialize_task(const TaskConfig& task);

struct Overrides {
  std::optional<std::string> solver;
  std::optional<double> horizon;
  std::optional<double> control_dt;
  std::optional<double> duration;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<bool> lockstep;
  std::optional<std::string> output_dir;
};

/// Applies command-line overrides and re-validates; throws ConfigError.
void apply_overrides(TaskConfig& task, const Overrides& overrides);

std::shared_ptr<const SecondOrderSystem> make_system(const TaskConfig& task);
NlocSolver make_solver(const TaskConfig& task);
ClosedLoopSetup closed_loop_setup(const TaskConfig& task);

}  // namespace wbmpc
