#pragma once

// Test-time oracles. Nothing here shares derivative or kinematics code with the
// modules it checks.

#include "wbmpc/integrator.hpp"
#include "wbmpc/lqoc.hpp"
#include "wbmpc/model.hpp"
#include "wbmpc/sim.hpp"

#include <functional>
#include <string>
#include <vector>

namespace wbmpc {

struct FDSettings {
  double step = 1e-6;
};

using VectorMap = std::function<VectorXd(const VectorXd&)>;

/// Central-difference Jacobian of f at x.
MatrixXd fd_jacobian(const VectorMap& f, const VectorXd& x, const FDSettings& settings = {});

struct DenseLqocSolution {
  std::vector<VectorXd> dx;  // N + 1
  std::vector<VectorXd> du;  // N
};

/// Solves the LQ problem as one KKT system over all stages. Throws SingularKKT.
DenseLqocSolution solve_dense_oracle(const LqocProblemd& problem);

/// Body centres of mass and absolute angles from the leg parameters alone.
std::vector<BodyPose> body_poses_oracle(const RobotModel& model, const VectorXd& q);

/// Kinetic energy with body velocities from central differences of the poses along the
/// configuration rate implied by v.
double kinetic_energy_oracle(const RobotModel& model, const VectorXd& q, const VectorXd& v);
double potential_energy_oracle(const RobotModel& model, const VectorXd& q);
double total_energy_oracle(const RobotModel& model, const VectorXd& x);

/// Mass matrix in generalized velocities as the Hessian of the kinetic energy in v.
MatrixXd mass_matrix_oracle(const RobotModel& model, const VectorXd& q);

/// Generalized gravity force, the potential-energy gradient mapped to generalized velocities.
VectorXd gravity_oracle(const RobotModel& model, const VectorXd& q);

/// World-frame linear momentum of all bodies.
Vector2d linear_momentum_oracle(const RobotModel& model, const VectorXd& q, const VectorXd& v);

/// Dominant period of a uniformly sampled signal from its autocorrelation. Needs at
/// least three repetitions; throws NoPeriodicity otherwise.
double extract_limit_cycle_period(const std::vector<double>& signal, double dt);

/// Period of log column `column` restricted to t in [t_begin, t_end).
double extract_limit_cycle_period(const ClosedLoopLog& log, const std::string& column,
                                  double t_begin, double t_end);

struct StabilitySettings {
  double window = 1.0;        // s of simulated time
  double growth_bound = 1e3;  // bounded means |x| < growth_bound * |x0| throughout
  double tolerance = 1e-4;    // bisection width, s
  double h_start = 1e-4;  // first probe; halved until stable
  double h_min = 1e-7;
  double h_max = 0.5;
};

/// True if a constant-input rollout with step h stays finite and bounded for the window.
bool stable_at(const SecondOrderSystem& system, Scheme scheme, const VectorXd& x,
               const VectorXd& u, double h, const StabilitySettings& settings = {});

/// Largest stable integration step, by bisection between a stable and an unstable step.
double stability_boundary(const SecondOrderSystem& system, Scheme scheme, const VectorXd& x,
                          const VectorXd& u, const StabilitySettings& settings = {});

}  // namespace wbmpc
