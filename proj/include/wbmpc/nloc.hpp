#pragma once

#include "wbmpc/cost.hpp"
#include "wbmpc/dynamics.hpp"
#include "wbmpc/integrator.hpp"
#include "wbmpc/lqoc.hpp"
#include "wbmpc/parallel.hpp"
#include "wbmpc/policy.hpp"

#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace wbmpc {

enum class Algorithm { ilqr, gnms };

std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

struct NlocSettings {
  Algorithm algorithm = Algorithm::ilqr;
  int horizon = 125;  // stages
  double control_dt = 0.004;
  IntegratorSettings integrator;
  RiccatiSettings riccati;
  int max_line_search_steps = 10;
  double backtracking = 0.5;
  bool gnms_line_search = false;
  double defect_penalty = 100.0;  // merit weight on the l1 defect norm (GNMS line search)
  double cost_tolerance = 1e-6;
  double ff_tolerance = 1e-6;
  double defect_tolerance = 1e-6;
  int max_iterations = 50;
  int workers = 1;
  // Joint PD feedback of the cold-start policy around the running reference. Assumes the
  // actuated coordinates are the trailing nu entries of q and v. Zero disables it.
  double cold_start_kp = 0.0;
  double cold_start_kd = 0.0;
};

void validate(const NlocSettings& settings);

/// Working set of one solver iteration. For iLQR, X is the rollout of U from X[0];
/// for GNMS the nodes may carry defects.
struct NlocIterate {
  StateTrajectory X;
  ControlTrajectory U;
  AffinePolicy policy;
  double t_start = 0.0;
  double cost = std::numeric_limits<double>::infinity();
  double defect_norm = 0.0;
  double ff_norm = std::numeric_limits<double>::infinity();  // max |du_ff| of the last step
  double alpha = 0.0;
  int iteration = 0;
  bool converged = false;
};

struct ConvergenceMetrics {
  double cost_delta = 0.0;
  double ff_norm = 0.0;  // max |U_next - U_prev|
  double defect_norm = 0.0;
};

ConvergenceMetrics convergence_metrics(const NlocIterate& previous, const NlocIterate& next);

/// Dynamics and cost expansion of one shooting interval.
struct StageLinearization {
  StageSensitivity sensitivity;
  StageQuadratization cost;  // already scaled by the control period
};

struct LineSearchResult {
  double alpha = 0.0;
  Rollout rollout;
  double cost = 0.0;
};

struct SolveTraceEntry {
  int iteration;
  double cost;
  double ff_norm;
  double defect_norm;
  double alpha;
};

struct SolveResult {
  NlocIterate iterate;
  std::vector<SolveTraceEntry> trace;
  bool converged = false;
};

/// Gauss-Newton optimal control: iLQR (single shooting with line search) and GNMS
/// (multiple shooting, defects enter the LQ subproblem as affine terms).
class NlocSolver {
 public:
  NlocSolver(std::shared_ptr<const SecondOrderSystem> system, CostFunction cost,
             NlocSettings settings);

  const NlocSettings& settings() const { return settings_; }
  const CostFunction& cost() const { return cost_; }
  const SecondOrderSystem& system() const { return *system_; }
  std::shared_ptr<const SecondOrderSystem> system_ptr() const { return system_; }
  void set_system(std::shared_ptr<const SecondOrderSystem> system);
  void set_cost(CostFunction cost);
  void set_workers(int workers);

  /// Cold start: rollout of `controls` (empty means the running cost's control
  /// reference) plus the cold-start joint PD feedback. Both algorithms start from this
  /// dynamically consistent trajectory.
  NlocIterate cold_start(const VectorXd& x0, double t_start,
                         ControlTrajectory controls = {}) const;

  NlocIterate iterate(const NlocIterate& current, const VectorXd& x0) const;
  NlocIterate ilqr_iteration(const NlocIterate& current, const VectorXd& x0) const;
  NlocIterate gnms_iteration(const NlocIterate& current, const VectorXd& x0) const;

  /// Backtracking over u(alpha) = U + alpha du_ff + K (x - X). Accepts the first alpha
  /// whose rollout cost is below the nominal cost. Throws LineSearchFailed.
  LineSearchResult line_search(const Rollout& nominal, double nominal_cost,
                               const LqocSolutiond& candidate, const VectorXd& x0,
                               double t_start) const;

  /// Iterates until convergence or settings.max_iterations.
  SolveResult solve(const VectorXd& x0, double t_start, NlocIterate initial) const;
  SolveResult solve(const VectorXd& x0, double t_start) const;

  // Building blocks shared with the MPC feedback/preparation split.
  StageLinearization linearize_stage(const VectorXd& x, const VectorXd& u, double t) const;
  /// Linearizes stages [first, last) concurrently.
  void linearize_stages(const StateTrajectory& X, const ControlTrajectory& U, double t_start,
                        int first, int last, std::vector<StageLinearization>& out) const;
  StageQuadratization final_quadratization(const VectorXd& x_final) const;
  /// LQ subproblem with defects c_n = x_next(X_n, U_n) - X_{n+1}; zero defects when
  /// `single_shooting` is set.
  LqocProblemd assemble(const StateTrajectory& X, const std::vector<StageLinearization>& stages,
                        const StageQuadratization& final_cost, bool single_shooting) const;
  /// Full-step node update of a multiple-shooting iterate.
  NlocIterate gnms_update(const NlocIterate& current, const LqocSolutiond& sol) const;

  std::vector<VectorXd> defects(const StateTrajectory& X, const ControlTrajectory& U) const;
  double defect_norm(const StateTrajectory& X, const ControlTrajectory& U) const;
  double trajectory_cost(const StateTrajectory& X, const ControlTrajectory& U,
                         double t_start) const;
  bool is_converged(double cost_delta, double cost, double ff_norm, double defect_norm) const;

 private:
  std::shared_ptr<const SecondOrderSystem> system_;
  CostFunction cost_;
  NlocSettings settings_;
  std::shared_ptr<WorkerPool> pool_;
};

/// max_n |v_n|_inf over a trajectory.
double max_norm(const std::vector<VectorXd>& values);

}  // namespace wbmpc
