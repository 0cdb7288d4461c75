#pragma once

#include "wbmpc/nloc.hpp"

#include <limits>
#include <optional>
#include <string>

namespace wbmpc {

/// Time-stamped affine policy handed to the tracking controller. Stage n covers
/// [start_time + n dt, start_time + (n + 1) dt).
struct MpcPolicy {
  double start_time = 0.0;
  double dt = 0.0;
  AffinePolicy policy;

  int size() const { return policy.size(); }
  double end_time() const { return start_time + size() * dt; }
  bool valid_at(double t) const;
  /// Stage index for time t, clamped to the available stages.
  int stage_at(double t) const;
  VectorXd operator()(double t, const VectorXd& x) const;
};

MpcPolicy make_policy(const NlocIterate& iterate, double dt);

enum class WarmStart { shift, no_shift, cold };

std::string to_string(WarmStart mode);
WarmStart warm_start_from_string(const std::string& name);

struct MpcSettings {
  double horizon = 0.5;  // s
  WarmStart warm_start = WarmStart::shift;
  int max_fallback_updates = 5;
  /// Iterations of the offline solve that produces the initial (stabilizing) policy.
  int initial_iterations = 50;
  /// GNMS preparation re-seeds the nodes from a closed-loop rollout of the retained
  /// policy when the largest defect (max norm) exceeds this. Infinity disables it.
  double reseed_defect = std::numeric_limits<double>::infinity();

  /// Defaults per algorithm: 4 ms stages for iLQR, 6 ms for GNMS. With 6 ms the 0.5 s
  /// horizon is not a whole number of stages, so GNMS uses 83 stages (0.498 s).
  static MpcSettings defaults(Algorithm algorithm);
  static double default_control_dt(Algorithm algorithm);
};

/// Number of stages; throws unless horizon / control_dt is integral.
int horizon_stages(double horizon, double control_dt);

struct MpcDiagnostics {
  double t_meas = 0.0;
  double solve_ms = 0.0;     // wall clock of the update (feedback phase for GNMS)
  double prepare_ms = 0.0;   // GNMS preparation phase, 0 for iLQR
  double cost = 0.0;
  double defect_norm = 0.0;
  double ff_norm = 0.0;
  double alpha = 0.0;
  double handoff_jump = 0.0;  // |u_new - u_old| at the measured state and time
  int shift = 0;
  bool fallback = false;  // previous policy retained
  bool reprepared = false;
  bool reseeded = false;      // GNMS nodes were replaced by a rollout before this update
  bool cold_restart = false;  // iLQR started from a cold start after a diverged update
  std::string failure;
};

/// Real-time iteration NMPC: one solver iteration per measurement, warm started from
/// the previous solution. GNMS splits each update into a feedback phase (first
/// interval only) and a preparation phase (everything else).
class MpcController {
 public:
  MpcController(NlocSolver solver, MpcSettings settings);

  /// Solves offline from x0 (up to settings.initial_iterations) to obtain the
  /// stabilizing initial policy. For GNMS the first preparation phase follows.
  void initialize(const VectorXd& x0, double t0);

  /// One update from a measurement, dispatched on the solver's algorithm. For GNMS this
  /// is the feedback phase; preparing if needed first.
  MpcPolicy update(const VectorXd& x_meas, double t_meas);

  MpcPolicy update_ilqr(const VectorXd& x_meas, double t_meas);
  MpcPolicy feedback_phase_gnms(const VectorXd& x_meas, double t_meas);
  /// Adopts the last update and prepares intervals 1..N for a measurement expected at
  /// t_next_meas.
  void preparation_phase_gnms(double t_next_meas);

  /// Previous solution re-indexed to the stage containing t_meas; newly exposed stages
  /// hold the last control and final state. The remainder of the elapsed time is
  /// absorbed by starting from x_meas.
  NlocIterate warm_start(const NlocIterate& previous, const VectorXd& x_meas,
                         double t_meas) const;

  bool prepared() const { return prepared_.has_value(); }
  const MpcPolicy& policy() const { return policy_; }
  const NlocIterate& iterate() const { return iterate_; }
  const MpcDiagnostics& diagnostics() const { return diagnostics_; }
  const MpcSettings& settings() const { return settings_; }
  NlocSolver& solver() { return solver_; }
  const NlocSolver& solver() const { return solver_; }

 private:
  struct Prepared {
    NlocIterate nodes;
    std::vector<StageLinearization> stages;  // stage 0 is filled by the feedback phase
    StageQuadratization final_cost;
    bool reseeded = false;
  };

  int shift_for(const NlocIterate& previous, double t) const;
  Prepared prepare(double t_meas) const;
  MpcPolicy fallback(const VectorXd& x_meas, double t_meas, const std::string& reason);
  void adopt(NlocIterate next, const VectorXd& x_meas, double t_meas);

  NlocSolver solver_;
  MpcSettings settings_;
  NlocIterate iterate_;
  MpcPolicy policy_;
  MpcDiagnostics diagnostics_;
  std::optional<Prepared> prepared_;
  bool initialized_ = false;
  int consecutive_failures_ = 0;
  bool restart_cold_ = false;  // iLQR: next update starts from a cold start
};

}  // namespace wbmpc
