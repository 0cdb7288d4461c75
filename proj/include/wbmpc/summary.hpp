#pragma once

#include "wbmpc/sim.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace wbmpc {

struct Percentiles {
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

/// Mean and nearest-rank percentiles; zeros for an empty sample.
Percentiles percentiles(std::vector<double> samples);

/// Statistics of a closed-loop run, computed from the log alone.
struct RunSummary {
  bool success = true;
  std::string failure;
  double duration = 0.0;  // simulated seconds covered by the log
  int updates = 0;
  int fallbacks = 0;
  // Deviation of the plant from the active MPC plan.
  double mean_base_error = 0.0;  // |(x, z) - ref|, m
  double max_base_error = 0.0;
  double mean_pitch_error = 0.0;  // rad
  double max_pitch_error = 0.0;
  double mean_joint_error = 0.0;  // max over joints, rad
  double max_joint_error = 0.0;
  double final_base_error = 0.0;  // mean over the last 10 % of the run
  Percentiles solve_ms;  // time charged per update
  Percentiles wall_ms;   // measured wall clock per update
  double update_rate_hz = 0.0;  // updates per simulated second
  double max_abs_torque = 0.0;
  double max_abs_commanded = 0.0;  // before saturation
  int saturation_count = 0;
  std::vector<double> cost_trace;  // per update
};

RunSummary summarize(const ClosedLoopLog& log);

void write_summary(const RunSummary& summary, std::ostream& out);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least-squares line through (x, y). Throws DimensionMismatch for fewer than two points.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace wbmpc
