#pragma once

#include "wbmpc/config.hpp"
#include "wbmpc/summary.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace wbmpc {

struct HorizonSweepRow {
  int horizon = 0;
  double riccati_ms = 0.0;    // median
  double iteration_ms = 0.0;  // median of full solver iterations
};

struct HorizonSweep {
  std::vector<HorizonSweepRow> rows;
  LinearFit riccati_fit;
  LinearFit iteration_fit;
};

/// Times solve_riccati and full iterations of the task's problem for each horizon
/// (stages of the task's control period).
HorizonSweep horizon_sweep(const TaskConfig& task, const std::vector<int>& horizons,
                           int riccati_repeats = 20, int iteration_repeats = 3);

struct AlgoCompareRow {
  std::string algorithm;
  std::string phase;  // full_iteration, feedback, preparation
  int workers = 1;
  int repeats = 0;
  Percentiles ms;
};

/// iLQR full iterations against the GNMS feedback and preparation phases on the same
/// problem, warm started from a converged solution. GNMS preparation is timed for each
/// worker count.
std::vector<AlgoCompareRow> algo_compare(const TaskConfig& task, int repeats,
                                         const std::vector<int>& workers);

void write_horizon_sweep_csv(const HorizonSweep& sweep, std::ostream& out);
void write_horizon_fit_csv(const HorizonSweep& sweep, std::ostream& out);
void write_algo_compare_csv(const std::vector<AlgoCompareRow>& rows, std::ostream& out);

}  // namespace wbmpc
