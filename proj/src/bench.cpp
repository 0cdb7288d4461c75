#include "wbmpc/bench.hpp"

#include <chrono>
#include <ostream>

namespace wbmpc {

namespace {

template <typename Fn>
double time_ms(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

TaskConfig with_algorithm(const TaskConfig& task, Algorithm algorithm, int horizon) {
  TaskConfig t = task;
  t.solver.algorithm = algorithm;
  t.solver.horizon = horizon;
  t.mpc.horizon = horizon * t.solver.control_dt;
  return t;
}

}  // namespace

HorizonSweep horizon_sweep(const TaskConfig& task, const std::vector<int>& horizons,
                           int riccati_repeats, int iteration_repeats) {
  HorizonSweep out;
  std::vector<double> n;
  std::vector<double> riccati;
  std::vector<double> iteration;
  for (int N : horizons) {
    const TaskConfig t = with_algorithm(task, task.solver.algorithm, N);
    const NlocSolver solver = make_solver(t);
    const NlocIterate start = solver.cold_start(t.x0, 0.0);

    std::vector<StageLinearization> stages;
    solver.linearize_stages(start.X, start.U, start.t_start, 0, N, stages);
    const LqocProblemd problem =
        solver.assemble(start.X, stages, solver.final_quadratization(start.X.back()),
                        t.solver.algorithm == Algorithm::ilqr);

    std::vector<double> r_ms;
    solve_riccati(problem, t.solver.riccati);  // warm caches
    for (int k = 0; k < riccati_repeats; ++k)
      r_ms.push_back(time_ms([&] { solve_riccati(problem, t.solver.riccati); }));

    std::vector<double> i_ms;
    for (int k = 0; k < iteration_repeats; ++k) {
      i_ms.push_back(time_ms([&] {
        try {
          solver.iterate(start, t.x0);
        } catch (const LineSearchFailed&) {
        }
      }));
    }

    HorizonSweepRow row;
    row.horizon = N;
    row.riccati_ms = percentiles(r_ms).p50;
    row.iteration_ms = percentiles(i_ms).p50;
    out.rows.push_back(row);
    n.push_back(N);
    riccati.push_back(row.riccati_ms);
    iteration.push_back(row.iteration_ms);
  }
  if (n.size() >= 2) {
    out.riccati_fit = fit_line(n, riccati);
    out.iteration_fit = fit_line(n, iteration);
  }
  return out;
}

std::vector<AlgoCompareRow> algo_compare(const TaskConfig& task, int repeats,
                                         const std::vector<int>& workers) {
  std::vector<AlgoCompareRow> out;
  const int N = task.solver.horizon;

  {
    TaskConfig t = with_algorithm(task, Algorithm::ilqr, N);
    MpcController mpc(make_solver(t), t.mpc);
    mpc.initialize(t.x0, 0.0);
    std::vector<double> ms;
    for (int k = 0; k < repeats; ++k) {
      mpc.update_ilqr(t.x0, 0.0);
      ms.push_back(mpc.diagnostics().solve_ms);
    }
    out.push_back({"ilqr", "full_iteration", t.solver.workers, repeats, percentiles(ms)});
  }

  TaskConfig t = with_algorithm(task, Algorithm::gnms, N);
  MpcController mpc(make_solver(t), t.mpc);
  mpc.initialize(t.x0, 0.0);
  std::vector<int> counts = workers;
  if (counts.empty()) counts.push_back(t.solver.workers);
  for (std::size_t w = 0; w < counts.size(); ++w) {
    mpc.solver().set_workers(counts[w]);
    std::vector<double> feedback;
    std::vector<double> prepare;
    for (int k = 0; k < repeats; ++k) {
      mpc.preparation_phase_gnms(0.0);
      prepare.push_back(mpc.diagnostics().prepare_ms);
      mpc.feedback_phase_gnms(t.x0, 0.0);
      feedback.push_back(mpc.diagnostics().solve_ms);
    }
    if (w == 0) out.push_back({"gnms", "feedback", counts[w], repeats, percentiles(feedback)});
    out.push_back({"gnms", "preparation", counts[w], repeats, percentiles(prepare)});
  }
  return out;
}

void write_horizon_sweep_csv(const HorizonSweep& sweep, std::ostream& out) {
  out << "horizon,riccati_ms,iteration_ms\n";
  for (const auto& r : sweep.rows)
    out << r.horizon << ',' << r.riccati_ms << ',' << r.iteration_ms << '\n';
}

void write_horizon_fit_csv(const HorizonSweep& sweep, std::ostream& out) {
  out << "quantity,slope_ms_per_stage,intercept_ms,r_squared\n";
  out << "riccati," << sweep.riccati_fit.slope << ',' << sweep.riccati_fit.intercept << ','
      << sweep.riccati_fit.r_squared << '\n';
  out << "iteration," << sweep.iteration_fit.slope << ',' << sweep.iteration_fit.intercept << ','
      << sweep.iteration_fit.r_squared << '\n';
}

void write_algo_compare_csv(const std::vector<AlgoCompareRow>& rows, std::ostream& out) {
  out << "algorithm,phase,workers,repeats,median_ms,mean_ms,p90_ms,max_ms,rate_hz\n";
  for (const auto& r : rows) {
    out << r.algorithm << ',' << r.phase << ',' << r.workers << ',' << r.repeats << ','
        << r.ms.p50 << ',' << r.ms.mean << ',' << r.ms.p90 << ',' << r.ms.max << ','
        << (r.ms.p50 > 0 ? 1000.0 / r.ms.p50 : 0.0) << '\n';
  }
}

}  // namespace wbmpc
