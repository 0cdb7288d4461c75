// Command-line harness: closed-loop runs, open-loop solves and solver benchmarks.

#include "wbmpc/bench.hpp"
#include "wbmpc/config.hpp"
#include "wbmpc/summary.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace wbmpc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitTaskFailed = 1;
constexpr int kExitConfig = 2;

struct CommonFlags {
  std::string task;
  Overrides overrides;
  std::string solver;
  double horizon = 0.0;
  double control_dt = 0.0;
  double duration = 0.0;
  int threads = 0;
  std::uint64_t seed = 0;
  bool lockstep = false;
  bool realtime = false;
  std::string out;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--task", f.task, "Task file")->required()->check(CLI::ExistingFile);
  app->add_option("--solver", f.solver, "Override the solver")->check(CLI::IsMember({"ilqr", "gnms"}));
  app->add_option("--horizon", f.horizon, "Override the MPC horizon, s");
  app->add_option("--control-dt", f.control_dt, "Override the control period, s");
  app->add_option("--duration", f.duration, "Override the simulated duration, s");
  app->add_option("--threads", f.threads, "Worker threads for the solver");
  app->add_option("--seed", f.seed, "Noise seed");
  app->add_flag("--lockstep", f.lockstep, "Charge a fixed simulated solve time per update");
  app->add_flag("--realtime", f.realtime, "Charge the measured solve time per update");
  app->add_option("--out", f.out, "Output directory");
}

TaskConfig load(const CommonFlags& f, const CLI::App* app) {
  TaskConfig task = load_task(f.task);
  Overrides o;
  if (app->count("--solver")) o.solver = f.solver;
  if (app->count("--horizon")) o.horizon = f.horizon;
  if (app->count("--control-dt")) o.control_dt = f.control_dt;
  if (app->count("--duration")) o.duration = f.duration;
  if (app->count("--threads")) o.threads = f.threads;
  if (app->count("--seed")) o.seed = f.seed;
  if (f.lockstep && f.realtime) throw ConfigError("sim.lockstep", "--lockstep and --realtime conflict");
  if (f.lockstep) o.lockstep = true;
  if (f.realtime) o.lockstep = false;
  if (app->count("--out")) o.output_dir = f.out;
  apply_overrides(task, o);
  return task;
}

std::ofstream open(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

fs::path prepare_output(const TaskConfig& task) {
  const fs::path dir(task.output_dir);
  fs::create_directories(dir);
  open(dir / "effective.task") << serialize_task(task);
  return dir;
}

int run(const TaskConfig& task) {
  const fs::path dir = prepare_output(task);
  const ClosedLoopLog log = run_closed_loop(closed_loop_setup(task));
  {
    auto out = open(dir / "log.csv");
    write_log_csv(log, out);
  }
  {
    auto out = open(dir / "updates.csv");
    write_updates_csv(log, out);
  }
  const RunSummary summary = summarize(log);
  {
    auto out = open(dir / "summary.yaml");
    write_summary(summary, out);
  }
  std::printf("%s: %s, %d updates (%.1f Hz), solve p50 %.2f ms, wall p50 %.2f ms\n",
              task.name.c_str(), summary.success ? "success" : "FAILED", summary.updates,
              summary.update_rate_hz, summary.solve_ms.p50, summary.wall_ms.p50);
  if (!summary.success) {
    std::fprintf(stderr, "task failed: %s\n", summary.failure.c_str());
    return kExitTaskFailed;
  }
  return kExitOk;
}

int solve(const TaskConfig& task) {
  const fs::path dir = prepare_output(task);
  const NlocSolver solver = make_solver(task);
  const SolveResult result = solver.solve(task.x0, 0.0);
  const auto names = task.state_names();
  {
    auto out = open(dir / "trajectory.csv");
    out << "time_s";
    for (const auto& n : names) out << ',' << n;
    for (int i = 0; i < solver.system().nu(); ++i) out << ",u_" << i;
    out << '\n';
    const auto& it = result.iterate;
    char buf[32];
    for (std::size_t n = 0; n < it.X.size(); ++n) {
      std::snprintf(buf, sizeof buf, "%.10g", it.t_start + n * task.solver.control_dt);
      out << buf;
      for (Eigen::Index i = 0; i < it.X[n].size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g", it.X[n](i));
        out << ',' << buf;
      }
      // The final node has no control; the last one is repeated.
      const VectorXd& u = it.U[std::min(n, it.U.size() - 1)];
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g", u(i));
        out << ',' << buf;
      }
      out << '\n';
    }
  }
  {
    auto out = open(dir / "iterations.csv");
    out << "iteration,cost,ff_norm,defect_norm,alpha\n";
    for (const auto& e : result.trace)
      out << e.iteration << ',' << e.cost << ',' << e.ff_norm << ',' << e.defect_norm << ','
          << e.alpha << '\n';
  }
  std::printf("%s: %s after %zu iterations, cost %.6g\n", task.name.c_str(),
              result.converged ? "converged" : "NOT converged", result.trace.size(),
              result.iterate.cost);
  if (!result.converged) {
    std::fprintf(stderr, "solver did not converge within %d iterations\n",
                 task.solver.max_iterations);
    return kExitTaskFailed;
  }
  return kExitOk;
}

std::vector<int> parse_ints(const std::string& list) {
  std::vector<int> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("bench", "expected a comma-separated list of integers, got '" + list + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-body nonlinear MPC for planar legged robots"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Closed-loop simulation of a task");
  add_common(run_cmd, run_flags);

  CommonFlags solve_flags;
  auto* solve_cmd = app.add_subcommand("solve", "Open-loop solve to convergence");
  add_common(solve_cmd, solve_flags);

  CommonFlags bench_flags;
  std::string mode;
  int repeats = 50;
  std::string horizons = "50,100,200,400,800";
  std::string workers = "1,4";
  auto* bench_cmd = app.add_subcommand("bench", "Solver timing benchmarks");
  bench_cmd->add_option("mode", mode, "horizon_sweep or algo_compare")
      ->required()
      ->check(CLI::IsMember({"horizon_sweep", "algo_compare"}));
  add_common(bench_cmd, bench_flags);
  bench_cmd->add_option("--repeats", repeats, "Repetitions per measurement")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--horizons", horizons, "Stage counts for horizon_sweep");
  bench_cmd->add_option("--workers", workers, "Worker counts for the GNMS preparation phase");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) return run(load(run_flags, run_cmd));
    if (*solve_cmd) return solve(load(solve_flags, solve_cmd));
    const TaskConfig task = load(bench_flags, bench_cmd);
    const fs::path dir = prepare_output(task);
    if (mode == "horizon_sweep") {
      const HorizonSweep sweep = horizon_sweep(task, parse_ints(horizons), repeats);
      auto out = open(dir / "horizon_sweep.csv");
      write_horizon_sweep_csv(sweep, out);
      auto fit = open(dir / "horizon_sweep_fit.csv");
      write_horizon_fit_csv(sweep, fit);
      write_horizon_sweep_csv(sweep, std::cout);
      write_horizon_fit_csv(sweep, std::cout);
    } else {
      const auto rows = algo_compare(task, repeats, parse_ints(workers));
      auto out = open(dir / "algo_compare.csv");
      write_algo_compare_csv(rows, out);
      write_algo_compare_csv(rows, std::cout);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitTaskFailed;
  }
}
