// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any
// criterion fails.

#include "helpers.hpp"

#include "wbmpc/bench.hpp"
#include "wbmpc/summary.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace wbmpc;
using namespace wbmpc::test;

namespace {

const std::vector<std::string> kShipped = {"stand",      "hopper_stand", "lq_point_mass",
                                           "trot",       "squat_jump",   "forward_jump",
                                           "disturbance_trot"};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double max_rel(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

std::string csv(const ClosedLoopLog& log) {
  std::ostringstream out;
  write_log_csv(log, out);
  return out.str();
}

void save(const fs::path& dir, const std::string& name, const ClosedLoopLog& log) {
  fs::create_directories(dir);
  std::ofstream(dir / (name + "_log.csv")) << csv(log);
  std::ofstream s(dir / (name + "_summary.yaml"));
  write_summary(summarize(log), s);
}

Outcome riccati_vs_dense() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> nx_d(1, 10), nu_d(1, 4), N_d(1, 50);
  RiccatiSettings exact;  // the oracle is unregularized
  exact.regularization = 0.0;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int nx = nx_d(rng);
    const auto p = random_lqoc(rng, nx, std::min(nu_d(rng), nx), N_d(rng));
    const auto sol = solve_riccati(p, exact);
    const auto dense = solve_dense_oracle(p);
    // The feedforward part is compared through the full increments it generates.
    worst = std::max({worst, relative_deviation(sol.du, dense.du),
                      relative_deviation(sol.dx, dense.dx)});
  }
  const double t = seconds_since(start);
  return {worst < 1e-8 && t < 10.0,
          fmt("50 instances, max relative deviation %.2e (< 1e-8), %.2f s (< 10 s)", worst, t)};
}

Outcome derivative_contract() {
  const auto start = std::chrono::steady_clock::now();
  const TaskConfig task = load_task(task_path("trot"));
  auto model = std::make_shared<RobotModel>(task.model);
  RobotDynamics dyn(model, task.contact);
  std::mt19937 rng(77);
  double worst = 0.0;
  int stance = 0;
  for (int k = 0; k < 100; ++k) {
    const bool flight = k % 2 == 1;
    const VectorXd x = random_quadruped_state(rng, *model, task.nominal_state, flight);
    if (dyn.normal_forces(x).maxCoeff() > 50.0) ++stance;
    const VectorXd u = task.nominal_controls + random_vector(rng, model->nu(), 5.0);
    const auto J = dynamics_jacobians(dyn, x, u);
    worst = std::max(worst, max_rel(J.dfdx, fd_jacobian([&](const VectorXd& y) { return dyn.flow(y, u); }, x)));
    worst = std::max(worst, max_rel(J.dfdu, fd_jacobian([&](const VectorXd& v) { return dyn.flow(x, v); }, u)));
    const auto& s = task.solver;
    const auto sens = stage_sensitivity(dyn, x, u, s.control_dt, s.integrator);
    worst = std::max(worst, max_rel(sens.A, fd_jacobian([&](const VectorXd& y) {
                                      return integrate_interval(dyn, y, u, s.control_dt, s.integrator);
                                    }, x)));
    worst = std::max(worst, max_rel(sens.B, fd_jacobian([&](const VectorXd& v) {
                                      return integrate_interval(dyn, x, v, s.control_dt, s.integrator);
                                    }, u)));
  }
  const double t = seconds_since(start);
  return {worst < 1e-4 && t < 30.0 && stance >= 40,
          fmt("100 states (%d in stance, 50 in flight), max relative error %.2e (< 1e-4), "
              "%.1f s (< 30 s)", stance, worst, t)};
}

Outcome lq_exactness() {
  std::string detail;
  bool pass = true;
  for (Algorithm a : {Algorithm::ilqr, Algorithm::gnms}) {
    TaskConfig task = load_task(task_path("lq_point_mass"));
    task.solver.algorithm = a;
    const LqOracle oracle = point_mass_oracle(task);
    const NlocSolver solver = make_solver(task);
    const NlocIterate first = solver.iterate(solver.cold_start(task.x0, 0.0), task.x0);
    const double dev =
        std::max(relative_deviation(first.X, oracle.X), relative_deviation(first.U, oracle.U));
    const NlocIterate second = solver.iterate(first, task.x0);
    const bool ok = dev < 1e-8 && second.ff_norm < 1e-8 && second.converged;
    pass = pass && ok;
    detail += fmt("%s: deviation after 1 iteration %.1e, next step %.1e; ", to_string(a).c_str(),
                  dev, second.ff_norm);
  }
  return {pass, detail + "tolerance 1e-8"};
}

Outcome linear_horizon() {
  const TaskConfig task = load_task(task_path("trot"));
  const HorizonSweep sweep = horizon_sweep(task, {50, 100, 200, 400, 800}, 40, 3);
  std::string rows;
  for (const auto& r : sweep.rows) rows += fmt(" N=%d:%.2fms", r.horizon, r.riccati_ms);
  return {sweep.riccati_fit.r_squared >= 0.99,
          fmt("Riccati R^2 %.4f (>= 0.99), %.4f ms/stage;%s; full iteration R^2 %.4f",
              sweep.riccati_fit.r_squared, sweep.riccati_fit.slope, rows.c_str(),
              sweep.iteration_fit.r_squared)};
}

Outcome symplectic_advantage() {
  // Stiff contact, dropped from the raised start so the contact is actually excited.
  TaskConfig task = load_task(task_path("hopper_stand"));
  task.contact.alpha_k = 500.0;
  const auto system = make_system(task);
  const double h_sym =
      stability_boundary(*system, Scheme::symplectic_euler, task.x0, task.nominal_controls);
  const double h_exp =
      stability_boundary(*system, Scheme::explicit_euler, task.x0, task.nominal_controls);
  const double ratio = h_sym / h_exp;
  return {ratio >= 2.0, fmt("h* semi-implicit %.5f s, explicit %.5f s, ratio %.2f (>= 2; reference "
                            "factor 4)", h_sym, h_exp, ratio)};
}

Outcome algorithm_agreement(const fs::path& out) {
  double cost[2];
  int iterations[2];
  bool converged = true;
  for (int k = 0; k < 2; ++k) {
    TaskConfig task = load_task(task_path("trot"));
    task.solver.algorithm = k == 0 ? Algorithm::ilqr : Algorithm::gnms;
    const NlocSolver solver = make_solver(task);
    const SolveResult r = solver.solve(task.x0, 0.0);
    converged = converged && r.converged;
    cost[k] = r.iterate.cost;
    iterations[k] = static_cast<int>(r.trace.size());
    fs::create_directories(out);
    std::ofstream trace(out / (std::string("trot_solve_") + to_string(task.solver.algorithm) + ".csv"));
    trace << "iteration,cost,ff_norm,defect_norm,alpha\n";
    for (const auto& e : r.trace)
      trace << e.iteration << ',' << e.cost << ',' << e.ff_norm << ',' << e.defect_norm << ','
            << e.alpha << '\n';
  }
  const double diff = std::abs(cost[0] - cost[1]) / std::min(cost[0], cost[1]);
  return {converged && diff < 0.05,
          fmt("iLQR %.4f (%d it), GNMS %.4f (%d it), difference %.2f%% (< 5%%)%s", cost[0],
              iterations[0], cost[1], iterations[1], 100 * diff, converged ? "" : ", NOT converged")};
}

Outcome gnms_latency() {
  const TaskConfig task = load_task(task_path("trot"));
  const auto rows = algo_compare(task, 50, {1});
  double ilqr = 0.0, feedback = 0.0, prepare = 0.0;
  for (const auto& r : rows) {
    if (r.algorithm == "ilqr") ilqr = r.ms.p50;
    if (r.phase == "feedback") feedback = r.ms.p50;
    if (r.phase == "preparation") prepare = r.ms.p50;
  }
  return {feedback < ilqr,
          fmt("median GNMS feedback %.3f ms (%.0f Hz) vs iLQR iteration %.3f ms (%.0f Hz); "
              "GNMS preparation %.3f ms", feedback, 1000 / feedback, ilqr, 1000 / ilqr, prepare)};
}

Outcome update_rate(const fs::path& out) {
  TaskConfig task = load_task(task_path("trot"));
  task.sim.lockstep = false;
  const ClosedLoopLog log = run_closed_loop(closed_loop_setup(task));
  save(out, "trot_realtime", log);
  const RunSummary s = summarize(log);
  return {s.success && s.update_rate_hz >= 30.0,
          fmt("trot, measured solve times: %.1f Hz (>= 30), solve p50 %.2f ms p99 %.2f ms, %s, "
              "%u hardware threads", s.update_rate_hz, s.solve_ms.p50, s.solve_ms.p99,
              s.success ? "no fall" : s.failure.c_str(), std::thread::hardware_concurrency())};
}

Outcome squat_jump(const fs::path& out) {
  const TaskConfig task = load_task(task_path("squat_jump"));
  const ClosedLoopLog log = run_closed_loop(closed_loop_setup(task));
  save(out, "squat_jump", log);
  if (!log.success) return {false, "run failed: " + log.failure};

  // Lift-off: every foot's normal force crosses zero downwards. Landing: the next upward
  // crossing of any foot.
  double liftoff = -1.0, landing = -1.0;
  std::size_t i_lift = 0;
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    const double prev = log.rows[i - 1].normal_forces.maxCoeff();
    const double now = log.rows[i].normal_forces.maxCoeff();
    if (liftoff < 0 && prev > 0.0 && now <= 0.0) {
      liftoff = log.rows[i].time;
      i_lift = i;
    } else if (liftoff >= 0 && prev <= 0.0 && now > 0.0) {
      landing = log.rows[i].time;
      break;
    }
  }
  if (liftoff < 0 || landing < 0) return {false, "no lift-off/landing found in the contact forces"};

  const double z0 = log.rows.front().state(1);
  double z_min = z0, t_min = 0.0, z_max = 0.0;
  for (std::size_t i = 0; i < i_lift; ++i)
    if (log.rows[i].state(1) < z_min) {
      z_min = log.rows[i].state(1);
      t_min = log.rows[i].time;
    }
  for (const auto& r : log.rows) z_max = std::max(z_max, r.state(1));
  double applied = 0.0, commanded = 0.0;
  int saturated = 0;
  for (const auto& r : log.rows) {
    applied = std::max(applied, r.torque.cwiseAbs().maxCoeff());
    commanded = std::max(commanded, (r.ff + r.fb + r.pd).cwiseAbs().maxCoeff());
    saturated += r.saturated;
  }
  const double limit = 40.0;
  const bool dip = z0 - z_min > 0.005;
  const bool torque = task.tracking.torque_limit == limit && applied <= limit + 1e-9 &&
                      commanded <= limit + 1e-9;
  return {dip && torque && landing > liftoff,
          fmt("(a) base dips %.1f mm, lowest at %.3f s before lift-off; (b) lift-off %.4f s, "
              "landing %.4f s (flight %.0f ms, apex z %.3f m) from normal-force zero crossings; "
              "(c) max torque %.1f N m, commanded %.1f N m (limit 40), %d saturated ticks",
              1000 * (z0 - z_min), t_min, liftoff, landing, 1000 * (landing - liftoff), z_max,
              applied, commanded, saturated)};
}

Outcome disturbance_recovery(const fs::path& out) {
  const TaskConfig task = load_task(task_path("disturbance_trot"));
  const ClosedLoopLog log = run_closed_loop(closed_loop_setup(task));
  save(out, "disturbance_trot", log);
  if (!log.success) return {false, "robot fell or the solver failed: " + log.failure};
  if (task.disturbances.empty()) return {false, "task has no disturbance"};
  const auto& step = task.disturbances.front();
  const double end = step.start + step.duration;
  bool pass = true;
  std::string detail = fmt("%.0f mm step under foot %d for %.1f s, no fall; periods pre/post:",
                           1000 * step.magnitude, step.foot, step.duration);
  for (const char* column : {"fn_0", "fn_1", "z", "pitch"}) {
    const double pre = extract_limit_cycle_period(log, column, 0.4, step.start);
    const double post = extract_limit_cycle_period(log, column, end + 0.8, task.sim.duration);
    const double diff = std::abs(post - pre) / pre;
    pass = pass && diff < 0.05;
    detail += fmt(" %s %.3f/%.3f s", column, pre, post);
  }
  return {pass, detail + " (within 5%)"};
}

Outcome monotone_descent() {
  bool pass = true;
  int solves = 0, steps = 0;
  std::string detail;
  for (const auto& name : kShipped) {
    TaskConfig task = load_task(task_path(name));
    task.solver.algorithm = Algorithm::ilqr;
    const NlocSolver solver = make_solver(task);
    // Also start where each temporal window is inside the horizon.
    std::vector<double> starts = {0.0};
    for (const auto& term : task.cost.temporal)
      if (term.t_start >= task.mpc.horizon) starts.push_back(term.t_start - 0.5 * task.mpc.horizon);
    for (double t0 : starts) {
      const NlocIterate init = solver.cold_start(task.x0, t0);
      const SolveResult r = solver.solve(task.x0, t0, init);
      double last = init.cost;
      for (const auto& e : r.trace) {
        if (e.cost > last) {
          pass = false;
          detail += fmt("%s@%.2f: increase at iteration %d; ", name.c_str(), t0, e.iteration);
        }
        last = e.cost;
        ++steps;
      }
      ++solves;
    }
  }
  return {pass, fmt("%d solves over %zu tasks, %d accepted steps, no cost increase%s", solves,
                    kShipped.size(), steps, detail.empty() ? "" : (": " + detail).c_str())};
}

Outcome determinism() {
  bool pass = true;
  std::string detail;
  int runs = 0;
  for (const auto& name : kShipped) {
    TaskConfig task = load_task(task_path(name));
    if (!task.is_robot()) {
      const NlocSolver solver = make_solver(task);
      const auto a = solver.solve(task.x0, 0.0);
      const auto b = solver.solve(task.x0, 0.0);
      const bool same = a.iterate.X == b.iterate.X && a.iterate.U == b.iterate.U;
      pass = pass && same;
      if (!same) detail += name + " solve differs; ";
      continue;
    }
    task.sim.duration = std::min(task.sim.duration, 1.2);
    task.sim.lockstep = true;
    const ClosedLoopSetup setup = closed_loop_setup(task);
    const bool same = csv(run_closed_loop(setup)) == csv(run_closed_loop(setup));
    ++runs;
    pass = pass && same;
    if (!same) detail += name + " replay differs; ";
  }
  TaskConfig trot = load_task(task_path("trot"));
  trot.solver.algorithm = Algorithm::gnms;
  trot.sim.duration = 1.2;
  std::string logs[2];
  for (int k = 0; k < 2; ++k) {
    trot.solver.workers = k == 0 ? 1 : 4;
    logs[k] = csv(run_closed_loop(closed_loop_setup(trot)));
  }
  const bool workers = logs[0] == logs[1];
  pass = pass && workers;
  return {pass, fmt("%d lockstep replays byte-identical, open-loop LQ solve repeatable; GNMS "
                    "trot log with 1 vs 4 workers %s%s", runs,
                    workers ? "identical" : "DIFFERS", detail.empty() ? "" : ("; " + detail).c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string out_dir = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out_dir, "Directory for logs of the closed-loop runs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  const fs::path out(out_dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"Riccati vs dense KKT oracle", riccati_vs_dense},
      {"derivatives vs finite differences", derivative_contract},
      {"LQ exactness", lq_exactness},
      {"linear horizon complexity", linear_horizon},
      {"semi-implicit stability advantage", symplectic_advantage},
      {"iLQR/GNMS cost agreement", [&] { return algorithm_agreement(out); }},
      {"GNMS feedback latency", gnms_latency},
      {"update-rate floor", [&] { return update_rate(out); }},
      {"squat jump through contact", [&] { return squat_jump(out); }},
      {"disturbance recovery", [&] { return disturbance_recovery(out); }},
      {"monotone iLQR descent", monotone_descent},
      {"determinism", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id,
                criteria[i].first.c_str(), o.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
