#include "helpers.hpp"

#include <doctest.h>

using namespace wbmpc;
using namespace wbmpc::test;

namespace {

TaskConfig lq_task(Algorithm algorithm) {
  TaskConfig task = load_task(task_path("lq_point_mass"));
  task.solver.algorithm = algorithm;
  return task;
}

bool same(const StateTrajectory& a, const StateTrajectory& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t n = 0; n < a.size(); ++n)
    if (a[n] != b[n]) return false;
  return true;
}

}  // namespace

TEST_SUITE("nloc") {

TEST_CASE("one iteration solves the LQ problem") {
  for (Algorithm algorithm : {Algorithm::ilqr, Algorithm::gnms}) {
    CAPTURE(to_string(algorithm));
    const TaskConfig task = lq_task(algorithm);
    const LqOracle oracle = point_mass_oracle(task);
    const NlocSolver solver = make_solver(task);
    const NlocIterate first = solver.iterate(solver.cold_start(task.x0, 0.0), task.x0);
    CHECK(relative_deviation(first.X, oracle.X) < 1e-8);
    CHECK(relative_deviation(first.U, oracle.U) < 1e-8);
    CHECK(first.alpha == 1.0);
    // The next step is zero and confirms convergence.
    const NlocIterate second = solver.iterate(first, task.x0);
    CHECK(second.ff_norm < 1e-8);
    CHECK(second.converged);
  }
}

TEST_CASE("GNMS closes arbitrary defects on a linear system in one step") {
  const TaskConfig task = lq_task(Algorithm::gnms);
  const LqOracle oracle = point_mass_oracle(task);
  const NlocSolver solver = make_solver(task);
  NlocIterate nodes = solver.cold_start(task.x0, 0.0);
  std::mt19937 rng(61);
  for (std::size_t n = 1; n < nodes.X.size(); ++n) nodes.X[n] += random_vector(rng, 4, 0.3);
  CHECK(solver.defect_norm(nodes.X, nodes.U) > 0.1);
  const NlocIterate next = solver.gnms_iteration(nodes, task.x0);
  CHECK(next.defect_norm < 1e-10);
  CHECK(relative_deviation(next.X, oracle.X) < 1e-8);
}

TEST_CASE("iLQR cost never increases on the stand task") {
  TaskConfig task = load_task(task_path("stand"));
  task.x0(1) += 0.02;
  task.x0(2) += 0.05;
  const NlocSolver solver = make_solver(task);
  const NlocIterate start = solver.cold_start(task.x0, 0.0);
  const SolveResult r = solver.solve(task.x0, 0.0, start);
  CHECK(r.converged);
  double last = start.cost;
  for (const auto& e : r.trace) {
    CHECK(e.cost <= last);
    last = e.cost;
  }
  CHECK(r.trace.back().cost < start.cost);
}

TEST_CASE("GNMS converges to a dynamically consistent trajectory") {
  TaskConfig task = load_task(task_path("hopper_stand"));
  task.solver.algorithm = Algorithm::gnms;
  task.x0(1) += 0.02;
  const NlocSolver solver = make_solver(task);
  const SolveResult r = solver.solve(task.x0, 0.0);
  CHECK(r.converged);
  CHECK(r.iterate.defect_norm < task.solver.defect_tolerance);
  CHECK(solver.defect_norm(r.iterate.X, r.iterate.U) < 1e-5);
  CHECK(r.iterate.X[0] == task.x0);
}

TEST_CASE("GNMS iterates do not depend on the worker count") {
  TaskConfig task = load_task(task_path("stand"));
  task.solver.algorithm = Algorithm::gnms;
  task.x0(1) += 0.02;
  NlocSolver one = make_solver(task);
  NlocSolver four = make_solver(task);
  four.set_workers(4);
  NlocIterate a = one.cold_start(task.x0, 0.0);
  NlocIterate b = four.cold_start(task.x0, 0.0);
  for (int k = 0; k < 3; ++k) {
    a = one.iterate(a, task.x0);
    b = four.iterate(b, task.x0);
  }
  CHECK(same(a.X, b.X));
  CHECK(same(a.U, b.U));
  CHECK(a.cost == b.cost);
}

TEST_CASE("line search never accepts an increase") {
  TaskConfig task = load_task(task_path("stand"));
  task.x0(2) += 0.1;
  const NlocSolver solver = make_solver(task);
  const NlocIterate start = solver.cold_start(task.x0, 0.0);
  const Rollout nominal{start.X, start.U};
  std::vector<StageLinearization> lin;
  solver.linearize_stages(start.X, start.U, 0.0, 0, task.solver.horizon, lin);
  auto problem = solver.assemble(start.X, lin, solver.final_quadratization(start.X.back()), true);
  auto sol = solve_riccati(problem);
  // An ascent direction must be rejected outright.
  for (auto& k : sol.du_ff) k = -100.0 * k;
  CHECK_THROWS_AS(solver.line_search(nominal, start.cost, sol, task.x0, 0.0), LineSearchFailed);
}

TEST_CASE("convergence metrics") {
  NlocIterate a;
  NlocIterate b;
  a.U = {VectorXd::Zero(2), VectorXd::Ones(2)};
  b.U = {VectorXd::Constant(2, 0.5), VectorXd::Ones(2)};
  a.cost = 2.0;
  b.cost = 1.5;
  b.defect_norm = 0.1;
  const auto m = convergence_metrics(a, b);
  CHECK(m.cost_delta == doctest::Approx(-0.5));
  CHECK(m.ff_norm == doctest::Approx(0.5));
  CHECK(m.defect_norm == doctest::Approx(0.1));
}

TEST_CASE("settings validation") {
  NlocSettings s;
  CHECK_NOTHROW(validate(s));
  s.horizon = 0;
  CHECK_THROWS_AS(validate(s), Error);
  s = NlocSettings{};
  s.backtracking = 1.5;
  CHECK_THROWS_AS(validate(s), Error);
  CHECK(algorithm_from_string("gnms") == Algorithm::gnms);
  CHECK_THROWS_AS(algorithm_from_string("sqp"), Error);
}

}  // TEST_SUITE
