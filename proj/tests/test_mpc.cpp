#include "helpers.hpp"

#include <doctest.h>

using namespace wbmpc;
using namespace wbmpc::test;

namespace {

MpcController controller(Algorithm algorithm, const std::string& task_name = "stand") {
  TaskConfig task = load_task(task_path(task_name));
  task.solver.algorithm = algorithm;
  return MpcController(make_solver(task), task.mpc);
}

}  // namespace

TEST_SUITE("mpc") {

TEST_CASE("horizon stage count") {
  CHECK(horizon_stages(0.5, 0.004) == 125);
  CHECK(horizon_stages(0.498, 0.006) == 83);
  CHECK_THROWS_AS(horizon_stages(0.5, 0.006), Error);
  CHECK_THROWS_AS(horizon_stages(-1.0, 0.004), Error);
}

TEST_CASE("policy lookup") {
  MpcPolicy p;
  p.start_time = 1.0;
  p.dt = 0.01;
  p.policy.u_ff = {VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 2.0)};
  CHECK(p.stage_at(1.0) == 0);
  CHECK(p.stage_at(1.0099) == 0);
  CHECK(p.stage_at(1.01) == 1);
  CHECK(p.stage_at(5.0) == 1);
  CHECK(p.valid_at(1.015));
  CHECK(!p.valid_at(1.02));
  CHECK(!p.valid_at(0.99));
  CHECK(p(1.012, VectorXd::Zero(2))(0) == 2.0);
}

TEST_CASE("warm start shifts by the elapsed stages") {
  MpcController mpc = controller(Algorithm::ilqr, "lq_point_mass");
  const TaskConfig task = load_task(task_path("lq_point_mass"));
  mpc.initialize(task.x0, 0.0);
  const NlocIterate& prev = mpc.iterate();
  const int N = static_cast<int>(prev.U.size());
  const VectorXd x_meas = VectorXd::Constant(4, 0.1);
  const NlocIterate next = mpc.warm_start(prev, x_meas, 0.025);  // 2.5 stages of 10 ms
  CHECK(next.t_start == doctest::Approx(0.02));
  CHECK(next.X[0] == prev.X[2]);
  CHECK(next.U[0] == prev.U[2]);
  CHECK(next.U[N - 1] == prev.U[N - 1]);
  CHECK(next.X[N] == prev.X[N]);
  CHECK(next.X.size() == prev.X.size());
}

TEST_CASE("iLQR updates track the LQ optimum from the measured state") {
  MpcController mpc = controller(Algorithm::ilqr, "lq_point_mass");
  TaskConfig task = load_task(task_path("lq_point_mass"));
  mpc.initialize(task.x0, 0.0);
  // With the stage grid unchanged the receding problem is the original one from x_meas.
  const VectorXd x_meas = (VectorXd(4) << 0.5, 0.2, -0.1, 0.3).finished();
  mpc.update(x_meas, 0.0);
  mpc.update(x_meas, 0.0);
  task.x0 = x_meas;
  const LqOracle oracle = point_mass_oracle(task);
  CHECK(relative_deviation(mpc.iterate().U, oracle.U) < 1e-8);
  CHECK(mpc.policy()(0.0, x_meas).isApprox(oracle.U[0], 1e-8));
}

TEST_CASE("GNMS feedback phase needs a preparation phase") {
  MpcController mpc = controller(Algorithm::gnms);
  const TaskConfig task = load_task(task_path("stand"));
  mpc.initialize(task.x0, 0.0);
  CHECK(mpc.prepared());
  mpc.feedback_phase_gnms(task.x0, 0.0);
  CHECK(!mpc.prepared());
  CHECK_THROWS_AS(mpc.feedback_phase_gnms(task.x0, 0.004), NotPrepared);
  mpc.preparation_phase_gnms(0.004);
  CHECK(mpc.prepared());
  CHECK_NOTHROW(mpc.feedback_phase_gnms(task.x0, 0.004));
  // update() prepares on demand.
  CHECK_NOTHROW(mpc.update(task.x0, 0.008));
  CHECK(mpc.diagnostics().reprepared);
}

TEST_CASE("uninitialized controller") {
  MpcController mpc = controller(Algorithm::ilqr);
  CHECK_THROWS_AS(mpc.update(VectorXd::Zero(14), 0.0), Error);
}

TEST_CASE("failed updates keep the previous policy until the fallback budget runs out") {
  MpcController mpc = controller(Algorithm::ilqr);
  const TaskConfig task = load_task(task_path("stand"));
  mpc.initialize(task.x0, 0.0);
  const MpcPolicy before = mpc.policy();
  VectorXd bad = task.x0;
  bad(1) = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < mpc.settings().max_fallback_updates; ++k) {
    const MpcPolicy p = mpc.update(bad, 0.004 * (k + 1));
    CHECK(mpc.diagnostics().fallback);
    CHECK(p.start_time == before.start_time);
  }
  CHECK_THROWS_AS(mpc.update(bad, 1.0), SolverDiverged);
}

TEST_CASE("a good update resets the fallback budget") {
  MpcController mpc = controller(Algorithm::ilqr);
  const TaskConfig task = load_task(task_path("stand"));
  mpc.initialize(task.x0, 0.0);
  VectorXd bad = task.x0;
  bad(0) = std::numeric_limits<double>::infinity();
  for (int k = 0; k < mpc.settings().max_fallback_updates; ++k) mpc.update(bad, 0.004 * k);
  mpc.update(task.x0, 0.02);
  CHECK(!mpc.diagnostics().fallback);
  CHECK(mpc.diagnostics().cold_restart);
  CHECK_NOTHROW(mpc.update(bad, 0.024));
}

TEST_CASE("controller rejects a horizon that disagrees with the solver") {
  TaskConfig task = load_task(task_path("stand"));
  MpcSettings s = task.mpc;
  s.horizon = 0.4;
  CHECK_THROWS_AS(MpcController(make_solver(task), s), DimensionMismatch);
}

}  // TEST_SUITE
