#include "helpers.hpp"

#include <doctest.h>

using namespace wbmpc;
using namespace wbmpc::test;

namespace {

LinearSecondOrderSystem oscillator(double omega) {
  return LinearSecondOrderSystem(MatrixXd::Constant(1, 1, -omega * omega), MatrixXd::Zero(1, 1),
                                 MatrixXd::Ones(1, 1), VectorXd::Zero(1));
}

double oscillator_error(Scheme scheme, double h) {
  const auto sys = oscillator(2.0);
  VectorXd x(2);
  x << 1.0, 0.0;
  const VectorXd u = VectorXd::Zero(1);
  const int steps = static_cast<int>(std::round(1.0 / h));
  for (int i = 0; i < steps; ++i) x = step(sys, x, u, h, scheme);
  return std::abs(x(0) - std::cos(2.0));
}

struct Quadruped {
  std::shared_ptr<RobotModel> model = std::make_shared<RobotModel>(make_planar_quadruped());
  RobotDynamics dyn{model, ContactParams{}};
  StaticStance stance = static_equilibrium(*model, ContactParams{}, GroundPlane{},
                                           (VectorXd(4) << 0.5, -1.0, 0.5, -1.0).finished());
};

}  // namespace

TEST_SUITE("integrator") {

TEST_CASE("substep count") {
  IntegratorSettings s;
  s.h_int = 0.001;
  CHECK(s.substeps(0.004) == 4);
  CHECK(s.substeps(0.001) == 1);
  CHECK_THROWS_AS(s.substeps(0.0025), Error);
  s.h_int = 0.0;
  CHECK_THROWS_AS(s.substeps(0.004), Error);
  CHECK(scheme_from_string(to_string(Scheme::rk4)) == Scheme::rk4);
  CHECK_THROWS_AS(scheme_from_string("leapfrog"), Error);
}

TEST_CASE("semi-implicit Euler updates the velocity first") {
  const auto sys = LinearSecondOrderSystem::point_mass(2, 2.0);
  VectorXd x(4);
  x << 1.0, 2.0, 0.5, -0.5;
  const VectorXd u = (VectorXd(2) << 4.0, -2.0).finished();
  const double h = 0.1;
  const VectorXd y = step_symplectic(sys, x, u, h);
  const Vector2d v_next = x.tail<2>() + h * u / 2.0;
  CHECK(y.tail<2>().isApprox(v_next));
  CHECK(y.head<2>().isApprox(x.head<2>() + h * v_next));
}

TEST_CASE("convergence orders on a harmonic oscillator") {
  const double e1 = oscillator_error(Scheme::explicit_euler, 1e-3);
  const double e2 = oscillator_error(Scheme::explicit_euler, 5e-4);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
  const double s1 = oscillator_error(Scheme::symplectic_euler, 1e-3);
  const double s2 = oscillator_error(Scheme::symplectic_euler, 5e-4);
  CHECK(s1 / s2 == doctest::Approx(2.0).epsilon(0.1));
  const double r1 = oscillator_error(Scheme::rk4, 2e-2);
  const double r2 = oscillator_error(Scheme::rk4, 1e-2);
  CHECK(r1 / r2 == doctest::Approx(16.0).epsilon(0.1));
}

TEST_CASE("semi-implicit Euler keeps oscillator energy bounded, explicit Euler does not") {
  const auto sys = oscillator(10.0);
  const VectorXd u = VectorXd::Zero(1);
  VectorXd a(2), b(2);
  a << 1.0, 0.0;
  b = a;
  auto energy = [](const VectorXd& x) { return 0.5 * x(1) * x(1) + 50.0 * x(0) * x(0); };
  const double E0 = energy(a);
  for (int i = 0; i < 10000; ++i) {
    a = step(sys, a, u, 0.01, Scheme::symplectic_euler);
    b = step(sys, b, u, 0.01, Scheme::explicit_euler);
  }
  CHECK(energy(a) < 1.2 * E0);
  CHECK(energy(a) > 0.8 * E0);
  CHECK(energy(b) > 100.0 * E0);
}

TEST_CASE("continuous Jacobians match finite differences") {
  Quadruped r;
  std::mt19937 rng(41);
  for (int k = 0; k < 6; ++k) {
    const VectorXd x = random_quadruped_state(rng, *r.model, r.stance.state, k % 2 == 1);
    const VectorXd u = r.stance.torques + random_vector(rng, 4, 5.0);
    const auto J = dynamics_jacobians(r.dyn, x, u);
    const MatrixXd Ax = fd_jacobian([&](const VectorXd& xx) { return r.dyn.flow(xx, u); }, x);
    const MatrixXd Bu = fd_jacobian([&](const VectorXd& uu) { return r.dyn.flow(x, uu); }, u);
    CHECK((J.dfdx - Ax).cwiseAbs().maxCoeff() < 1e-4 * std::max(1.0, Ax.cwiseAbs().maxCoeff()));
    CHECK((J.dfdu - Bu).cwiseAbs().maxCoeff() < 1e-4 * std::max(1.0, Bu.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("stage sensitivities match finite differences of the interval map") {
  Quadruped r;
  std::mt19937 rng(42);
  for (Scheme scheme : {Scheme::symplectic_euler, Scheme::explicit_euler, Scheme::rk4}) {
    IntegratorSettings settings;
    settings.scheme = scheme;
    settings.h_int = 0.001;
    for (int k = 0; k < 4; ++k) {
      const VectorXd x = random_quadruped_state(rng, *r.model, r.stance.state, k % 2 == 1);
      const VectorXd u = r.stance.torques + random_vector(rng, 4, 5.0);
      const auto s = stage_sensitivity(r.dyn, x, u, 0.004, settings);
      auto f = [&](const VectorXd& xx) { return integrate_interval(r.dyn, xx, u, 0.004, settings); };
      auto g = [&](const VectorXd& uu) { return integrate_interval(r.dyn, x, uu, 0.004, settings); };
      const MatrixXd A = fd_jacobian(f, x);
      const MatrixXd B = fd_jacobian(g, u);
      CHECK((s.x_next - f(x)).norm() == 0.0);
      CHECK((s.A - A).cwiseAbs().maxCoeff() < 1e-4 * std::max(1.0, A.cwiseAbs().maxCoeff()));
      CHECK((s.B - B).cwiseAbs().maxCoeff() < 1e-4 * std::max(1.0, B.cwiseAbs().maxCoeff()));
      CHECK((s.c - (s.x_next - s.A * x - s.B * u)).norm() < 1e-9 * (1.0 + s.c.norm()));
    }
  }
}

TEST_CASE("rollouts") {
  const auto sys = LinearSecondOrderSystem::point_mass(1, 1.0);
  IntegratorSettings settings;
  settings.h_int = 0.01;
  const ControlTrajectory U(5, VectorXd::Ones(1));
  const Rollout r = rollout(sys, VectorXd::Zero(2), U, 0.01, settings);
  REQUIRE(r.X.size() == 6);
  REQUIRE(r.U.size() == 5);
  // v_n = n h, q_n = h^2 n (n + 1) / 2 under semi-implicit Euler.
  CHECK(r.X[5](1) == doctest::Approx(0.05));
  CHECK(r.X[5](0) == doctest::Approx(1e-4 * 15));

  AffinePolicy policy;
  policy.u_ff.assign(5, VectorXd::Zero(1));
  policy.K.assign(5, MatrixXd::Constant(1, 2, -1.0));
  policy.x_ref.assign(6, VectorXd::Zero(2));
  const Rollout c = rollout(sys, VectorXd::Ones(2), policy, 0.01, settings);
  CHECK(c.U[0](0) == doctest::Approx(-2.0));
  CHECK(c.U[1](0) == doctest::Approx(-(c.X[1](0) + c.X[1](1))));
}

TEST_CASE("divergent rollout reports the stage") {
  const auto sys = LinearSecondOrderSystem::point_mass(1, 1.0);
  IntegratorSettings settings;
  settings.h_int = 0.01;
  ControlTrajectory U(6, VectorXd::Zero(1));
  U[3](0) = std::numeric_limits<double>::infinity();
  try {
    rollout(sys, VectorXd::Zero(2), U, 0.01, settings);
    FAIL("expected NonFiniteState");
  } catch (const NonFiniteState& e) {
    CHECK(e.stage == 3);
  }
}

}  // TEST_SUITE
