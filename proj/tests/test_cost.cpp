#include "helpers.hpp"

#include <doctest.h>

using namespace wbmpc;
using namespace wbmpc::test;

namespace {

CostFunction sample_cost(std::mt19937& rng) {
  CostFunction c;
  QuadraticTerm t;
  t.state_weights = random_vector(rng, 4).cwiseAbs();
  t.control_weights = random_vector(rng, 2).cwiseAbs();
  t.x_ref = random_vector(rng, 4);
  t.u_ref = random_vector(rng, 2);
  c.running.push_back(t);
  c.final_term = t;
  c.final_term.control_weights.resize(0);
  TemporalActivation a;
  a.name = "apex";
  a.t_start = 0.1;
  a.t_end = 0.2;
  a.period = 0.5;
  a.state_indices = {1, 3};
  a.target = (VectorXd(2) << 0.5, -0.5).finished();
  a.weights = (VectorXd(2) << 100.0, 10.0).finished();
  c.temporal.push_back(a);
  return c;
}

}  // namespace

TEST_SUITE("cost") {

TEST_CASE("periodic and one-shot activation windows") {
  TemporalActivation a;
  a.t_start = 0.1;
  a.t_end = 0.2;
  CHECK(!activation(a, 0.05));
  CHECK(activation(a, 0.1));
  CHECK(activation(a, 0.15));
  CHECK(!activation(a, 0.2));
  CHECK(!activation(a, 0.65));
  a.period = 0.5;
  CHECK(activation(a, 0.65));
  CHECK(activation(a, 10.15));
  CHECK(!activation(a, 10.25));
}

TEST_CASE("quadratization is exact") {
  std::mt19937 rng(51);
  const CostFunction c = sample_cost(rng);
  for (double t : {0.0, 0.15, 0.62}) {
    const VectorXd x = random_vector(rng, 4);
    const VectorXd u = random_vector(rng, 2);
    const auto q = quadratize(c, x, u, t);
    CHECK(q.constant == doctest::Approx(stage_cost(c, x, u, t)));
    const VectorXd dx = random_vector(rng, 4);
    const VectorXd du = random_vector(rng, 2);
    const double model = q.constant + q.q.dot(dx) + q.r.dot(du) + 0.5 * dx.dot(q.Q * dx) +
                         0.5 * du.dot(q.R * du) + du.dot(q.P * dx);
    CHECK(model == doctest::Approx(stage_cost(c, x + dx, u + du, t)).epsilon(1e-12));
  }
  const VectorXd x = random_vector(rng, 4);
  const auto f = quadratize_final(c, x);
  const VectorXd dx = random_vector(rng, 4);
  CHECK(f.constant + f.q.dot(dx) + 0.5 * dx.dot(f.Q * dx) ==
        doctest::Approx(final_cost(c, x + dx)));
}

TEST_CASE("temporal term only contributes inside its window") {
  std::mt19937 rng(52);
  CostFunction c = sample_cost(rng);
  const VectorXd x = random_vector(rng, 4);
  const VectorXd u = random_vector(rng, 2);
  const double inside = stage_cost(c, x, u, 0.65);
  const double outside = stage_cost(c, x, u, 0.75);
  const double extra = 100.0 * std::pow(x(1) - 0.5, 2) + 10.0 * std::pow(x(3) + 0.5, 2);
  CHECK(inside - outside == doctest::Approx(extra));
}

TEST_CASE("trajectory cost sums stage costs times dt plus the final cost") {
  std::mt19937 rng(53);
  const CostFunction c = sample_cost(rng);
  StateTrajectory X;
  ControlTrajectory U;
  for (int n = 0; n < 10; ++n) {
    X.push_back(random_vector(rng, 4));
    U.push_back(random_vector(rng, 2));
  }
  X.push_back(random_vector(rng, 4));
  double J = final_cost(c, X.back());
  for (int n = 0; n < 10; ++n) J += 0.02 * stage_cost(c, X[n], U[n], 1.0 + 0.02 * n);
  CHECK(evaluate(c, X, U, 0.02, 1.0) == doctest::Approx(J));
  U.pop_back();
  CHECK_THROWS_AS(evaluate(c, X, U, 0.02), DimensionMismatch);
}

TEST_CASE("validation") {
  std::mt19937 rng(54);
  CostFunction c = sample_cost(rng);
  CHECK_NOTHROW(validate(c, 4, 2));
  CHECK_THROWS_AS(validate(c, 5, 2), DimensionMismatch);
  CostFunction neg = c;
  neg.running[0].state_weights(0) = -1.0;
  CHECK_THROWS_AS(validate(neg, 4, 2), Error);
  CostFunction bad_index = c;
  bad_index.temporal[0].state_indices = {1, 9};
  CHECK_THROWS_AS(validate(bad_index, 4, 2), IndexOutOfRange);
  TemporalActivation empty = c.temporal[0];
  empty.t_end = empty.t_start;
  CHECK_THROWS_AS(validate(empty), Error);
}

}  // TEST_SUITE
