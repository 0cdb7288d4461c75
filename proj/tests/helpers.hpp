#pragma once

#include "wbmpc/config.hpp"
#include "wbmpc/validation.hpp"

#include <random>
#include <string>

namespace wbmpc::test {

inline std::string task_path(const std::string& name) {
  return std::string(WBMPC_SOURCE_DIR) + "/tasks/" + name + ".task";
}

inline MatrixXd random_matrix(std::mt19937& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline VectorXd random_vector(std::mt19937& rng, int size, double scale = 1.0) {
  return random_matrix(rng, size, 1, scale);
}

/// Convex LQ instance: A has spectral norm 0.98, so the state neither explodes nor
/// decays to nothing over long horizons, and the joint stage Hessian [Q P'; P R] is
/// F'F + 0.1 I.
inline LqocProblemd random_lqoc(std::mt19937& rng, int nx, int nu, int N) {
  LqocProblemd p;
  for (int n = 0; n < N; ++n) {
    LqocStaged s;
    s.A = random_matrix(rng, nx, nx);
    s.A *= 0.98 / Eigen::JacobiSVD<MatrixXd>(s.A).singularValues()(0);
    s.B = random_matrix(rng, nx, nu);
    s.c = random_vector(rng, nx, 0.1);
    const MatrixXd F = random_matrix(rng, nx + nu, nx + nu);
    MatrixXd H = F.transpose() * F;
    H.diagonal().array() += 0.1;
    s.Q = H.topLeftCorner(nx, nx);
    s.R = H.bottomRightCorner(nu, nu);
    s.P = H.bottomLeftCorner(nu, nx);
    s.q = random_vector(rng, nx);
    s.r = random_vector(rng, nu);
    p.stages.push_back(s);
  }
  const MatrixXd F = random_matrix(rng, nx, nx);
  p.Q_final = F.transpose() * F + MatrixXd::Identity(nx, nx);
  p.q_final = random_vector(rng, nx);
  p.dx0 = random_vector(rng, nx);
  return p;
}

/// max |a - b| / max(|b|, 1) over a trajectory.
inline double relative_deviation(const std::vector<VectorXd>& a, const std::vector<VectorXd>& b) {
  double diff = 0.0;
  double scale = 1.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    diff = std::max(diff, (a[n] - b[n]).lpNorm<Eigen::Infinity>());
    scale = std::max(scale, b[n].lpNorm<Eigen::Infinity>());
  }
  return diff / scale;
}

struct LqOracle {
  StateTrajectory X;
  ControlTrajectory U;
};

/// Optimal trajectory of a point-mass task, built from the interval matrices of the
/// semi-implicit Euler scheme written out by hand and solved as one dense KKT system.
inline LqOracle point_mass_oracle(const TaskConfig& task) {
  const int d = task.point_mass_dims;
  const int nx = 2 * d;
  const double m = task.point_mass_mass;
  const double h = task.solver.integrator.h_int;
  const double dt = task.solver.control_dt;
  const int substeps = static_cast<int>(std::round(dt / h));
  const MatrixXd I = MatrixXd::Identity(d, d);
  MatrixXd A1 = MatrixXd::Identity(nx, nx);
  A1.topRightCorner(d, d) = h * I;
  MatrixXd B1(nx, d);
  B1 << h * h / m * I, h / m * I;
  MatrixXd A = MatrixXd::Identity(nx, nx);
  MatrixXd B = MatrixXd::Zero(nx, d);
  for (int i = 0; i < substeps; ++i) {
    B = A1 * B + B1;
    A = A1 * A;
  }

  const auto& run = task.cost.running.front();
  const auto& fin = task.cost.final_term;
  LqocProblemd p;
  for (int n = 0; n < task.solver.horizon; ++n) {
    LqocStaged s;
    s.A = A;
    s.B = B;
    s.c = VectorXd::Zero(nx);
    s.Q = (2.0 * dt * run.state_weights).asDiagonal();
    s.q = -2.0 * dt * run.state_weights.cwiseProduct(run.x_ref);
    s.R = (2.0 * dt * run.control_weights).asDiagonal();
    s.r = -2.0 * dt * run.control_weights.cwiseProduct(run.u_ref);
    s.P = MatrixXd::Zero(d, nx);
    p.stages.push_back(s);
  }
  p.Q_final = (2.0 * fin.state_weights).asDiagonal();
  p.q_final = -2.0 * fin.state_weights.cwiseProduct(fin.x_ref);
  p.dx0 = task.x0;
  const auto sol = solve_dense_oracle(p);
  return {sol.dx, sol.du};
}

/// Quadruped state near the nominal stance. Stance states put the feet up to 2 cm into
/// the ground, flight states lift them 5 to 15 cm clear.
inline VectorXd random_quadruped_state(std::mt19937& rng, const RobotModel& model,
                                       const VectorXd& stance, bool flight) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorXd x = stance;
  x(0) += 0.1 * u(rng);
  x(2) += 0.1 * u(rng);
  for (int j = 3; j < model.nq(); ++j) x(j) += 0.2 * u(rng);
  const int nq = model.nq();
  for (int j = 0; j < model.nv(); ++j) x(nq + j) = 0.5 * u(rng);
  // Place the lowest foot relative to the ground.
  double lowest = 1e9;
  for (int leg = 0; leg < model.n_ee(); ++leg)
    lowest = std::min(lowest, end_effector_state(model, x, leg).position.y());
  const double target = flight ? 0.05 + 0.05 * (u(rng) + 1.0) : -0.01 + 0.01 * u(rng);
  x(1) += target - lowest;
  return x;
}

}  // namespace wbmpc::test
