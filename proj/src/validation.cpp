#include "wbmpc/validation.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wbmpc {

MatrixXd fd_jacobian(const VectorMap& f, const VectorXd& x, const FDSettings& settings) {
  if (!(settings.step > 0)) throw Error("finite-difference step must be positive");
  const VectorXd f0 = f(x);
  MatrixXd J(f0.size(), x.size());
  VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + settings.step;
    const VectorXd fp = f(xp);
    xp(i) = x(i) - settings.step;
    const VectorXd fm = f(xp);
    xp(i) = x(i);
    J.col(i) = (fp - fm) / (2 * settings.step);
  }
  return J;
}

DenseLqocSolution solve_dense_oracle(const LqocProblemd& p) {
  const int N = p.horizon();
  const int nx = p.nx();
  const int nu = p.nu();
  const int n_dx = (N + 1) * nx;
  const int n_var = n_dx + N * nu;
  const int n_con = (N + 1) * nx;
  auto ix = [&](int n) { return n * nx; };
  auto iu = [&](int n) { return n_dx + n * nu; };

  MatrixXd K = MatrixXd::Zero(n_var + n_con, n_var + n_con);
  VectorXd rhs = VectorXd::Zero(n_var + n_con);
  for (int n = 0; n < N; ++n) {
    const auto& s = p.stages[static_cast<std::size_t>(n)];
    K.block(ix(n), ix(n), nx, nx) += s.Q;
    K.block(iu(n), iu(n), nu, nu) += s.R;
    K.block(iu(n), ix(n), nu, nx) += s.P;
    K.block(ix(n), iu(n), nx, nu) += s.P.transpose();
    rhs.segment(ix(n), nx) -= s.q;
    rhs.segment(iu(n), nu) -= s.r;
  }
  K.block(ix(N), ix(N), nx, nx) += p.Q_final;
  rhs.segment(ix(N), nx) -= p.q_final;

  // Constraint rows: dx_0 = dx0 and dx_{n+1} - A dx_n - B du_n = c_n.
  MatrixXd C = MatrixXd::Zero(n_con, n_var);
  VectorXd d(n_con);
  C.block(0, ix(0), nx, nx).setIdentity();
  d.head(nx) = p.dx0;
  for (int n = 0; n < N; ++n) {
    const auto& s = p.stages[static_cast<std::size_t>(n)];
    const int row = (n + 1) * nx;
    C.block(row, ix(n + 1), nx, nx).setIdentity();
    C.block(row, ix(n), nx, nx) = -s.A;
    C.block(row, iu(n), nx, nu) = -s.B;
    d.segment(row, nx) = s.c;
  }
  K.block(n_var, 0, n_con, n_var) = C;
  K.block(0, n_var, n_var, n_con) = C.transpose();
  rhs.tail(n_con) = d;

  const Eigen::PartialPivLU<MatrixXd> lu(K);
  const VectorXd z = lu.solve(rhs);
  const double residual = (K * z - rhs).lpNorm<Eigen::Infinity>();
  const double scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
  if (!z.allFinite() || residual > 1e-6 * scale)
    throw SingularKKT("dense KKT system is singular (residual " + std::to_string(residual) + ")");

  DenseLqocSolution out;
  for (int n = 0; n <= N; ++n) out.dx.push_back(z.segment(ix(n), nx));
  for (int n = 0; n < N; ++n) out.du.push_back(z.segment(iu(n), nu));
  return out;
}

std::vector<BodyPose> body_poses_oracle(const RobotModel& model, const VectorXd& q) {
  std::vector<BodyPose> out;
  const double pitch = q(2);
  out.push_back({Vector2d(q(0), q(1)), pitch, model.base_mass, model.base_inertia});
  const double c = std::cos(pitch);
  const double s = std::sin(pitch);
  for (int leg = 0; leg < model.n_ee(); ++leg) {
    const LegParams& p = model.legs[static_cast<std::size_t>(leg)];
    Vector2d joint(q(0) + c * p.hip_offset.x() - s * p.hip_offset.y(),
                   q(1) + s * p.hip_offset.x() + c * p.hip_offset.y());
    double angle = pitch;
    for (int seg = 0; seg < 2; ++seg) {
      angle += q(RobotModel::base_dof + 2 * leg + seg);
      // A segment at absolute angle zero hangs straight down.
      const Vector2d down(std::sin(angle), -std::cos(angle));
      const double len = seg == 0 ? p.thigh_length : p.shank_length;
      const double com = seg == 0 ? p.thigh_com : p.shank_com;
      out.push_back({joint + com * len * down, angle, seg == 0 ? p.thigh_mass : p.shank_mass,
                     seg == 0 ? p.thigh_inertia : p.shank_inertia});
      joint += len * down;
    }
  }
  return out;
}

namespace {

VectorXd configuration_rate(const VectorXd& q, const VectorXd& v) {
  VectorXd qdot = v;
  const double c = std::cos(q(2));
  const double s = std::sin(q(2));
  qdot(0) = c * v(0) - s * v(1);
  qdot(1) = s * v(0) + c * v(1);
  return qdot;
}

}  // namespace

double kinetic_energy_oracle(const RobotModel& model, const VectorXd& q, const VectorXd& v) {
  const VectorXd qdot = configuration_rate(q, v);
  const double eps = 1e-6;
  const auto plus = body_poses_oracle(model, q + eps * qdot);
  const auto minus = body_poses_oracle(model, q - eps * qdot);
  double T = 0.0;
  for (std::size_t b = 0; b < plus.size(); ++b) {
    const Vector2d vel = (plus[b].com - minus[b].com) / (2 * eps);
    const double omega = (plus[b].angle - minus[b].angle) / (2 * eps);
    T += 0.5 * plus[b].mass * vel.squaredNorm() + 0.5 * plus[b].inertia * omega * omega;
  }
  return T;
}

double potential_energy_oracle(const RobotModel& model, const VectorXd& q) {
  double V = 0.0;
  for (const auto& b : body_poses_oracle(model, q)) V += b.mass * model.gravity * b.com.y();
  return V;
}

double total_energy_oracle(const RobotModel& model, const VectorXd& x) {
  const int nq = model.nq();
  return kinetic_energy_oracle(model, x.head(nq), x.tail(model.nv())) +
         potential_energy_oracle(model, x.head(nq));
}

MatrixXd mass_matrix_oracle(const RobotModel& model, const VectorXd& q) {
  // T = 1/2 v'Mv is exactly quadratic, so polarization recovers M.
  const int nv = model.nv();
  MatrixXd M(nv, nv);
  std::vector<double> diag(static_cast<std::size_t>(nv));
  for (int i = 0; i < nv; ++i) {
    const VectorXd e = VectorXd::Unit(nv, i);
    diag[static_cast<std::size_t>(i)] = kinetic_energy_oracle(model, q, e);
    M(i, i) = 2 * diag[static_cast<std::size_t>(i)];
  }
  for (int i = 0; i < nv; ++i) {
    for (int j = i + 1; j < nv; ++j) {
      const VectorXd e = VectorXd::Unit(nv, i) + VectorXd::Unit(nv, j);
      const double Tij = kinetic_energy_oracle(model, q, e);
      M(i, j) = M(j, i) =
          Tij - diag[static_cast<std::size_t>(i)] - diag[static_cast<std::size_t>(j)];
    }
  }
  return M;
}

VectorXd gravity_oracle(const RobotModel& model, const VectorXd& q) {
  const int nv = model.nv();
  VectorXd G(nv);
  const double eps = 1e-6;
  for (int i = 0; i < nv; ++i) {
    // Directional derivative along the configuration rate of a unit generalized velocity.
    const VectorXd dq = configuration_rate(q, VectorXd::Unit(nv, i));
    G(i) = (potential_energy_oracle(model, q + eps * dq) -
            potential_energy_oracle(model, q - eps * dq)) /
           (2 * eps);
  }
  return G;
}

Vector2d linear_momentum_oracle(const RobotModel& model, const VectorXd& q, const VectorXd& v) {
  const VectorXd qdot = configuration_rate(q, v);
  const double eps = 1e-6;
  const auto plus = body_poses_oracle(model, q + eps * qdot);
  const auto minus = body_poses_oracle(model, q - eps * qdot);
  Vector2d p = Vector2d::Zero();
  for (std::size_t b = 0; b < plus.size(); ++b)
    p += plus[b].mass * (plus[b].com - minus[b].com) / (2 * eps);
  return p;
}

double extract_limit_cycle_period(const std::vector<double>& signal, double dt) {
  if (!(dt > 0)) throw Error("sample period must be positive");
  const auto n = static_cast<int>(signal.size());
  if (n < 8) throw NoPeriodicity("signal too short");
  const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) / n;
  std::vector<double> s(signal.size());
  std::transform(signal.begin(), signal.end(), s.begin(), [&](double v) { return v - mean; });
  double energy = 0.0;
  for (double v : s) energy += v * v;
  const double amplitude = std::sqrt(energy / n);
  if (!(amplitude > 1e-9 * std::max(1.0, std::abs(mean))))
    throw NoPeriodicity("signal is constant");

  // Unbiased autocorrelation, normalized to 1 at lag 0. Lags up to n / 3 keep at least
  // three repetitions of any period that is found.
  const int max_lag = n / 3;
  std::vector<double> r(static_cast<std::size_t>(max_lag + 1));
  for (int lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (int i = 0; i + lag < n; ++i) acc += s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i + lag)];
    r[static_cast<std::size_t>(lag)] = acc / (n - lag) / (energy / n);
  }

  // Local maxima after the correlation has gone negative. The first one within 90% of the
  // highest is the period; smaller bumps before it come from harmonics.
  int lag = 1;
  while (lag <= max_lag && r[static_cast<std::size_t>(lag)] > 0) ++lag;
  std::vector<int> peaks;
  double highest = 0.3;
  for (; lag < max_lag; ++lag) {
    const double c = r[static_cast<std::size_t>(lag)];
    if (c > 0.3 && c >= r[static_cast<std::size_t>(lag - 1)] && c >= r[static_cast<std::size_t>(lag + 1)]) {
      peaks.push_back(lag);
      highest = std::max(highest, c);
    }
  }
  int best = -1;
  for (int k : peaks)
    if (r[static_cast<std::size_t>(k)] >= 0.9 * highest) {
      best = k;
      break;
    }
  if (best < 0) throw NoPeriodicity("no autocorrelation peak within a third of the signal");

  // Parabolic refinement around the discrete peak.
  const double a = r[static_cast<std::size_t>(best - 1)];
  const double b = r[static_cast<std::size_t>(best)];
  const double c = r[static_cast<std::size_t>(best + 1)];
  const double denom = a - 2 * b + c;
  const double offset = std::abs(denom) > 1e-12 ? 0.5 * (a - c) / denom : 0.0;
  return (best + std::clamp(offset, -0.5, 0.5)) * dt;
}

double extract_limit_cycle_period(const ClosedLoopLog& log, const std::string& column,
                                  double t_begin, double t_end) {
  const auto values = log_column(log, column);
  std::vector<double> window;
  double dt = 0.0;
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    const double t = log.rows[i].time;
    if (t >= t_begin && t < t_end) window.push_back(values[i]);
  }
  if (log.rows.size() >= 2) dt = log.rows[1].time - log.rows[0].time;
  return extract_limit_cycle_period(window, dt);
}

bool stable_at(const SecondOrderSystem& system, Scheme scheme, const VectorXd& x0,
               const VectorXd& u, double h, const StabilitySettings& settings) {
  const double limit = settings.growth_bound * std::max(x0.norm(), 1e-12);
  const auto steps = static_cast<long>(std::ceil(settings.window / h - 1e-9));
  VectorXd x = x0;
  try {
    for (long k = 0; k < steps; ++k) {
      x = step(system, x, u, h, scheme);
      if (!x.allFinite() || x.norm() >= limit) return false;
    }
  } catch (const Error&) {
    return false;
  }
  return true;
}

double stability_boundary(const SecondOrderSystem& system, Scheme scheme, const VectorXd& x,
                          const VectorXd& u, const StabilitySettings& settings) {
  double lo = settings.h_start;
  while (!stable_at(system, scheme, x, u, lo, settings)) {
    lo *= 0.5;
    if (lo < settings.h_min) return 0.0;
  }
  double hi = 2 * lo;
  while (stable_at(system, scheme, x, u, hi, settings)) {
    lo = hi;
    hi *= 2;
    if (hi > settings.h_max) return settings.h_max;
  }
  while (hi - lo > settings.tolerance) {
    const double mid = 0.5 * (lo + hi);
    (stable_at(system, scheme, x, u, mid, settings) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace wbmpc
