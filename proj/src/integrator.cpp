#include "wbmpc/integrator.hpp"

#include <cmath>

namespace wbmpc {

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::symplectic_euler:
      return "symplectic_euler";
    case Scheme::explicit_euler:
      return "explicit_euler";
    case Scheme::rk4:
      return "rk4";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "symplectic_euler") return Scheme::symplectic_euler;
  if (name == "explicit_euler") return Scheme::explicit_euler;
  if (name == "rk4") return Scheme::rk4;
  throw Error("unknown integration scheme '" + name + "'");
}

int IntegratorSettings::substeps(double control_dt) const {
  if (!(h_int > 0) || !(control_dt > 0)) throw Error("integration and control steps must be > 0");
  const double ratio = control_dt / h_int;
  const double rounded = std::round(ratio);
  if (rounded < 1 || std::abs(ratio - rounded) > 1e-9 * ratio)
    throw Error("control period must be an integer multiple of the integration step");
  return static_cast<int>(rounded);
}

VectorXd step_symplectic(const SecondOrderSystem& system, const VectorXd& x, const VectorXd& u,
                         double h) {
  const int nq = system.nq();
  const int nv = system.nv();
  const VectorXd q = x.head(nq);
  const VectorXd v_next = x.tail(nv) + h * system.acceleration(q, x.tail(nv), u);
  VectorXd out(nq + nv);
  out << q + h * system.position_rate(q, v_next), v_next;
  if (!out.allFinite()) throw NonFiniteState("symplectic step produced a non-finite state");
  return out;
}

VectorXd step_explicit(const SecondOrderSystem& system, const VectorXd& x, const VectorXd& u,
                       double h, Scheme scheme) {
  return step_explicit([&](const VectorXd& xx, const VectorXd& uu) { return system.flow(xx, uu); },
                       x, u, h, scheme);
}

VectorXd step(const SecondOrderSystem& system, const VectorXd& x, const VectorXd& u, double h,
              Scheme scheme) {
  if (scheme == Scheme::symplectic_euler) return step_symplectic(system, x, u, h);
  return step_explicit(system, x, u, h, scheme);
}

VectorXd integrate_interval(const SecondOrderSystem& system, const VectorXd& x,
                            const VectorXd& u, double control_dt,
                            const IntegratorSettings& settings) {
  const int n = settings.substeps(control_dt);
  VectorXd out = x;
  for (int i = 0; i < n; ++i) out = step(system, out, u, settings.h_int, settings.scheme);
  return out;
}

Rollout rollout(const SecondOrderSystem& system, const VectorXd& x0,
                const ControlTrajectory& controls, double control_dt,
                const IntegratorSettings& settings) {
  AffinePolicy open_loop;
  open_loop.u_ff = controls;
  return rollout(system, x0, open_loop, control_dt, settings);
}

Rollout rollout(const SecondOrderSystem& system, const VectorXd& x0, const AffinePolicy& policy,
                double control_dt, const IntegratorSettings& settings) {
  Rollout out;
  const int N = policy.size();
  out.X.reserve(static_cast<std::size_t>(N + 1));
  out.U.reserve(static_cast<std::size_t>(N));
  out.X.push_back(x0);
  for (int n = 0; n < N; ++n) {
    const VectorXd& x = out.X.back();
    VectorXd u = policy(n, x);
    try {
      VectorXd x_next = integrate_interval(system, x, u, control_dt, settings);
      out.U.push_back(std::move(u));
      out.X.push_back(std::move(x_next));
    } catch (const NonFiniteState&) {
      throw NonFiniteState("rollout diverged at stage " + std::to_string(n), n);
    }
  }
  return out;
}

namespace {

struct SubstepResult {
  VectorXd x_next;
  MatrixXd A;
  MatrixXd B;
};

SubstepResult symplectic_substep(const SecondOrderSystem& system, const VectorXd& x,
                                 const VectorXd& u, double h) {
  const int nq = system.nq();
  const int nv = system.nv();
  const VectorXd q = x.head(nq);
  const auto acc = system.linearize_acceleration(q, x.tail(nv), u);
  const VectorXd v_next = x.tail(nv) + h * acc.acceleration;
  const auto pos = system.linearize_position_rate(q, v_next);

  SubstepResult out;
  out.x_next.resize(nq + nv);
  out.x_next << q + h * pos.rate, v_next;

  // v+ = v + h a(q, v, u);  q+ = q + h rate(q, v+)
  MatrixXd dvn_dx(nv, nq + nv);
  dvn_dx << h * acc.da_dq, MatrixXd::Identity(nv, nv) + h * acc.da_dv;
  const MatrixXd dvn_du = h * acc.da_du;

  out.A.resize(nq + nv, nq + nv);
  out.A.topRows(nq) = h * pos.dv * dvn_dx;
  out.A.topLeftCorner(nq, nq) += MatrixXd::Identity(nq, nq) + h * pos.dq;
  out.A.bottomRows(nv) = dvn_dx;
  out.B.resize(nq + nv, system.nu());
  out.B.topRows(nq) = h * pos.dv * dvn_du;
  out.B.bottomRows(nv) = dvn_du;
  return out;
}

SubstepResult explicit_substep(const SecondOrderSystem& system, const VectorXd& x,
                               const VectorXd& u, double h, Scheme scheme) {
  const int nx = system.nx();
  const MatrixXd I = MatrixXd::Identity(nx, nx);
  SubstepResult out;
  if (scheme == Scheme::explicit_euler) {
    const auto J = dynamics_jacobians(system, x, u);
    out.x_next = x + h * system.flow(x, u);
    out.A = I + h * J.dfdx;
    out.B = h * J.dfdu;
    return out;
  }
  // RK4: chain rule through the four stages.
  const VectorXd k1 = system.flow(x, u);
  const auto J1 = dynamics_jacobians(system, x, u);
  const MatrixXd dk1_dx = J1.dfdx;
  const MatrixXd dk1_du = J1.dfdu;

  const VectorXd x2 = x + 0.5 * h * k1;
  const VectorXd k2 = system.flow(x2, u);
  const auto J2 = dynamics_jacobians(system, x2, u);
  const MatrixXd dk2_dx = J2.dfdx * (I + 0.5 * h * dk1_dx);
  const MatrixXd dk2_du = J2.dfdx * (0.5 * h * dk1_du) + J2.dfdu;

  const VectorXd x3 = x + 0.5 * h * k2;
  const VectorXd k3 = system.flow(x3, u);
  const auto J3 = dynamics_jacobians(system, x3, u);
  const MatrixXd dk3_dx = J3.dfdx * (I + 0.5 * h * dk2_dx);
  const MatrixXd dk3_du = J3.dfdx * (0.5 * h * dk2_du) + J3.dfdu;

  const VectorXd x4 = x + h * k3;
  const VectorXd k4 = system.flow(x4, u);
  const auto J4 = dynamics_jacobians(system, x4, u);
  const MatrixXd dk4_dx = J4.dfdx * (I + h * dk3_dx);
  const MatrixXd dk4_du = J4.dfdx * (h * dk3_du) + J4.dfdu;

  out.x_next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  out.A = I + (h / 6.0) * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx);
  out.B = (h / 6.0) * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du);
  return out;
}

}  // namespace

StageSensitivity stage_sensitivity(const SecondOrderSystem& system, const VectorXd& x,
                                   const VectorXd& u, double control_dt,
                                   const IntegratorSettings& settings) {
  const int n = settings.substeps(control_dt);
  const int nx = system.nx();
  StageSensitivity out;
  out.A = MatrixXd::Identity(nx, nx);
  out.B = MatrixXd::Zero(nx, system.nu());
  VectorXd xi = x;
  for (int i = 0; i < n; ++i) {
    const SubstepResult sub = settings.scheme == Scheme::symplectic_euler
                                  ? symplectic_substep(system, xi, u, settings.h_int)
                                  : explicit_substep(system, xi, u, settings.h_int, settings.scheme);
    if (!sub.x_next.allFinite()) throw NonFiniteState("sensitivity step produced a non-finite state");
    out.B = sub.A * out.B + sub.B;
    out.A = sub.A * out.A;
    xi = sub.x_next;
  }
  out.x_next = xi;
  out.c = out.x_next - out.A * x - out.B * u;
  return out;
}

}  // namespace wbmpc
