#pragma once

#include "wbmpc/dynamics.hpp"
#include "wbmpc/errors.hpp"
#include "wbmpc/policy.hpp"

#include <string>

namespace wbmpc {

enum class Scheme { symplectic_euler, explicit_euler, rk4 };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct IntegratorSettings {
  double h_int = 0.001;
  Scheme scheme = Scheme::symplectic_euler;

  /// Number of integration substeps per control interval. Throws if `control_dt`
  /// is not an integer multiple of h_int.
  int substeps(double control_dt) const;
};

/// Local linear model x_next ~ A x + B u + c of one control interval.
struct StageSensitivity {
  MatrixXd A;
  MatrixXd B;
  VectorXd c;
  VectorXd x_next;
};

/// Semi-implicit Euler: the velocity is updated first from the current
/// configuration, then the configuration is advanced with the new velocity.
VectorXd step_symplectic(const SecondOrderSystem& system, const VectorXd& x, const VectorXd& u,
                         double h);

/// One explicit Euler or RK4 step of x_dot = flow(x, u).
template <typename Flow>
VectorXd step_explicit(Flow&& flow, const VectorXd& x, const VectorXd& u, double h,
                       Scheme scheme) {
  VectorXd out;
  if (scheme == Scheme::rk4) {
    const VectorXd k1 = flow(x, u);
    const VectorXd k2 = flow(VectorXd(x + 0.5 * h * k1), u);
    const VectorXd k3 = flow(VectorXd(x + 0.5 * h * k2), u);
    const VectorXd k4 = flow(VectorXd(x + h * k3), u);
    out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  } else if (scheme == Scheme::explicit_euler) {
    out = x + h * flow(x, u);
  } else {
    throw Error("step_explicit: scheme must be explicit_euler or rk4");
  }
  if (!out.allFinite()) throw NonFiniteState("explicit step produced a non-finite state");
  return out;
}

VectorXd step_explicit(const SecondOrderSystem& system, const VectorXd& x, const VectorXd& u,
                       double h, Scheme scheme);

VectorXd step(const SecondOrderSystem& system, const VectorXd& x, const VectorXd& u, double h,
              Scheme scheme);

/// Integrates one control interval with a zero-order-hold control.
VectorXd integrate_interval(const SecondOrderSystem& system, const VectorXd& x,
                            const VectorXd& u, double control_dt,
                            const IntegratorSettings& settings);

struct Rollout {
  StateTrajectory X;    // N + 1 states
  ControlTrajectory U;  // N applied controls
};

/// Open-loop rollout of a control sequence. NonFiniteState carries the stage index.
Rollout rollout(const SecondOrderSystem& system, const VectorXd& x0,
                const ControlTrajectory& controls, double control_dt,
                const IntegratorSettings& settings);

/// Closed-loop rollout; the policy is evaluated once per control interval.
Rollout rollout(const SecondOrderSystem& system, const VectorXd& x0, const AffinePolicy& policy,
                double control_dt, const IntegratorSettings& settings);

/// Exact Jacobians of the discrete interval map, accumulated over the substeps with
/// the same update structure the integrator uses.
StageSensitivity stage_sensitivity(const SecondOrderSystem& system, const VectorXd& x,
                                   const VectorXd& u, double control_dt,
                                   const IntegratorSettings& settings);

}  // namespace wbmpc
