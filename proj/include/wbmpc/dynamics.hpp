#pragma once

#include "wbmpc/contact.hpp"
#include "wbmpc/model.hpp"

#include <memory>
#include <vector>

namespace wbmpc {

struct PositionRateLinearization {
  VectorXd rate;  // q_dot
  MatrixXd dq;    // d q_dot / d q
  MatrixXd dv;    // d q_dot / d v
};

struct AccelerationLinearization {
  VectorXd acceleration;
  MatrixXd da_dq;
  MatrixXd da_dv;
  MatrixXd da_du;
};

/// Mechanical system q_dot = rate(q, v), v_dot = a(q, v, u). The split is what the
/// semi-implicit integrator and its sensitivity propagation rely on.
class SecondOrderSystem {
 public:
  virtual ~SecondOrderSystem() = default;

  virtual int nq() const = 0;
  virtual int nv() const = 0;
  virtual int nu() const = 0;
  int nx() const { return nq() + nv(); }

  virtual VectorXd position_rate(const VectorXd& q, const VectorXd& v) const = 0;
  virtual VectorXd acceleration(const VectorXd& q, const VectorXd& v, const VectorXd& u) const = 0;
  virtual PositionRateLinearization linearize_position_rate(const VectorXd& q,
                                                            const VectorXd& v) const = 0;
  virtual AccelerationLinearization linearize_acceleration(const VectorXd& q, const VectorXd& v,
                                                           const VectorXd& u) const = 0;

  /// First-order form x_dot = f(x, u) with x = [q; v].
  VectorXd flow(const VectorXd& x, const VectorXd& u) const;
};

struct ContinuousJacobians {
  MatrixXd dfdx;
  MatrixXd dfdu;
};

/// Exact Jacobians of the first-order flow.
ContinuousJacobians dynamics_jacobians(const SecondOrderSystem& system, const VectorXd& x,
                                       const VectorXd& u);

/// Rigid-body dynamics with the smooth contact model on every foot and an optional
/// world-frame force acting on the base.
class RobotDynamics final : public SecondOrderSystem {
 public:
  RobotDynamics(std::shared_ptr<const RobotModel> model, ContactParams contact,
                std::vector<GroundPlane> grounds = {GroundPlane{}},
                Vector2d base_force = Vector2d::Zero());

  int nq() const override { return model_->nq(); }
  int nv() const override { return model_->nv(); }
  int nu() const override { return model_->nu(); }

  VectorXd position_rate(const VectorXd& q, const VectorXd& v) const override;
  VectorXd acceleration(const VectorXd& q, const VectorXd& v, const VectorXd& u) const override;
  PositionRateLinearization linearize_position_rate(const VectorXd& q,
                                                    const VectorXd& v) const override;
  AccelerationLinearization linearize_acceleration(const VectorXd& q, const VectorXd& v,
                                                   const VectorXd& u) const override;

  /// S^T tau + sum J_c^T lambda + base force, as a function of the state.
  VectorXd generalized_force(const VectorXd& q, const VectorXd& v, const VectorXd& u) const;
  /// Per-foot world-frame contact forces.
  std::vector<Vector2d> foot_forces(const VectorXd& x) const;
  /// Per-foot contact-normal force components.
  VectorXd normal_forces(const VectorXd& x) const;

  const RobotModel& model() const { return *model_; }
  std::shared_ptr<const RobotModel> model_ptr() const { return model_; }
  const ContactParams& contact() const { return contact_; }
  const std::vector<GroundPlane>& grounds() const { return grounds_; }
  const Vector2d& base_force() const { return base_force_; }

  double total_energy(const VectorXd& x) const;

 private:
  template <typename Scalar>
  VectorX<Scalar> external_force(const VectorX<Scalar>& q, const VectorX<Scalar>& v) const;

  std::shared_ptr<const RobotModel> model_;
  ContactParams contact_;
  std::vector<GroundPlane> grounds_;
  Vector2d base_force_;
};

/// q_dot = v, v_dot = Kq q + Kv v + Bu u + offset. Used for linear-quadratic checks.
class LinearSecondOrderSystem final : public SecondOrderSystem {
 public:
  LinearSecondOrderSystem(MatrixXd Kq, MatrixXd Kv, MatrixXd Bu, VectorXd offset);
  /// Unit point masses in `dims` dimensions driven directly by force inputs.
  static LinearSecondOrderSystem point_mass(int dims, double mass);

  int nq() const override { return static_cast<int>(Kq_.rows()); }
  int nv() const override { return static_cast<int>(Kq_.rows()); }
  int nu() const override { return static_cast<int>(Bu_.cols()); }

  VectorXd position_rate(const VectorXd& q, const VectorXd& v) const override;
  VectorXd acceleration(const VectorXd& q, const VectorXd& v, const VectorXd& u) const override;
  PositionRateLinearization linearize_position_rate(const VectorXd& q,
                                                    const VectorXd& v) const override;
  AccelerationLinearization linearize_acceleration(const VectorXd& q, const VectorXd& v,
                                                   const VectorXd& u) const override;

  const MatrixXd& Kq() const { return Kq_; }
  const MatrixXd& Kv() const { return Kv_; }
  const MatrixXd& Bu() const { return Bu_; }

 private:
  MatrixXd Kq_;
  MatrixXd Kv_;
  MatrixXd Bu_;
  VectorXd offset_;
};

}  // namespace wbmpc
