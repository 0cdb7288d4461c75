#pragma once

#include "wbmpc/errors.hpp"
#include "wbmpc/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace wbmpc {

/// Two-segment planar leg (hip flexion/extension + knee). Angles are measured
/// counter-clockwise in the sagittal x-z plane; zero points the segment straight down.
struct LegParams {
  Vector2d hip_offset = Vector2d::Zero();  // base frame
  double thigh_length = 0.35;
  double shank_length = 0.35;
  double thigh_mass = 2.5;
  double shank_mass = 1.5;
  double thigh_inertia = 0.0255;  // about the segment COM
  double shank_inertia = 0.0153;
  double thigh_com = 0.5;  // fraction of segment length from the proximal joint
  double shank_com = 0.5;

  double length(int segment) const { return segment == 0 ? thigh_length : shank_length; }
  double mass(int segment) const { return segment == 0 ? thigh_mass : shank_mass; }
  double inertia(int segment) const { return segment == 0 ? thigh_inertia : shank_inertia; }
  double com(int segment) const { return segment == 0 ? thigh_com : shank_com; }
};

/// Planar floating-base legged robot. Generalized coordinates are
/// q = [x, z, pitch, joints...] (world frame) and generalized velocities
/// v = [vx, vz, pitch rate, joint rates...] with the linear part in the base frame.
struct RobotModel {
  static constexpr int base_dof = 3;

  std::string name = "robot";
  double base_mass = 22.0;
  double base_inertia = 0.94;
  std::vector<LegParams> legs;
  double gravity = 9.81;
  std::vector<Vector2d> joint_limits;  // informational, one (lower, upper) per joint

  int nq() const { return base_dof + 2 * static_cast<int>(legs.size()); }
  int nv() const { return nq(); }
  int nu() const { return 2 * static_cast<int>(legs.size()); }
  int nx() const { return nq() + nv(); }
  int n_ee() const { return static_cast<int>(legs.size()); }
  double total_mass() const;
};

RobotModel make_hopper();
RobotModel make_planar_quadruped();

/// Throws wbmpc::Error if masses/inertias are non-positive or the leg list is empty.
void validate(const RobotModel& model);

/// Copy with all masses multiplied by `mass_scale` and inertias by `inertia_scale`.
RobotModel scaled(const RobotModel& model, double mass_scale, double inertia_scale);

struct RobotState {
  Vector3d base_pose = Vector3d::Zero();   // world x, z, pitch
  VectorXd joint_positions;
  Vector3d base_twist = Vector3d::Zero();  // local vx, vz, pitch rate
  VectorXd joint_velocities;

  VectorXd pack() const;
  static RobotState unpack(const VectorXd& x, int n_joints);
};

struct ControlInput {
  VectorXd joint_torques;
};

struct EndEffectorState {
  Vector2d position;
  Vector2d velocity;
  MatrixXd position_jacobian;  // d position / d q            (2 x nq)
  MatrixXd velocity_jacobian;  // d velocity / d v, i.e. J_c  (2 x nv)
};

template <typename Scalar>
struct RbdTerms {
  MatrixX<Scalar> M;
  VectorX<Scalar> C;
  VectorX<Scalar> G;
};

template <typename Scalar>
Matrix2<Scalar> rotation(const Scalar& angle) {
  using std::cos;
  using std::sin;
  Matrix2<Scalar> R;
  R << cos(angle), -sin(angle), sin(angle), cos(angle);
  return R;
}

/// (a_x, a_z) -> (-a_z, a_x); the planar cross product with a unit rate about +y.
template <typename Scalar>
Vector2<Scalar> perp(const Vector2<Scalar>& a) {
  return Vector2<Scalar>(-a.y(), a.x());
}

template <typename Scalar>
struct PointKinematics {
  Vector2<Scalar> position;
  MatrixX<Scalar> jacobian;  // 2 x nv, w.r.t. generalized velocities
  Vector2<Scalar> bias;      // Jdot * v
};

/// Kinematics of the point at distance `along` from the proximal joint of
/// `segment` (0 thigh, 1 shank) on `leg`.
template <typename Scalar>
PointKinematics<Scalar> point_kinematics(const RobotModel& model, const VectorX<Scalar>& q,
                                         const VectorX<Scalar>& v, int leg, int segment,
                                         double along) {
  using std::cos;
  using std::sin;
  const int nv = model.nv();
  const int j0 = RobotModel::base_dof + 2 * leg;
  const LegParams& params = model.legs[static_cast<std::size_t>(leg)];

  const Scalar theta = q(2);
  const Scalar omega = v(2);
  const Matrix2<Scalar> R = rotation(theta);
  const Vector2<Scalar> hip = R * params.hip_offset.template cast<Scalar>();
  const Vector2<Scalar> v_lin(v(0), v(1));

  PointKinematics<Scalar> out;
  out.position = Vector2<Scalar>(q(0), q(1)) + hip;
  out.jacobian = MatrixX<Scalar>::Zero(2, nv);
  out.jacobian.template leftCols<2>() = R;
  out.jacobian.col(2) = perp(hip);
  out.bias = omega * perp<Scalar>(R * v_lin) - omega * omega * hip;

  Scalar phi = theta;
  Scalar phi_dot = omega;
  for (int s = 0; s <= segment; ++s) {
    phi += q(j0 + s);
    phi_dot += v(j0 + s);
    const double len = s < segment ? params.length(s) : along;
    const Vector2<Scalar> dir(sin(phi), -cos(phi));
    const Vector2<Scalar> dir_rate(cos(phi), sin(phi));
    out.position += len * dir;
    out.jacobian.col(2) += len * dir_rate;
    for (int i = 0; i <= s; ++i) out.jacobian.col(j0 + i) += len * dir_rate;
    out.bias -= (len * phi_dot * phi_dot) * dir;
  }
  return out;
}

template <typename Scalar>
PointKinematics<Scalar> foot_kinematics(const RobotModel& model, const VectorX<Scalar>& q,
                                        const VectorX<Scalar>& v, int leg) {
  const auto& params = model.legs[static_cast<std::size_t>(leg)];
  return point_kinematics(model, q, v, leg, 1, params.shank_length);
}

/// Calls fn(mass, inertia, kinematics, angular_jacobian_row) for every rigid body.
template <typename Scalar, typename Fn>
void for_each_body(const RobotModel& model, const VectorX<Scalar>& q, const VectorX<Scalar>& v,
                   Fn&& fn) {
  const int nv = model.nv();
  const Matrix2<Scalar> R = rotation<Scalar>(q(2));
  PointKinematics<Scalar> base;
  base.position = Vector2<Scalar>(q(0), q(1));
  base.jacobian = MatrixX<Scalar>::Zero(2, nv);
  base.jacobian.template leftCols<2>() = R;
  base.bias = v(2) * perp<Scalar>(R * Vector2<Scalar>(v(0), v(1)));
  Eigen::RowVectorXd ang = Eigen::RowVectorXd::Zero(nv);
  ang(2) = 1.0;
  fn(model.base_mass, model.base_inertia, base, ang);

  for (int leg = 0; leg < model.n_ee(); ++leg) {
    const auto& params = model.legs[static_cast<std::size_t>(leg)];
    const int j0 = RobotModel::base_dof + 2 * leg;
    for (int s = 0; s < 2; ++s) {
      auto kin = point_kinematics(model, q, v, leg, s, params.com(s) * params.length(s));
      ang(j0 + s) = 1.0;
      fn(params.mass(s), params.inertia(s), kin, ang);
    }
    ang(j0) = 0.0;
    ang(j0 + 1) = 0.0;
  }
}

/// Mass matrix, Coriolis/centripetal bias and gravity vector in generalized velocity coordinates.
template <typename Scalar>
RbdTerms<Scalar> rbd_terms(const RobotModel& model, const VectorX<Scalar>& q,
                           const VectorX<Scalar>& v) {
  const int nv = model.nv();
  RbdTerms<Scalar> out;
  out.M = MatrixX<Scalar>::Zero(nv, nv);
  out.C = VectorX<Scalar>::Zero(nv);
  out.G = VectorX<Scalar>::Zero(nv);
  const Vector2<Scalar> g(Scalar(0), Scalar(model.gravity));
  for_each_body(model, q, v,
                [&](double m, double inertia, const PointKinematics<Scalar>& kin,
                    const Eigen::RowVectorXd& ang) {
                  out.M.noalias() += m * kin.jacobian.transpose() * kin.jacobian;
                  out.M += inertia * (ang.transpose() * ang).template cast<Scalar>();
                  out.C.noalias() += m * kin.jacobian.transpose() * kin.bias;
                  out.G.noalias() += m * kin.jacobian.transpose() * g;
                });
  return out;
}

/// M a + C + G - tau_gen. Zero exactly when `a` is the forward-dynamics acceleration
/// under the total generalized force `tau_gen`. Costs O(bodies * nv), no mass matrix assembly.
template <typename Scalar>
VectorX<Scalar> inverse_dynamics(const RobotModel& model, const VectorX<Scalar>& q,
                                 const VectorX<Scalar>& v, const VectorX<Scalar>& a,
                                 const VectorX<Scalar>& tau_gen) {
  VectorX<Scalar> out = -tau_gen;
  const Vector2<Scalar> g(Scalar(0), Scalar(model.gravity));
  for_each_body(model, q, v,
                [&](double m, double inertia, const PointKinematics<Scalar>& kin,
                    const Eigen::RowVectorXd& ang) {
                  const Vector2<Scalar> acc = kin.jacobian * a + kin.bias + g;
                  out.noalias() += m * kin.jacobian.transpose() * acc;
                  Scalar ang_acc = Scalar(0);
                  for (int i = 0; i < ang.size(); ++i)
                    if (ang(i) != 0.0) ang_acc += a(i);
                  const Scalar torque = inertia * ang_acc;
                  for (int i = 0; i < ang.size(); ++i)
                    if (ang(i) != 0.0) out(i) += torque;
                });
  return out;
}

/// S^T tau: joint torques placed on the actuated coordinates.
template <typename Scalar>
VectorX<Scalar> actuation(const RobotModel& model, const VectorX<Scalar>& tau) {
  VectorX<Scalar> out = VectorX<Scalar>::Zero(model.nv());
  out.tail(model.nu()) = tau;
  return out;
}

/// Maps the generalized velocity to the coordinate rate: rotation on the base
/// linear block, identity elsewhere. nq x nv.
MatrixXd world_local_transform(const RobotModel& model, double pitch);

RbdTerms<double> rbd_terms(const RobotModel& model, const RobotState& x);

/// Full state derivative [T_WL v; M^-1 (S^T tau + lambda_gen - C - G)] for the packed state.
/// Throws FactorizationFailure if M is not SPD.
VectorXd forward_dynamics(const RobotModel& model, const VectorXd& x, const VectorXd& tau,
                          const VectorXd& lambda_gen);
VectorXd forward_dynamics(const RobotModel& model, const RobotState& x, const ControlInput& u,
                          const VectorXd& lambda_gen);

/// Generalized acceleration only.
VectorXd forward_acceleration(const RobotModel& model, const VectorXd& q, const VectorXd& v,
                              const VectorXd& generalized_force);

EndEffectorState end_effector_state(const RobotModel& model, const VectorXd& x, int ee_index);

double kinetic_energy(const RobotModel& model, const VectorXd& q, const VectorXd& v);
double potential_energy(const RobotModel& model, const VectorXd& q);

/// Center of mass of every rigid body, in for_each_body order, with absolute body angles.
struct BodyPose {
  Vector2d com;
  double angle;
  double mass;
  double inertia;
};
std::vector<BodyPose> body_poses(const RobotModel& model, const VectorXd& q);

}  // namespace wbmpc
