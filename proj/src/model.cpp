#include "wbmpc/model.hpp"

#include <Eigen/Cholesky>

namespace wbmpc {

double RobotModel::total_mass() const {
  double m = base_mass;
  for (const auto& leg : legs) m += leg.thigh_mass + leg.shank_mass;
  return m;
}

RobotModel make_hopper() {
  RobotModel m;
  m.name = "hopper";
  m.base_mass = 4.0;
  m.base_inertia = 0.06;
  LegParams leg;
  leg.hip_offset = Vector2d(0.0, -0.05);
  leg.thigh_length = 0.3;
  leg.shank_length = 0.3;
  leg.thigh_mass = 1.0;
  leg.shank_mass = 0.5;
  leg.thigh_inertia = 1.0 * 0.3 * 0.3 / 12.0;
  leg.shank_inertia = 0.5 * 0.3 * 0.3 / 12.0;
  m.legs = {leg};
  m.joint_limits = {Vector2d(-1.5, 1.5), Vector2d(-2.6, 0.0)};
  return m;
}

RobotModel make_planar_quadruped() {
  RobotModel m;
  m.name = "planar_quadruped";
  m.base_mass = 22.0;
  m.base_inertia = 22.0 * (0.7 * 0.7 + 0.15 * 0.15) / 12.0;
  LegParams front;
  front.hip_offset = Vector2d(0.3, 0.0);
  front.thigh_inertia = front.thigh_mass * 0.35 * 0.35 / 12.0;
  front.shank_inertia = front.shank_mass * 0.35 * 0.35 / 12.0;
  LegParams hind = front;
  hind.hip_offset = Vector2d(-0.3, 0.0);
  m.legs = {front, hind};
  m.joint_limits = {Vector2d(-1.5, 1.5), Vector2d(-2.6, 0.0), Vector2d(-1.5, 1.5),
                    Vector2d(-2.6, 0.0)};
  return m;
}

void validate(const RobotModel& model) {
  if (model.legs.empty()) throw Error("model '" + model.name + "' has no legs");
  if (!(model.base_mass > 0) || !(model.base_inertia > 0))
    throw Error("model '" + model.name + "': base mass and inertia must be positive");
  for (const auto& leg : model.legs) {
    for (int s = 0; s < 2; ++s) {
      if (!(leg.mass(s) > 0) || !(leg.inertia(s) > 0) || !(leg.length(s) > 0))
        throw Error("model '" + model.name + "': segment mass/inertia/length must be positive");
    }
  }
  if (!(model.gravity >= 0)) throw Error("gravity must be non-negative");
}

RobotModel scaled(const RobotModel& model, double mass_scale, double inertia_scale) {
  RobotModel out = model;
  out.base_mass *= mass_scale;
  out.base_inertia *= inertia_scale;
  for (auto& leg : out.legs) {
    leg.thigh_mass *= mass_scale;
    leg.shank_mass *= mass_scale;
    leg.thigh_inertia *= inertia_scale;
    leg.shank_inertia *= inertia_scale;
  }
  return out;
}

VectorXd RobotState::pack() const {
  const auto nj = joint_positions.size();
  VectorXd x(6 + 2 * nj);
  x << base_pose, joint_positions, base_twist, joint_velocities;
  return x;
}

RobotState RobotState::unpack(const VectorXd& x, int n_joints) {
  if (x.size() != 6 + 2 * n_joints) throw DimensionMismatch("RobotState::unpack: wrong size");
  RobotState s;
  const int nq = 3 + n_joints;
  s.base_pose = x.head<3>();
  s.joint_positions = x.segment(3, n_joints);
  s.base_twist = x.segment<3>(nq);
  s.joint_velocities = x.segment(nq + 3, n_joints);
  return s;
}

MatrixXd world_local_transform(const RobotModel& model, double pitch) {
  MatrixXd T = MatrixXd::Identity(model.nq(), model.nv());
  T.topLeftCorner<2, 2>() = rotation(pitch);
  return T;
}

RbdTerms<double> rbd_terms(const RobotModel& model, const RobotState& x) {
  const VectorXd packed = x.pack();
  return rbd_terms<double>(model, packed.head(model.nq()), packed.tail(model.nv()));
}

VectorXd forward_acceleration(const RobotModel& model, const VectorXd& q, const VectorXd& v,
                              const VectorXd& generalized_force) {
  const auto terms = rbd_terms<double>(model, q, v);
  Eigen::LLT<MatrixXd> llt(terms.M);
  if (llt.info() != Eigen::Success)
    throw FactorizationFailure("mass matrix is not positive definite");
  return llt.solve(generalized_force - terms.C - terms.G);
}

VectorXd forward_dynamics(const RobotModel& model, const VectorXd& x, const VectorXd& tau,
                          const VectorXd& lambda_gen) {
  const int nq = model.nq();
  const int nv = model.nv();
  if (x.size() != nq + nv || tau.size() != model.nu() || lambda_gen.size() != nv)
    throw DimensionMismatch("forward_dynamics: dimension mismatch");
  const VectorXd q = x.head(nq);
  const VectorXd v = x.tail(nv);
  VectorXd xdot(nq + nv);
  xdot.head(nq) = world_local_transform(model, q(2)) * v;
  xdot.tail(nv) = forward_acceleration(model, q, v, actuation<double>(model, tau) + lambda_gen);
  return xdot;
}

VectorXd forward_dynamics(const RobotModel& model, const RobotState& x, const ControlInput& u,
                          const VectorXd& lambda_gen) {
  return forward_dynamics(model, x.pack(), u.joint_torques, lambda_gen);
}

EndEffectorState end_effector_state(const RobotModel& model, const VectorXd& x, int ee_index) {
  if (ee_index < 0 || ee_index >= model.n_ee())
    throw IndexOutOfRange("end-effector index " + std::to_string(ee_index) + " out of range");
  const VectorXd q = x.head(model.nq());
  const VectorXd v = x.tail(model.nv());
  const auto kin = foot_kinematics<double>(model, q, v, ee_index);
  EndEffectorState out;
  out.position = kin.position;
  out.velocity = kin.jacobian * v;
  out.velocity_jacobian = kin.jacobian;
  // q_dot = T v with T block-diagonal and orthonormal on the linear block.
  MatrixXd T_inv = world_local_transform(model, q(2));
  T_inv.topLeftCorner<2, 2>().transposeInPlace();
  out.position_jacobian = kin.jacobian * T_inv;
  return out;
}

double kinetic_energy(const RobotModel& model, const VectorXd& q, const VectorXd& v) {
  const auto terms = rbd_terms<double>(model, q, v);
  return 0.5 * v.dot(terms.M * v);
}

double potential_energy(const RobotModel& model, const VectorXd& q) {
  double V = 0.0;
  for (const auto& body : body_poses(model, q)) V += body.mass * model.gravity * body.com.y();
  return V;
}

std::vector<BodyPose> body_poses(const RobotModel& model, const VectorXd& q) {
  std::vector<BodyPose> out;
  const VectorXd v = VectorXd::Zero(model.nv());
  out.push_back({q.head<2>(), q(2), model.base_mass, model.base_inertia});
  for (int leg = 0; leg < model.n_ee(); ++leg) {
    const auto& p = model.legs[static_cast<std::size_t>(leg)];
    double angle = q(2);
    for (int s = 0; s < 2; ++s) {
      angle += q(RobotModel::base_dof + 2 * leg + s);
      const auto kin = point_kinematics<double>(model, q, v, leg, s, p.com(s) * p.length(s));
      out.push_back({kin.position, angle, p.mass(s), p.inertia(s)});
    }
  }
  return out;
}

}  // namespace wbmpc
