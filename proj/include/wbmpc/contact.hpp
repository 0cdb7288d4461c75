#pragma once

#include "wbmpc/model.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace wbmpc {

/// Exponential spring / sigmoid-gated damper contact model.
struct ContactParams {
  double k = 100.0;        // N
  double d = 500.0;        // N s / m
  double alpha_k = 100.0;  // 1 / m
  double alpha_d = 500.0;  // 1 / m
};

void validate(const ContactParams& params);

/// Ground line through (0, height) with unit normal `normal`.
struct GroundPlane {
  double height = 0.0;
  Vector2d normal = Vector2d(0.0, 1.0);

  static GroundPlane inclined(double height, double angle);

  double height_at(double x) const { return height - normal.x() * x / normal.y(); }
  /// Columns are the contact-frame tangent and normal expressed in world.
  Matrix2d contact_to_world() const;
};

struct ContactForce {
  enum class Frame { contact, world };
  Vector2d force = Vector2d::Zero();  // (tangential, normal) in contact frame, (x, z) in world
  Frame frame = Frame::contact;
};

template <typename Scalar>
Scalar sigmoid(const Scalar& s) {
  using std::exp;
  return Scalar(1) / (Scalar(1) + exp(-s));
}

/// Signed penetration of a world point: positive below the surface, negative above.
template <typename Scalar>
Scalar penetration(const GroundPlane& ground, const Vector2<Scalar>& p) {
  return -(ground.normal.x() * p.x() + ground.normal.y() * (p.y() - ground.height));
}

/// Contact-frame force (tangential, normal). The spring pushes out of the ground with
/// magnitude k exp(alpha_k p_z); the damper opposes the foot velocity in both directions.
template <typename Scalar>
Vector2<Scalar> contact_force(const ContactParams& params, const Scalar& p_z,
                              const Vector2<Scalar>& pdot) {
  using std::exp;
  const Scalar spring = params.k * exp(params.alpha_k * p_z);
  const Scalar damping = params.d * sigmoid<Scalar>(params.alpha_d * p_z);
  return Vector2<Scalar>(-damping * pdot.x(), spring - damping * pdot.y());
}

/// World-frame force on each foot.
template <typename Scalar>
std::vector<Vector2<Scalar>> foot_forces(const RobotModel& model, const ContactParams& params,
                                         std::span<const GroundPlane> grounds,
                                         const VectorX<Scalar>& q, const VectorX<Scalar>& v) {
  std::vector<Vector2<Scalar>> out;
  out.reserve(static_cast<std::size_t>(model.n_ee()));
  for (int i = 0; i < model.n_ee(); ++i) {
    const GroundPlane& ground = grounds[grounds.size() == 1 ? 0 : static_cast<std::size_t>(i)];
    const auto kin = foot_kinematics(model, q, v, i);
    const Matrix2<Scalar> R_wc = ground.contact_to_world().template cast<Scalar>();
    const Vector2<Scalar> vel_c = R_wc.transpose() * (kin.jacobian * v);
    const Scalar p_z = penetration(ground, kin.position);
    out.push_back(R_wc * contact_force(params, p_z, vel_c));
  }
  return out;
}

/// Sum over feet of J_c^T lambda. `grounds` holds one plane shared by all feet or one per foot.
template <typename Scalar>
VectorX<Scalar> generalized_contact_forces(const RobotModel& model, const ContactParams& params,
                                           std::span<const GroundPlane> grounds,
                                           const VectorX<Scalar>& q, const VectorX<Scalar>& v) {
  VectorX<Scalar> out = VectorX<Scalar>::Zero(model.nv());
  for (int i = 0; i < model.n_ee(); ++i) {
    const GroundPlane& ground = grounds[grounds.size() == 1 ? 0 : static_cast<std::size_t>(i)];
    const auto kin = foot_kinematics(model, q, v, i);
    const Matrix2<Scalar> R_wc = ground.contact_to_world().template cast<Scalar>();
    const Vector2<Scalar> vel_c = R_wc.transpose() * (kin.jacobian * v);
    const Scalar p_z = penetration(ground, kin.position);
    const Vector2<Scalar> f_world = R_wc * contact_force(params, p_z, vel_c);
    out.noalias() += kin.jacobian.transpose() * f_world;
  }
  return out;
}

ContactForce contact_force_contact_frame(const ContactParams& params, double p_z,
                                         const Vector2d& pdot);

/// Rotates a contact-frame force into the world frame (and a world force back).
ContactForce contact_force_body_frame(const GroundPlane& ground, const ContactForce& force);
ContactForce contact_force_contact_frame(const GroundPlane& ground, const ContactForce& force);

VectorXd generalized_contact_forces(const RobotModel& model, const ContactParams& params,
                                    const GroundPlane& ground, const VectorXd& x);

enum class GroundFit { mean_height, line };

/// Fits the ground through the stance feet. Throws NoStanceFeet when none is in stance.
GroundPlane estimate_ground(std::span<const Vector2d> feet, std::span<const bool> stance,
                            GroundFit fit = GroundFit::line);

struct StaticStance {
  VectorXd state;    // packed, zero velocity
  VectorXd torques;  // joint torques holding the stance
};

/// Finds base height and pitch for which the given joint configuration is in static
/// equilibrium on the contact model, plus the holding torques.
StaticStance static_equilibrium(const RobotModel& model, const ContactParams& params,
                                const GroundPlane& ground, const VectorXd& joints,
                                double base_x = 0.0);

}  // namespace wbmpc
