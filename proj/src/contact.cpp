#include "wbmpc/contact.hpp"

#include <cmath>

namespace wbmpc {

void validate(const ContactParams& p) {
  if (!(p.k > 0) || !(p.d > 0) || !(p.alpha_k > 0) || !(p.alpha_d > 0))
    throw Error("contact parameters k, d, alpha_k, alpha_d must all be positive");
}

GroundPlane GroundPlane::inclined(double height, double angle) {
  GroundPlane g;
  g.height = height;
  g.normal = Vector2d(-std::sin(angle), std::cos(angle));
  return g;
}

Matrix2d GroundPlane::contact_to_world() const {
  Matrix2d R;
  R.col(0) = Vector2d(normal.y(), -normal.x());
  R.col(1) = normal;
  return R;
}

ContactForce contact_force_contact_frame(const ContactParams& params, double p_z,
                                         const Vector2d& pdot) {
  return {contact_force<double>(params, p_z, pdot), ContactForce::Frame::contact};
}

ContactForce contact_force_body_frame(const GroundPlane& ground, const ContactForce& force) {
  if (force.frame == ContactForce::Frame::world) return force;
  return {ground.contact_to_world() * force.force, ContactForce::Frame::world};
}

ContactForce contact_force_contact_frame(const GroundPlane& ground, const ContactForce& force) {
  if (force.frame == ContactForce::Frame::contact) return force;
  return {ground.contact_to_world().transpose() * force.force, ContactForce::Frame::contact};
}

VectorXd generalized_contact_forces(const RobotModel& model, const ContactParams& params,
                                    const GroundPlane& ground, const VectorXd& x) {
  const VectorXd q = x.head(model.nq());
  const VectorXd v = x.tail(model.nv());
  return generalized_contact_forces<double>(model, params, std::span(&ground, 1), q, v);
}

GroundPlane estimate_ground(std::span<const Vector2d> feet, std::span<const bool> stance,
                            GroundFit fit) {
  if (feet.size() != stance.size()) throw DimensionMismatch("estimate_ground: size mismatch");
  std::vector<Vector2d> pts;
  for (std::size_t i = 0; i < feet.size(); ++i)
    if (stance[i]) pts.push_back(feet[i]);
  if (pts.empty()) throw NoStanceFeet("no foot is in stance");

  double mean_x = 0.0;
  double mean_z = 0.0;
  for (const auto& p : pts) {
    mean_x += p.x();
    mean_z += p.y();
  }
  mean_x /= static_cast<double>(pts.size());
  mean_z /= static_cast<double>(pts.size());

  double sxx = 0.0;
  double sxz = 0.0;
  for (const auto& p : pts) {
    sxx += (p.x() - mean_x) * (p.x() - mean_x);
    sxz += (p.x() - mean_x) * (p.y() - mean_z);
  }
  GroundPlane g;
  if (fit == GroundFit::mean_height || pts.size() < 2 || sxx < 1e-12) {
    g.height = mean_z;
    return g;
  }
  const double slope = sxz / sxx;
  g = GroundPlane::inclined(mean_z - slope * mean_x, std::atan(slope));
  return g;
}

StaticStance static_equilibrium(const RobotModel& model, const ContactParams& params,
                                const GroundPlane& ground, const VectorXd& joints,
                                double base_x) {
  const int nq = model.nq();
  const int nv = model.nv();
  if (joints.size() != model.nu()) throw DimensionMismatch("static_equilibrium: joints size");
  VectorXd q = VectorXd::Zero(nq);
  q(0) = base_x;
  q.tail(model.nu()) = joints;
  const VectorXd v = VectorXd::Zero(nv);

  // Start with the lowest foot touching the ground.
  double lowest = 0.0;
  for (int i = 0; i < model.n_ee(); ++i)
    lowest = std::min(lowest, foot_kinematics<double>(model, q, v, i).position.y());
  q(1) = ground.height_at(base_x) - lowest;

  const auto grounds = std::span(&ground, 1);
  auto residual = [&](const VectorXd& qq) {
    const auto terms = rbd_terms<double>(model, qq, v);
    const VectorXd net = terms.G - generalized_contact_forces<double>(model, params, grounds, qq, v);
    return Vector2d(net(1), net(2));
  };

  for (int it = 0; it < 100; ++it) {
    const Vector2d r = residual(q);
    if (r.norm() < 1e-10 * model.total_mass() * model.gravity) break;
    Matrix2d J;
    for (int c = 0; c < 2; ++c) {
      const double eps = 1e-7;
      VectorXd qp = q;
      VectorXd qm = q;
      qp(1 + c) += eps;
      qm(1 + c) -= eps;
      J.col(c) = (residual(qp) - residual(qm)) / (2 * eps);
    }
    Vector2d step = J.fullPivLu().solve(-r);
    // Keep the Newton step inside the exponential's well-scaled region.
    const double max_step = 0.5 / params.alpha_k;
    if (std::abs(step(0)) > max_step) step *= max_step / std::abs(step(0));
    q(1) += step(0);
    q(2) += step(1);
  }

  const auto terms = rbd_terms<double>(model, q, v);
  const VectorXd net = terms.G - generalized_contact_forces<double>(model, params, grounds, q, v);
  StaticStance out;
  out.state = VectorXd::Zero(nq + nv);
  out.state.head(nq) = q;
  out.torques = net.tail(model.nu());
  return out;
}

}  // namespace wbmpc
