#include "wbmpc/dynamics.hpp"

#include <Eigen/Cholesky>
#include <unsupported/Eigen/AutoDiff>

namespace wbmpc {

namespace {

// Fixed-capacity derivative storage keeps the AD scalars off the heap.
constexpr int kMaxDerivatives = 32;
using DerivativeVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDerivatives, 1>;
using AD = Eigen::AutoDiffScalar<DerivativeVector>;

}  // namespace

VectorXd SecondOrderSystem::flow(const VectorXd& x, const VectorXd& u) const {
  const VectorXd q = x.head(nq());
  const VectorXd v = x.tail(nv());
  VectorXd out(nx());
  out << position_rate(q, v), acceleration(q, v, u);
  return out;
}

ContinuousJacobians dynamics_jacobians(const SecondOrderSystem& system, const VectorXd& x,
                                       const VectorXd& u) {
  const int nq = system.nq();
  const int nv = system.nv();
  const VectorXd q = x.head(nq);
  const VectorXd v = x.tail(nv);
  const auto pos = system.linearize_position_rate(q, v);
  const auto acc = system.linearize_acceleration(q, v, u);
  ContinuousJacobians out;
  out.dfdx.resize(nq + nv, nq + nv);
  out.dfdx << pos.dq, pos.dv, acc.da_dq, acc.da_dv;
  out.dfdu = MatrixXd::Zero(nq + nv, system.nu());
  out.dfdu.bottomRows(nv) = acc.da_du;
  return out;
}

RobotDynamics::RobotDynamics(std::shared_ptr<const RobotModel> model, ContactParams contact,
                             std::vector<GroundPlane> grounds, Vector2d base_force)
    : model_(std::move(model)),
      contact_(contact),
      grounds_(std::move(grounds)),
      base_force_(base_force) {
  validate(*model_);
  validate(contact_);
  if (grounds_.size() != 1 && grounds_.size() != static_cast<std::size_t>(model_->n_ee()))
    throw DimensionMismatch("RobotDynamics: need one ground plane or one per foot");
  if (model_->nx() > kMaxDerivatives) throw DimensionMismatch("RobotDynamics: model too large");
}

template <typename Scalar>
VectorX<Scalar> RobotDynamics::external_force(const VectorX<Scalar>& q,
                                              const VectorX<Scalar>& v) const {
  VectorX<Scalar> f = generalized_contact_forces<Scalar>(*model_, contact_, grounds_, q, v);
  if (!base_force_.isZero()) {
    const Matrix2<Scalar> R = rotation<Scalar>(q(2));
    f.template head<2>() += R.transpose() * base_force_.template cast<Scalar>();
  }
  return f;
}

VectorXd RobotDynamics::generalized_force(const VectorXd& q, const VectorXd& v,
                                          const VectorXd& u) const {
  return actuation<double>(*model_, u) + external_force<double>(q, v);
}

VectorXd RobotDynamics::position_rate(const VectorXd& q, const VectorXd& v) const {
  VectorXd rate = v;
  rate.head<2>() = rotation(q(2)) * v.head<2>();
  return rate;
}

VectorXd RobotDynamics::acceleration(const VectorXd& q, const VectorXd& v,
                                     const VectorXd& u) const {
  return forward_acceleration(*model_, q, v, generalized_force(q, v, u));
}

PositionRateLinearization RobotDynamics::linearize_position_rate(const VectorXd& q,
                                                                 const VectorXd& v) const {
  PositionRateLinearization out;
  out.rate = position_rate(q, v);
  out.dq = MatrixXd::Zero(nq(), nq());
  out.dq.col(2).head<2>() = perp<double>(rotation(q(2)) * v.head<2>());
  out.dv = world_local_transform(*model_, q(2));
  return out;
}

AccelerationLinearization RobotDynamics::linearize_acceleration(const VectorXd& q,
                                                                const VectorXd& v,
                                                                const VectorXd& u) const {
  const int nq_ = nq();
  const int nv_ = nv();
  const int nx_ = nq_ + nv_;

  const auto terms = rbd_terms<double>(*model_, q, v);
  Eigen::LLT<MatrixXd> llt(terms.M);
  if (llt.info() != Eigen::Success)
    throw FactorizationFailure("mass matrix is not positive definite");

  AccelerationLinearization out;
  out.acceleration = llt.solve(generalized_force(q, v, u) - terms.C - terms.G);

  // Differentiate the inverse-dynamics residual at the fixed acceleration:
  // d a / d(q, v) = -M^-1 d ID / d(q, v).
  VectorX<AD> q_ad(nq_);
  VectorX<AD> v_ad(nv_);
  for (int i = 0; i < nq_; ++i) q_ad(i) = AD(q(i), nx_, i);
  for (int i = 0; i < nv_; ++i) v_ad(i) = AD(v(i), nx_, nq_ + i);
  // Constants carry explicit zero derivatives: Eigen's AutoDiff cannot make an empty
  // derivative expression coherent with a sized one and silently drops derivatives.
  const DerivativeVector zero = DerivativeVector::Zero(nx_);
  VectorX<AD> a_ad(nv_);
  for (int i = 0; i < nv_; ++i) a_ad(i) = AD(out.acceleration(i), zero);
  VectorX<AD> tau_ad = external_force<AD>(q_ad, v_ad);
  for (int i = 0; i < nu(); ++i) tau_ad(nv_ - nu() + i) += AD(u(i), zero);
  const VectorX<AD> residual = inverse_dynamics<AD>(*model_, q_ad, v_ad, a_ad, tau_ad);

  MatrixXd d_residual(nv_, nx_);
  for (int r = 0; r < nv_; ++r) {
    const auto& der = residual(r).derivatives();
    if (der.size() == 0)
      d_residual.row(r).setZero();
    else
      d_residual.row(r) = der.transpose();
  }
  out.da_dq = -llt.solve(d_residual.leftCols(nq_));
  out.da_dv = -llt.solve(d_residual.rightCols(nv_));
  MatrixXd S_T = MatrixXd::Zero(nv_, nu());
  S_T.bottomRows(nu()).setIdentity();
  out.da_du = llt.solve(S_T);
  return out;
}

std::vector<Vector2d> RobotDynamics::foot_forces(const VectorXd& x) const {
  const VectorXd q = x.head(nq());
  const VectorXd v = x.tail(nv());
  return wbmpc::foot_forces<double>(*model_, contact_, grounds_, q, v);
}

VectorXd RobotDynamics::normal_forces(const VectorXd& x) const {
  const auto forces = foot_forces(x);
  VectorXd out(model_->n_ee());
  for (int i = 0; i < model_->n_ee(); ++i) {
    const auto& g = grounds_[grounds_.size() == 1 ? 0 : static_cast<std::size_t>(i)];
    out(i) = g.normal.dot(forces[static_cast<std::size_t>(i)]);
  }
  return out;
}

double RobotDynamics::total_energy(const VectorXd& x) const {
  const VectorXd q = x.head(nq());
  const VectorXd v = x.tail(nv());
  return kinetic_energy(*model_, q, v) + potential_energy(*model_, q);
}

LinearSecondOrderSystem::LinearSecondOrderSystem(MatrixXd Kq, MatrixXd Kv, MatrixXd Bu,
                                                 VectorXd offset)
    : Kq_(std::move(Kq)), Kv_(std::move(Kv)), Bu_(std::move(Bu)), offset_(std::move(offset)) {
  const auto n = Kq_.rows();
  if (Kq_.cols() != n || Kv_.rows() != n || Kv_.cols() != n || Bu_.rows() != n ||
      offset_.size() != n)
    throw DimensionMismatch("LinearSecondOrderSystem: inconsistent dimensions");
}

LinearSecondOrderSystem LinearSecondOrderSystem::point_mass(int dims, double mass) {
  return LinearSecondOrderSystem(MatrixXd::Zero(dims, dims), MatrixXd::Zero(dims, dims),
                                 MatrixXd::Identity(dims, dims) / mass, VectorXd::Zero(dims));
}

VectorXd LinearSecondOrderSystem::position_rate(const VectorXd&, const VectorXd& v) const {
  return v;
}

VectorXd LinearSecondOrderSystem::acceleration(const VectorXd& q, const VectorXd& v,
                                               const VectorXd& u) const {
  return Kq_ * q + Kv_ * v + Bu_ * u + offset_;
}

PositionRateLinearization LinearSecondOrderSystem::linearize_position_rate(
    const VectorXd& q, const VectorXd& v) const {
  return {position_rate(q, v), MatrixXd::Zero(nq(), nq()), MatrixXd::Identity(nq(), nv())};
}

AccelerationLinearization LinearSecondOrderSystem::linearize_acceleration(
    const VectorXd& q, const VectorXd& v, const VectorXd& u) const {
  return {acceleration(q, v, u), Kq_, Kv_, Bu_};
}

}  // namespace wbmpc
