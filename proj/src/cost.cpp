#include "wbmpc/cost.hpp"

#include <cmath>

namespace wbmpc {

void validate(const TemporalActivation& term) {
  if (!(term.t_start < term.t_end))
    throw Error("temporal term '" + term.name + "': t_start must be < t_end");
  if (term.period && !(term.t_end - term.t_start < *term.period))
    throw Error("temporal term '" + term.name + "': window must be shorter than the period");
  if (term.target.size() != static_cast<Eigen::Index>(term.state_indices.size()) ||
      term.weights.size() != term.target.size())
    throw DimensionMismatch("temporal term '" + term.name + "': indices/target/weights sizes");
  if ((term.weights.array() < 0).any())
    throw Error("temporal term '" + term.name + "': weights must be non-negative");
}

void validate(const CostFunction& cost, int nx, int nu) {
  auto check = [&](const QuadraticTerm& t, bool with_control, const std::string& what) {
    if (t.state_weights.size() != nx || t.x_ref.size() != nx)
      throw DimensionMismatch(what + ": state weight/reference size must be " + std::to_string(nx));
    if ((t.state_weights.array() < 0).any()) throw Error(what + ": negative state weight");
    if (with_control) {
      if (t.control_weights.size() != nu || t.u_ref.size() != nu)
        throw DimensionMismatch(what + ": control weight/reference size must be " +
                                std::to_string(nu));
      if ((t.control_weights.array() < 0).any()) throw Error(what + ": negative control weight");
    }
  };
  for (const auto& t : cost.running) check(t, true, "running term");
  check(cost.final_term, false, "final term");
  for (const auto& t : cost.temporal) {
    validate(t);
    for (int i : t.state_indices)
      if (i < 0 || i >= nx) throw IndexOutOfRange("temporal term '" + t.name + "': bad index");
  }
}

bool activation(const TemporalActivation& term, double t) {
  double local = t;
  if (term.period) {
    local = std::fmod(t, *term.period);
    if (local < 0) local += *term.period;
  }
  return local >= term.t_start && local < term.t_end;
}

namespace {

double quadratic(const VectorXd& w, const VectorXd& delta) {
  return (w.array() * delta.array().square()).sum();
}

}  // namespace

double stage_cost(const CostFunction& cost, const VectorXd& x, const VectorXd& u, double t) {
  double L = 0.0;
  for (const auto& term : cost.running) {
    L += quadratic(term.state_weights, x - term.x_ref);
    L += quadratic(term.control_weights, u - term.u_ref);
  }
  for (const auto& term : cost.temporal) {
    if (!activation(term, t)) continue;
    for (std::size_t i = 0; i < term.state_indices.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double e = x(term.state_indices[i]) - term.target(k);
      L += term.weights(k) * e * e;
    }
  }
  return L;
}

double final_cost(const CostFunction& cost, const VectorXd& x) {
  return quadratic(cost.final_term.state_weights, x - cost.final_term.x_ref);
}

double evaluate(const CostFunction& cost, const StateTrajectory& X, const ControlTrajectory& U,
                double dt, double t0) {
  if (X.size() != U.size() + 1) throw DimensionMismatch("evaluate: |X| must equal |U| + 1");
  double J = final_cost(cost, X.back());
  for (std::size_t n = 0; n < U.size(); ++n)
    J += stage_cost(cost, X[n], U[n], t0 + static_cast<double>(n) * dt) * dt;
  return J;
}

StageQuadratization quadratize(const CostFunction& cost, const VectorXd& x, const VectorXd& u,
                               double t) {
  const auto nx = x.size();
  const auto nu = u.size();
  StageQuadratization out;
  out.constant = stage_cost(cost, x, u, t);
  out.q = VectorXd::Zero(nx);
  out.r = VectorXd::Zero(nu);
  VectorXd Q_diag = VectorXd::Zero(nx);
  VectorXd R_diag = VectorXd::Zero(nu);
  for (const auto& term : cost.running) {
    out.q += 2.0 * term.state_weights.cwiseProduct(x - term.x_ref);
    out.r += 2.0 * term.control_weights.cwiseProduct(u - term.u_ref);
    Q_diag += 2.0 * term.state_weights;
    R_diag += 2.0 * term.control_weights;
  }
  for (const auto& term : cost.temporal) {
    if (!activation(term, t)) continue;
    for (std::size_t i = 0; i < term.state_indices.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const int idx = term.state_indices[i];
      out.q(idx) += 2.0 * term.weights(k) * (x(idx) - term.target(k));
      Q_diag(idx) += 2.0 * term.weights(k);
    }
  }
  out.Q = Q_diag.asDiagonal();
  out.R = R_diag.asDiagonal();
  out.P = MatrixXd::Zero(nu, nx);
  return out;
}

StageQuadratization quadratize_final(const CostFunction& cost, const VectorXd& x) {
  const auto& term = cost.final_term;
  StageQuadratization out;
  out.constant = final_cost(cost, x);
  out.q = 2.0 * term.state_weights.cwiseProduct(x - term.x_ref);
  out.Q = (2.0 * term.state_weights).asDiagonal();
  out.r.resize(0);
  out.R.resize(0, 0);
  out.P.resize(0, x.size());
  return out;
}

}  // namespace wbmpc
