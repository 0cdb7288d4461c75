#pragma once

#include "wbmpc/errors.hpp"
#include "wbmpc/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace wbmpc {

/// (x - x_ref)^T diag(W_x) (x - x_ref) + (u - u_ref)^T diag(W_u) (u - u_ref). No 1/2 factor.
struct QuadraticTerm {
  VectorXd state_weights;
  VectorXd control_weights;  // empty for final terms
  VectorXd x_ref;
  VectorXd u_ref;
};

/// Quadratic penalty on a subset of state coordinates, switched on inside
/// [t_start, t_end) and, if periodic, repeated every `period` seconds.
struct TemporalActivation {
  std::string name;
  double t_start = 0.0;
  double t_end = 0.0;
  std::optional<double> period;
  std::vector<int> state_indices;
  VectorXd target;
  VectorXd weights;
};

struct CostFunction {
  std::vector<QuadraticTerm> running;
  std::vector<TemporalActivation> temporal;
  QuadraticTerm final_term;
};

/// Second-order expansion of a stage cost about (x, u):
/// L(x + dx, u + du) = constant + q.dx + r.du + 1/2 dx'Q dx + 1/2 du'R du + du'P dx.
struct StageQuadratization {
  double constant = 0.0;
  VectorXd q;
  MatrixXd Q;
  VectorXd r;
  MatrixXd R;
  MatrixXd P;  // nu x nx cross term
};

void validate(const CostFunction& cost, int nx, int nu);
void validate(const TemporalActivation& term);

bool activation(const TemporalActivation& term, double t);

double stage_cost(const CostFunction& cost, const VectorXd& x, const VectorXd& u, double t);
double final_cost(const CostFunction& cost, const VectorXd& x);

/// h(x_N) + sum_n L(x_n, u_n, t0 + n dt) dt.
double evaluate(const CostFunction& cost, const StateTrajectory& X, const ControlTrajectory& U,
                double dt, double t0 = 0.0);

/// Exact expansion of the running cost at time t (not scaled by dt).
StageQuadratization quadratize(const CostFunction& cost, const VectorXd& x, const VectorXd& u,
                               double t);
/// Expansion of the final cost; control parts are empty.
StageQuadratization quadratize_final(const CostFunction& cost, const VectorXd& x);

}  // namespace wbmpc
