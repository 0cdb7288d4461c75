#include "wbmpc/nloc.hpp"

#include <cmath>

namespace wbmpc {

std::string to_string(Algorithm algorithm) {
  return algorithm == Algorithm::ilqr ? "ilqr" : "gnms";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "ilqr") return Algorithm::ilqr;
  if (name == "gnms") return Algorithm::gnms;
  throw Error("unknown algorithm '" + name + "'");
}

void validate(const NlocSettings& s) {
  if (s.horizon < 1) throw Error("horizon must have at least one stage");
  if (!(s.control_dt > 0)) throw Error("control_dt must be positive");
  if (!(s.backtracking > 0 && s.backtracking < 1)) throw Error("backtracking factor must be in (0, 1)");
  if (s.max_line_search_steps < 1) throw Error("need at least one line-search step");
  s.integrator.substeps(s.control_dt);
}

double max_norm(const std::vector<VectorXd>& values) {
  double m = 0.0;
  for (const auto& v : values)
    if (v.size() > 0) m = std::max(m, v.lpNorm<Eigen::Infinity>());
  return m;
}

ConvergenceMetrics convergence_metrics(const NlocIterate& previous, const NlocIterate& next) {
  ConvergenceMetrics m;
  m.cost_delta = next.cost - previous.cost;
  if (previous.U.size() != next.U.size()) throw DimensionMismatch("convergence_metrics: horizons differ");
  for (std::size_t n = 0; n < next.U.size(); ++n)
    m.ff_norm = std::max(m.ff_norm, (next.U[n] - previous.U[n]).lpNorm<Eigen::Infinity>());
  m.defect_norm = next.defect_norm;
  return m;
}

NlocSolver::NlocSolver(std::shared_ptr<const SecondOrderSystem> system, CostFunction cost,
                       NlocSettings settings)
    : system_(std::move(system)),
      cost_(std::move(cost)),
      settings_(settings),
      pool_(std::make_shared<WorkerPool>(settings.workers)) {
  validate(settings_);
  validate(cost_, system_->nx(), system_->nu());
}

void NlocSolver::set_system(std::shared_ptr<const SecondOrderSystem> system) {
  if (system->nx() != system_->nx() || system->nu() != system_->nu())
    throw DimensionMismatch("set_system: dimensions changed");
  system_ = std::move(system);
}

void NlocSolver::set_cost(CostFunction cost) {
  validate(cost, system_->nx(), system_->nu());
  cost_ = std::move(cost);
}

void NlocSolver::set_workers(int workers) {
  settings_.workers = workers;
  pool_ = std::make_shared<WorkerPool>(workers);
}

double NlocSolver::trajectory_cost(const StateTrajectory& X, const ControlTrajectory& U,
                                   double t_start) const {
  return evaluate(cost_, X, U, settings_.control_dt, t_start);
}

bool NlocSolver::is_converged(double cost_delta, double cost, double ff_norm,
                              double defect_norm) const {
  const bool cost_ok = std::abs(cost_delta) < settings_.cost_tolerance * (1.0 + std::abs(cost));
  const bool ff_ok = ff_norm < settings_.ff_tolerance;
  const bool defect_ok =
      settings_.algorithm == Algorithm::ilqr || defect_norm < settings_.defect_tolerance;
  return cost_ok && ff_ok && defect_ok;
}

NlocIterate NlocSolver::cold_start(const VectorXd& x0, double t_start,
                                   ControlTrajectory controls) const {
  const int N = settings_.horizon;
  if (controls.empty()) {
    VectorXd u_ref = VectorXd::Zero(system_->nu());
    if (!cost_.running.empty()) u_ref = cost_.running.front().u_ref;
    controls.assign(static_cast<std::size_t>(N), u_ref);
  }
  if (static_cast<int>(controls.size()) != N)
    throw DimensionMismatch("cold_start: control trajectory length must equal the horizon");

  NlocIterate it;
  it.t_start = t_start;
  AffinePolicy start;
  start.u_ff = std::move(controls);
  const int nq = system_->nq();
  const int nu = system_->nu();
  if ((settings_.cold_start_kp > 0 || settings_.cold_start_kd > 0) && !cost_.running.empty()) {
    MatrixXd K = MatrixXd::Zero(nu, system_->nx());
    for (int j = 0; j < nu; ++j) {
      K(j, nq - nu + j) = -settings_.cold_start_kp;
      K(j, 2 * nq - nu + j) = -settings_.cold_start_kd;
    }
    start.K.assign(static_cast<std::size_t>(N), K);
    start.x_ref.assign(static_cast<std::size_t>(N), cost_.running.front().x_ref);
  }
  auto r = rollout(*system_, x0, start, settings_.control_dt, settings_.integrator);
  it.X = std::move(r.X);
  it.U = std::move(r.U);
  it.policy.u_ff = it.U;
  it.policy.x_ref = it.X;
  it.policy.K = start.K.empty() ? std::vector<MatrixXd>{} : start.K;
  it.cost = trajectory_cost(it.X, it.U, t_start);
  return it;
}

StageLinearization NlocSolver::linearize_stage(const VectorXd& x, const VectorXd& u,
                                               double t) const {
  StageLinearization out;
  out.sensitivity = stage_sensitivity(*system_, x, u, settings_.control_dt, settings_.integrator);
  out.cost = quadratize(cost_, x, u, t);
  const double dt = settings_.control_dt;
  out.cost.constant *= dt;
  out.cost.q *= dt;
  out.cost.Q *= dt;
  out.cost.r *= dt;
  out.cost.R *= dt;
  out.cost.P *= dt;
  return out;
}

void NlocSolver::linearize_stages(const StateTrajectory& X, const ControlTrajectory& U,
                                  double t_start, int first, int last,
                                  std::vector<StageLinearization>& out) const {
  out.resize(U.size());
  pool_->for_each(last - first, [&](int i) {
    const int n = first + i;
    const auto k = static_cast<std::size_t>(n);
    try {
      out[k] = linearize_stage(X[k], U[k], t_start + n * settings_.control_dt);
    } catch (const NonFiniteState&) {
      throw NonFiniteState("shooting interval " + std::to_string(n) + " diverged", n);
    }
  });
}

StageQuadratization NlocSolver::final_quadratization(const VectorXd& x_final) const {
  return quadratize_final(cost_, x_final);
}

LqocProblemd NlocSolver::assemble(const StateTrajectory& X,
                                  const std::vector<StageLinearization>& stages,
                                  const StageQuadratization& final_cost,
                                  bool single_shooting) const {
  LqocProblemd p;
  const auto N = stages.size();
  p.stages.resize(N);
  for (std::size_t n = 0; n < N; ++n) {
    const auto& lin = stages[n];
    auto& st = p.stages[n];
    st.A = lin.sensitivity.A;
    st.B = lin.sensitivity.B;
    st.c = single_shooting ? VectorXd::Zero(system_->nx())
                           : VectorXd(lin.sensitivity.x_next - X[n + 1]);
    st.Q = lin.cost.Q;
    st.R = lin.cost.R;
    st.P = lin.cost.P;
    st.q = lin.cost.q;
    st.r = lin.cost.r;
  }
  p.Q_final = final_cost.Q;
  p.q_final = final_cost.q;
  p.dx0 = VectorXd::Zero(system_->nx());
  return p;
}

std::vector<VectorXd> NlocSolver::defects(const StateTrajectory& X,
                                          const ControlTrajectory& U) const {
  std::vector<VectorXd> out(U.size());
  pool_->for_each(static_cast<int>(U.size()), [&](int n) {
    const auto k = static_cast<std::size_t>(n);
    try {
      out[k] = integrate_interval(*system_, X[k], U[k], settings_.control_dt,
                                  settings_.integrator) - X[k + 1];
    } catch (const NonFiniteState&) {
      throw NonFiniteState("shooting interval " + std::to_string(n) + " diverged", n);
    }
  });
  return out;
}

double NlocSolver::defect_norm(const StateTrajectory& X, const ControlTrajectory& U) const {
  return max_norm(defects(X, U));
}

LineSearchResult NlocSolver::line_search(const Rollout& nominal, double nominal_cost,
                                         const LqocSolutiond& candidate, const VectorXd& x0,
                                         double t_start) const {
  const auto N = nominal.U.size();
  AffinePolicy trial;
  trial.K = candidate.K;
  trial.x_ref = nominal.X;
  trial.u_ff.resize(N);

  if (max_norm(candidate.du_ff) <= settings_.ff_tolerance) {
    // Stationary: a zero increment is a converged step, not a failed one.
    for (std::size_t n = 0; n < N; ++n) trial.u_ff[n] = nominal.U[n] + candidate.du_ff[n];
    LineSearchResult out{1.0, rollout(*system_, x0, trial, settings_.control_dt, settings_.integrator), 0.0};
    out.cost = trajectory_cost(out.rollout.X, out.rollout.U, t_start);
    if (out.cost <= nominal_cost) return out;
    return {0.0, nominal, nominal_cost};
  }

  double alpha = 1.0;
  for (int i = 0; i < settings_.max_line_search_steps; ++i, alpha *= settings_.backtracking) {
    for (std::size_t n = 0; n < N; ++n) trial.u_ff[n] = nominal.U[n] + alpha * candidate.du_ff[n];
    Rollout r;
    try {
      r = rollout(*system_, x0, trial, settings_.control_dt, settings_.integrator);
    } catch (const NonFiniteState&) {
      continue;
    }
    const double J = trajectory_cost(r.X, r.U, t_start);
    if (J < nominal_cost) return {alpha, std::move(r), J};
  }
  throw LineSearchFailed("no step size decreased the cost");
}

NlocIterate NlocSolver::iterate(const NlocIterate& current, const VectorXd& x0) const {
  return settings_.algorithm == Algorithm::ilqr ? ilqr_iteration(current, x0)
                                                : gnms_iteration(current, x0);
}

NlocIterate NlocSolver::ilqr_iteration(const NlocIterate& current, const VectorXd& x0) const {
  const int N = settings_.horizon;
  if (current.policy.size() != N) throw DimensionMismatch("ilqr_iteration: policy length");

  Rollout nominal = rollout(*system_, x0, current.policy, settings_.control_dt, settings_.integrator);
  const double nominal_cost = trajectory_cost(nominal.X, nominal.U, current.t_start);

  std::vector<StageLinearization> lin;
  linearize_stages(nominal.X, nominal.U, current.t_start, 0, N, lin);
  const auto problem = assemble(nominal.X, lin, final_quadratization(nominal.X.back()), true);
  const auto sol = solve_riccati(problem, settings_.riccati);

  LineSearchResult ls = line_search(nominal, nominal_cost, sol, x0, current.t_start);

  NlocIterate next;
  next.t_start = current.t_start;
  next.X = std::move(ls.rollout.X);
  next.U = std::move(ls.rollout.U);
  next.policy.u_ff = next.U;
  next.policy.K = sol.K;
  next.policy.x_ref = next.X;
  next.cost = ls.cost;
  next.alpha = ls.alpha;
  next.ff_norm = max_norm(sol.du_ff);
  next.defect_norm = 0.0;
  next.iteration = current.iteration + 1;
  next.converged = is_converged(next.cost - nominal_cost, next.cost, next.ff_norm, 0.0);
  return next;
}

NlocIterate NlocSolver::gnms_update(const NlocIterate& current, const LqocSolutiond& sol) const {
  NlocIterate next;
  next.t_start = current.t_start;
  next.X.resize(current.X.size());
  next.U.resize(current.U.size());
  for (std::size_t n = 0; n < current.X.size(); ++n) next.X[n] = current.X[n] + sol.dx[n];
  for (std::size_t n = 0; n < current.U.size(); ++n) next.U[n] = current.U[n] + sol.du[n];
  for (std::size_t n = 0; n < current.U.size(); ++n) {
    if (!next.X[n].allFinite() || !next.U[n].allFinite() || !sol.K[n].allFinite())
      throw NonFiniteState("GNMS step is not finite at stage " + std::to_string(n),
                           static_cast<int>(n));
  }
  next.policy.u_ff = next.U;
  next.policy.K = sol.K;
  next.policy.x_ref = next.X;
  next.alpha = 1.0;
  next.ff_norm = max_norm(sol.du_ff);
  next.iteration = current.iteration + 1;
  return next;
}

NlocIterate NlocSolver::gnms_iteration(const NlocIterate& current, const VectorXd& x0) const {
  const int N = settings_.horizon;
  if (static_cast<int>(current.U.size()) != N || static_cast<int>(current.X.size()) != N + 1)
    throw DimensionMismatch("gnms_iteration: trajectory length");

  NlocIterate nodes = current;
  nodes.X[0] = x0;
  std::vector<StageLinearization> lin;
  linearize_stages(nodes.X, nodes.U, nodes.t_start, 0, N, lin);
  const auto fin = final_quadratization(nodes.X.back());
  const auto sol = solve_riccati(assemble(nodes.X, lin, fin, false), settings_.riccati);

  double node_cost = fin.constant;
  for (const auto& l : lin) node_cost += l.cost.constant;

  NlocIterate next = gnms_update(nodes, sol);
  next.cost = trajectory_cost(next.X, next.U, next.t_start);
  next.defect_norm = defect_norm(next.X, next.U);

  if (settings_.gnms_line_search) {
    double defect_l1 = 0.0;
    for (std::size_t n = 0; n < lin.size(); ++n)
      defect_l1 += (lin[n].sensitivity.x_next - nodes.X[n + 1]).lpNorm<1>();
    const double merit0 = node_cost + settings_.defect_penalty * defect_l1;
    auto merit = [&](const NlocIterate& it) {
      double l1 = 0.0;
      for (const auto& d : defects(it.X, it.U)) l1 += d.lpNorm<1>();
      return it.cost + settings_.defect_penalty * l1;
    };
    double alpha = 1.0;
    bool accepted = merit(next) < merit0 || next.ff_norm <= settings_.ff_tolerance;
    for (int i = 1; i < settings_.max_line_search_steps && !accepted; ++i) {
      alpha *= settings_.backtracking;
      LqocSolutiond scaled = sol;
      for (auto& dx : scaled.dx) dx *= alpha;
      for (auto& du : scaled.du) du *= alpha;
      next = gnms_update(nodes, scaled);
      next.alpha = alpha;
      next.ff_norm = max_norm(sol.du_ff);
      next.cost = trajectory_cost(next.X, next.U, next.t_start);
      next.defect_norm = defect_norm(next.X, next.U);
      accepted = merit(next) < merit0;
    }
    if (!accepted) throw LineSearchFailed("GNMS merit line search failed");
  }
  next.converged =
      is_converged(next.cost - node_cost, next.cost, next.ff_norm, next.defect_norm);
  return next;
}

SolveResult NlocSolver::solve(const VectorXd& x0, double t_start, NlocIterate initial) const {
  SolveResult out;
  initial.t_start = t_start;
  out.iterate = std::move(initial);
  for (int it = 0; it < settings_.max_iterations; ++it) {
    try {
      out.iterate = iterate(out.iterate, x0);
    } catch (const LineSearchFailed&) {
      break;
    }
    const auto& cur = out.iterate;
    out.trace.push_back({cur.iteration, cur.cost, cur.ff_norm, cur.defect_norm, cur.alpha});
    if (cur.converged) {
      out.converged = true;
      break;
    }
  }
  return out;
}

SolveResult NlocSolver::solve(const VectorXd& x0, double t_start) const {
  return solve(x0, t_start, cold_start(x0, t_start));
}

}  // namespace wbmpc
