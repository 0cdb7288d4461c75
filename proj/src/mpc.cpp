#include "wbmpc/mpc.hpp"

#include <chrono>
#include <cmath>

namespace wbmpc {

namespace {

constexpr double kTimeEps = 1e-9;

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

bool MpcPolicy::valid_at(double t) const {
  return size() > 0 && t >= start_time - kTimeEps && t < end_time() - kTimeEps;
}

int MpcPolicy::stage_at(double t) const {
  if (size() == 0) throw Error("empty MPC policy");
  const auto n = static_cast<int>(std::floor((t - start_time) / dt + kTimeEps));
  return std::clamp(n, 0, size() - 1);
}

VectorXd MpcPolicy::operator()(double t, const VectorXd& x) const {
  return policy(stage_at(t), x);
}

MpcPolicy make_policy(const NlocIterate& iterate, double dt) {
  MpcPolicy out;
  out.start_time = iterate.t_start;
  out.dt = dt;
  out.policy = iterate.policy;
  return out;
}

std::string to_string(WarmStart mode) {
  switch (mode) {
    case WarmStart::shift:
      return "shift";
    case WarmStart::no_shift:
      return "no_shift";
    case WarmStart::cold:
      return "cold";
  }
  return "unknown";
}

WarmStart warm_start_from_string(const std::string& name) {
  if (name == "shift" || name == "previous_solution") return WarmStart::shift;
  if (name == "no_shift") return WarmStart::no_shift;
  if (name == "cold") return WarmStart::cold;
  throw Error("unknown warm start mode '" + name + "'");
}

MpcSettings MpcSettings::defaults(Algorithm algorithm) {
  MpcSettings s;
  s.horizon = algorithm == Algorithm::ilqr ? 0.5 : 0.498;
  return s;
}

double MpcSettings::default_control_dt(Algorithm algorithm) {
  return algorithm == Algorithm::ilqr ? 0.004 : 0.006;
}

int horizon_stages(double horizon, double control_dt) {
  if (!(horizon > 0) || !(control_dt > 0)) throw Error("horizon and control_dt must be positive");
  const double ratio = horizon / control_dt;
  const double n = std::round(ratio);
  if (n < 1 || std::abs(ratio - n) > 1e-6 * ratio)
    throw Error("horizon must be an integer multiple of control_dt");
  return static_cast<int>(n);
}

MpcController::MpcController(NlocSolver solver, MpcSettings settings)
    : solver_(std::move(solver)), settings_(settings) {
  if (settings_.max_fallback_updates < 0) throw Error("max_fallback_updates must be >= 0");
  const int N = horizon_stages(settings_.horizon, solver_.settings().control_dt);
  if (N != solver_.settings().horizon)
    throw DimensionMismatch("MPC horizon does not match the solver's stage count");
}

void MpcController::initialize(const VectorXd& x0, double t0) {
  NlocIterate it = solver_.cold_start(x0, t0);
  for (int k = 0; k < settings_.initial_iterations; ++k) {
    try {
      it = solver_.iterate(it, x0);
    } catch (const LineSearchFailed&) {
      break;
    }
    if (it.converged) break;
  }
  iterate_ = std::move(it);
  policy_ = make_policy(iterate_, solver_.settings().control_dt);
  diagnostics_ = MpcDiagnostics{};
  diagnostics_.t_meas = t0;
  diagnostics_.cost = iterate_.cost;
  diagnostics_.defect_norm = iterate_.defect_norm;
  diagnostics_.ff_norm = iterate_.ff_norm;
  diagnostics_.alpha = iterate_.alpha;
  prepared_.reset();
  consecutive_failures_ = 0;
  restart_cold_ = false;
  initialized_ = true;
  if (solver_.settings().algorithm == Algorithm::gnms) prepared_ = prepare(t0);
}

int MpcController::shift_for(const NlocIterate& previous, double t) const {
  if (settings_.warm_start != WarmStart::shift) return 0;
  const double dt = solver_.settings().control_dt;
  const auto n = static_cast<int>(std::floor((t - previous.t_start) / dt + kTimeEps));
  return std::clamp(n, 0, static_cast<int>(previous.U.size()));
}

NlocIterate MpcController::warm_start(const NlocIterate& previous, const VectorXd& x_meas,
                                      double t_meas) const {
  if (settings_.warm_start == WarmStart::cold) return solver_.cold_start(x_meas, t_meas);

  const int s = shift_for(previous, t_meas);
  const int N = static_cast<int>(previous.U.size());
  const double dt = solver_.settings().control_dt;
  NlocIterate next = previous;
  if (s > 0) {
    for (int n = 0; n <= N; ++n) next.X[n] = previous.X[std::min(n + s, N)];
    for (int n = 0; n < N; ++n) next.U[n] = previous.U[std::min(n + s, N - 1)];
    if (!previous.policy.K.empty())
      for (int n = 0; n < N; ++n) next.policy.K[n] = previous.policy.K[std::min(n + s, N - 1)];
  }
  next.policy.u_ff = next.U;
  next.policy.x_ref = next.X;
  next.t_start = settings_.warm_start == WarmStart::shift ? previous.t_start + s * dt : t_meas;
  return next;
}

void MpcController::adopt(NlocIterate next, const VectorXd& x_meas, double t_meas) {
  MpcPolicy incoming = make_policy(next, solver_.settings().control_dt);
  diagnostics_.handoff_jump =
      (incoming(t_meas, x_meas) - policy_(t_meas, x_meas)).lpNorm<Eigen::Infinity>();
  diagnostics_.cost = next.cost;
  diagnostics_.defect_norm = next.defect_norm;
  diagnostics_.ff_norm = next.ff_norm;
  diagnostics_.alpha = next.alpha;
  policy_ = std::move(incoming);
  iterate_ = std::move(next);
  consecutive_failures_ = 0;
}

MpcPolicy MpcController::fallback(const VectorXd&, double, const std::string& reason) {
  ++consecutive_failures_;
  diagnostics_.fallback = true;
  diagnostics_.failure = reason;
  diagnostics_.cost = iterate_.cost;
  diagnostics_.defect_norm = iterate_.defect_norm;
  diagnostics_.ff_norm = iterate_.ff_norm;
  diagnostics_.alpha = 0.0;
  if (consecutive_failures_ > settings_.max_fallback_updates)
    throw SolverDiverged("MPC failed " + std::to_string(consecutive_failures_) +
                         " consecutive updates: " + reason);
  return policy_;
}

MpcPolicy MpcController::update(const VectorXd& x_meas, double t_meas) {
  if (solver_.settings().algorithm == Algorithm::ilqr) return update_ilqr(x_meas, t_meas);
  if (!prepared_) {
    const auto start = std::chrono::steady_clock::now();
    try {
      prepared_ = prepare(t_meas);
    } catch (const Error& e) {
      diagnostics_ = MpcDiagnostics{};
      diagnostics_.t_meas = t_meas;
      diagnostics_.solve_ms = elapsed_ms(start);
      return fallback(x_meas, t_meas, e.what());
    }
    const double ms = elapsed_ms(start);
    MpcPolicy out = feedback_phase_gnms(x_meas, t_meas);
    diagnostics_.prepare_ms = ms;
    diagnostics_.reprepared = true;
    return out;
  }
  return feedback_phase_gnms(x_meas, t_meas);
}

MpcPolicy MpcController::update_ilqr(const VectorXd& x_meas, double t_meas) {
  if (!initialized_) throw Error("MPC controller is not initialized");
  const auto start = std::chrono::steady_clock::now();
  diagnostics_ = MpcDiagnostics{};
  diagnostics_.t_meas = t_meas;
  diagnostics_.shift = shift_for(iterate_, t_meas);
  NlocIterate next;
  try {
    // The retained solution diverged from the last measurement; its feedback gains
    // would drive this rollout into the ground as well.
    NlocIterate initial = restart_cold_ ? solver_.cold_start(x_meas, t_meas)
                                        : warm_start(iterate_, x_meas, t_meas);
    diagnostics_.cold_restart = restart_cold_;
    next = solver_.ilqr_iteration(initial, x_meas);
  } catch (const NonFiniteState& e) {
    diagnostics_.solve_ms = elapsed_ms(start);
    restart_cold_ = true;
    return fallback(x_meas, t_meas, e.what());
  } catch (const Error& e) {
    diagnostics_.solve_ms = elapsed_ms(start);
    return fallback(x_meas, t_meas, e.what());
  }
  restart_cold_ = false;
  adopt(std::move(next), x_meas, t_meas);
  diagnostics_.solve_ms = elapsed_ms(start);
  return policy_;
}

MpcController::Prepared MpcController::prepare(double t_meas) const {
  Prepared p;
  VectorXd x_guess = iterate_.X[static_cast<std::size_t>(shift_for(iterate_, t_meas))];
  p.nodes = warm_start(iterate_, x_guess, t_meas);
  const int N = static_cast<int>(p.nodes.U.size());
  const auto& s = solver_.settings();

  // A full step can leave nodes deep in the ground where the contact blows up, or with
  // defects too large for the linearization to mean anything. Such nodes are re-seeded
  // from a closed-loop rollout of the retained solution, else from a cold start.
  bool reseed = false;
  try {
    solver_.linearize_stages(p.nodes.X, p.nodes.U, p.nodes.t_start, 1, N, p.stages);
    double defect = 0.0;
    for (int n = 1; n < N; ++n) {
      const auto k = static_cast<std::size_t>(n);
      defect = std::max(defect, (p.stages[k].sensitivity.x_next - p.nodes.X[k + 1])
                                    .lpNorm<Eigen::Infinity>());
    }
    reseed = defect > settings_.reseed_defect;
  } catch (const NonFiniteState&) {
    reseed = true;
  }
  if (reseed) {
    try {
      Rollout r = rollout(solver_.system(), x_guess, p.nodes.policy, s.control_dt, s.integrator);
      p.nodes.X = std::move(r.X);
      p.nodes.U = std::move(r.U);
      p.nodes.policy.u_ff = p.nodes.U;
      p.nodes.policy.x_ref = p.nodes.X;
    } catch (const NonFiniteState&) {
      p.nodes = solver_.cold_start(x_guess, p.nodes.t_start);
    }
    solver_.linearize_stages(p.nodes.X, p.nodes.U, p.nodes.t_start, 1, N, p.stages);
  }
  p.reseeded = reseed;
  p.final_cost = solver_.final_quadratization(p.nodes.X.back());
  return p;
}

void MpcController::preparation_phase_gnms(double t_next_meas) {
  if (!initialized_) throw Error("MPC controller is not initialized");
  const auto start = std::chrono::steady_clock::now();
  prepared_.reset();
  try {
    prepared_ = prepare(t_next_meas);
  } catch (const Error& e) {
    // Left unprepared; the next update retries and falls back if that fails too.
    diagnostics_.failure = e.what();
  }
  diagnostics_.prepare_ms = elapsed_ms(start);
}

MpcPolicy MpcController::feedback_phase_gnms(const VectorXd& x_meas, double t_meas) {
  if (!prepared_) throw NotPrepared("GNMS feedback phase called without a preparation phase");
  const auto start = std::chrono::steady_clock::now();
  const double prepare_ms = diagnostics_.prepare_ms;
  diagnostics_ = MpcDiagnostics{};
  diagnostics_.t_meas = t_meas;
  diagnostics_.prepare_ms = prepare_ms;
  diagnostics_.shift = shift_for(iterate_, t_meas);

  const double expected_start = settings_.warm_start == WarmStart::shift
                                    ? iterate_.t_start + diagnostics_.shift * solver_.settings().control_dt
                                    : t_meas;
  if (settings_.warm_start != WarmStart::cold &&
      std::abs(expected_start - prepared_->nodes.t_start) > kTimeEps) {
    // Measurement arrived in a different stage than prepared for.
    prepared_ = prepare(t_meas);
    diagnostics_.reprepared = true;
  }

  Prepared& p = *prepared_;
  diagnostics_.reseeded = p.reseeded;
  NlocIterate nodes = p.nodes;
  nodes.X[0] = x_meas;
  NlocIterate next;
  try {
    p.stages[0] = solver_.linearize_stage(x_meas, nodes.U[0], nodes.t_start);
    const LqocProblemd problem = solver_.assemble(nodes.X, p.stages, p.final_cost, false);
    const auto sol = solve_riccati(problem, solver_.settings().riccati);
    next = solver_.gnms_update(nodes, sol);
    double defect = 0.0;
    for (const auto& st : problem.stages) defect = std::max(defect, st.c.lpNorm<Eigen::Infinity>());
    next.defect_norm = defect;
    next.cost = solver_.trajectory_cost(next.X, next.U, next.t_start);
  } catch (const Error& e) {
    prepared_.reset();
    diagnostics_.solve_ms = elapsed_ms(start);
    return fallback(x_meas, t_meas, e.what());
  }
  prepared_.reset();
  adopt(std::move(next), x_meas, t_meas);
  diagnostics_.solve_ms = elapsed_ms(start);
  return policy_;
}

}  // namespace wbmpc
