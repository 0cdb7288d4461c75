#include "wbmpc/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <ostream>
#include <random>

namespace wbmpc {

namespace {

constexpr double kTimeEps = 1e-9;

int ratio_of(double big, double small, const std::string& what) {
  const double r = big / small;
  const double n = std::round(r);
  if (n < 1 || std::abs(r - n) > 1e-6 * r) throw Error(what + " must be an integer multiple");
  return static_cast<int>(n);
}

}  // namespace

void validate(const PlantSettings& s) {
  if (!(s.h > 0)) throw Error("plant step must be positive");
  if (!(s.mass_scale > 0) || !(s.inertia_scale > 0)) throw Error("mismatch scales must be > 0");
  if (s.delay < 0) throw Error("actuation delay must be >= 0");
  if (s.noise_base_pose < 0 || s.noise_joint_positions < 0 || s.noise_base_twist < 0 ||
      s.noise_joint_velocities < 0)
    throw Error("noise standard deviations must be >= 0");
}

std::string to_string(DisturbanceEvent::Kind kind) {
  return kind == DisturbanceEvent::Kind::base_push ? "base_push" : "ground_step";
}

DisturbanceEvent::Kind disturbance_kind_from_string(const std::string& name) {
  if (name == "base_push") return DisturbanceEvent::Kind::base_push;
  if (name == "ground_step") return DisturbanceEvent::Kind::ground_step;
  throw Error("unknown disturbance kind '" + name + "'");
}

void validate(const DisturbanceEvent& e, int n_ee) {
  if (!(e.duration > 0)) throw Error("disturbance duration must be > 0");
  if (e.kind == DisturbanceEvent::Kind::ground_step && (e.foot < 0 || e.foot >= n_ee))
    throw IndexOutOfRange("ground step foot index out of range");
  if (e.kind == DisturbanceEvent::Kind::base_push && std::abs(e.direction.norm() - 1.0) > 1e-9)
    throw Error("push direction must be a unit vector");
}

void validate(const TrackingGains& g, int nu) {
  if (g.kp.size() != nu || g.kd.size() != nu)
    throw DimensionMismatch("tracking gains need one entry per joint");
  if ((g.kp.array() < 0).any() || (g.kd.array() < 0).any())
    throw Error("tracking gains must be >= 0");
  if (!(g.torque_limit > 0)) throw Error("torque limit must be > 0");
  if (!(g.dt > 0)) throw Error("tracking period must be > 0");
}

TrackingOutput tracking_control(const MpcPolicy& policy, const VectorXd& x, double t,
                                const TrackingGains& gains) {
  const int n = policy.stage_at(t);
  const auto i = static_cast<std::size_t>(n);
  const AffinePolicy& p = policy.policy;
  TrackingOutput out;
  out.outside_policy = !policy.valid_at(t);
  out.ff = p.u_ff[i];
  const int nu = static_cast<int>(out.ff.size());
  const int nq = static_cast<int>(x.size()) / 2;
  const VectorXd& x_ref = p.x_ref[i];
  out.fb = p.K.empty() ? VectorXd::Zero(nu) : VectorXd(p.K[i] * (x - x_ref));
  const VectorXd q_err = x_ref.segment(nq - nu, nu) - x.segment(nq - nu, nu);
  const VectorXd v_err = x_ref.segment(2 * nq - nu, nu) - x.segment(2 * nq - nu, nu);
  out.pd = gains.kp.cwiseProduct(q_err) + gains.kd.cwiseProduct(v_err);
  out.commanded = out.ff + out.fb + out.pd;
  out.torque = out.commanded.cwiseMax(-gains.torque_limit).cwiseMin(gains.torque_limit);
  out.saturated = (out.torque.array() != out.commanded.array()).any();
  return out;
}

Plant::Plant(const RobotModel& nominal, ContactParams contact, GroundPlane ground,
             PlantSettings settings, std::vector<DisturbanceEvent> disturbances)
    : model_(std::make_shared<RobotModel>(
          scaled(nominal, settings.mass_scale, settings.inertia_scale))),
      contact_(contact),
      ground_(ground),
      settings_(settings),
      disturbances_(std::move(disturbances)) {
  validate(settings_);
  for (const auto& e : disturbances_) validate(e, model_->n_ee());
}

const RobotDynamics& Plant::dynamics_at(double t) {
  std::vector<bool> active(disturbances_.size());
  for (std::size_t i = 0; i < disturbances_.size(); ++i) active[i] = disturbances_[i].active(t);
  if (dynamics_ && active == active_) return *dynamics_;

  std::vector<GroundPlane> grounds(static_cast<std::size_t>(model_->n_ee()), ground_);
  bool stepped = false;
  Vector2d push = Vector2d::Zero();
  for (std::size_t i = 0; i < disturbances_.size(); ++i) {
    if (!active[i]) continue;
    const auto& e = disturbances_[i];
    if (e.kind == DisturbanceEvent::Kind::ground_step) {
      grounds[static_cast<std::size_t>(e.foot)].height += e.magnitude;
      stepped = true;
    } else {
      push += e.magnitude * e.direction;
    }
  }
  if (!stepped) grounds = {ground_};
  dynamics_ = std::make_unique<RobotDynamics>(model_, contact_, std::move(grounds), push);
  active_ = std::move(active);
  return *dynamics_;
}

VectorXd Plant::step(const VectorXd& x, const VectorXd& tau, double t) {
  if (!tau.allFinite()) throw NonFiniteState("plant received non-finite torques");
  return step_symplectic(dynamics_at(t), x, tau, settings_.h);
}

GroundEstimator::GroundEstimator(int n_ee, ContactParams contact, double stance_threshold,
                                 GroundFit fit)
    : contact_(contact),
      threshold_(stance_threshold),
      fit_(fit),
      points_(static_cast<std::size_t>(n_ee), Vector2d::Zero()),
      seen_(static_cast<std::size_t>(n_ee), false) {}

void GroundEstimator::observe(const RobotModel& model, const VectorXd& x,
                              const VectorXd& normal_forces) {
  const VectorXd q = x.head(model.nq());
  const VectorXd v = x.tail(model.nv());
  for (int i = 0; i < model.n_ee(); ++i) {
    const double f = normal_forces(i);
    if (!(f > threshold_)) continue;
    const auto kin = foot_kinematics<double>(model, q, v, i);
    const double pdot = (kin.jacobian * v).y();
    // Penetration p solving k exp(a_k p) - d sig(a_d p) pdot = f by Newton from the
    // spring-only guess. Positive p means the foot sits below the surface.
    double p = std::log(f / contact_.k) / contact_.alpha_k;
    for (int it = 0; it < 20; ++it) {
      const double s = sigmoid(contact_.alpha_d * p);
      const double spring = contact_.k * std::exp(contact_.alpha_k * p);
      const double g = spring - contact_.d * s * pdot - f;
      const double dg =
          contact_.alpha_k * spring - contact_.d * contact_.alpha_d * s * (1 - s) * pdot;
      if (!(dg > 0)) break;
      const double step = g / dg;
      p -= std::clamp(step, -0.01, 0.01);
      if (std::abs(step) < 1e-12) break;
    }
    p = std::clamp(p, -0.05, 0.05);
    points_[static_cast<std::size_t>(i)] = kin.position + Vector2d(0.0, p);
    seen_[static_cast<std::size_t>(i)] = true;
  }
}

bool GroundEstimator::has_estimate() const {
  return std::any_of(seen_.begin(), seen_.end(), [](bool b) { return b; });
}

GroundPlane GroundEstimator::estimate() const {
  std::vector<Vector2d> pts;
  for (std::size_t i = 0; i < points_.size(); ++i)
    if (seen_[i]) pts.push_back(points_[i]);
  const std::unique_ptr<bool[]> stance(new bool[pts.size()]);
  std::fill_n(stance.get(), pts.size(), true);
  return estimate_ground(std::span<const Vector2d>(pts),
                         std::span<const bool>(stance.get(), pts.size()), fit_);
}

std::vector<std::string> state_names(const RobotModel& model) {
  std::vector<std::string> q{"x", "z", "pitch"};
  for (int leg = 0; leg < model.n_ee(); ++leg) {
    q.push_back("hfe_" + std::to_string(leg));
    q.push_back("kfe_" + std::to_string(leg));
  }
  std::vector<std::string> out = q;
  const std::vector<std::string> twist{"vx", "vz", "pitch_rate"};
  for (std::size_t i = 0; i < q.size(); ++i)
    out.push_back(i < 3 ? twist[i] : q[i] + "_rate");
  return out;
}

namespace {

std::vector<std::string> log_columns(const ClosedLoopLog& log) {
  std::vector<std::string> cols{"time_s"};
  for (const auto& s : log.state_names) cols.push_back(s);
  const auto nq = log.state_names.size() / 2;
  std::vector<std::string> joints;
  for (std::size_t i = nq - static_cast<std::size_t>(log.nu); i < nq; ++i)
    joints.push_back(log.state_names[i]);
  for (const char* prefix : {"tau_", "ff_", "fb_", "pd_"})
    for (const auto& j : joints) cols.push_back(prefix + j);
  for (const char* c : {"solve_ms", "cost", "defect_norm", "alpha"}) cols.emplace_back(c);
  for (int i = 0; i < log.n_ee; ++i) cols.push_back("fn_" + std::to_string(i));
  for (const auto& s : log.state_names) cols.push_back("ref_" + s);
  return cols;
}

std::vector<double> row_values(const LogRow& r) {
  std::vector<double> v{r.time};
  auto add = [&](const VectorXd& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) v.push_back(x(i));
  };
  add(r.state);
  add(r.torque);
  add(r.ff);
  add(r.fb);
  add(r.pd);
  v.push_back(r.solve_ms);
  v.push_back(r.cost);
  v.push_back(r.defect_norm);
  v.push_back(r.alpha);
  add(r.normal_forces);
  add(r.reference);
  return v;
}

void write_row(std::ostream& out, const std::vector<double>& values) {
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g", values[i]);
    if (i) out << ',';
    out << buf;
  }
  out << '\n';
}

}  // namespace

void write_log_csv(const ClosedLoopLog& log, std::ostream& out) {
  const auto cols = log_columns(log);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : log.rows) write_row(out, row_values(r));
}

void write_updates_csv(const ClosedLoopLog& log, std::ostream& out) {
  out << "t_meas,t_available,solve_ms,wall_ms,prepare_ms,cost,defect_norm,ff_norm,alpha,"
         "handoff_jump,fallback\n";
  for (const auto& u : log.updates)
    write_row(out, {u.t_meas, u.t_available, u.solve_ms, u.wall_ms, u.prepare_ms, u.cost,
                    u.defect_norm, u.ff_norm, u.alpha, u.handoff_jump, u.fallback ? 1.0 : 0.0});
}

std::vector<double> log_column(const ClosedLoopLog& log, const std::string& name) {
  const auto cols = log_columns(log);
  const auto it = std::find(cols.begin(), cols.end(), name);
  if (it == cols.end()) throw IndexOutOfRange("no log column '" + name + "'");
  const auto idx = static_cast<std::size_t>(it - cols.begin());
  std::vector<double> out;
  out.reserve(log.rows.size());
  for (const auto& r : log.rows) out.push_back(row_values(r)[idx]);
  return out;
}

ClosedLoopLog run_closed_loop(const ClosedLoopSetup& setup) {
  const RobotModel& model = setup.model;
  validate(model);
  validate(setup.tracking, model.nu());
  const auto model_ptr = std::make_shared<const RobotModel>(model);

  ClosedLoopLog log;
  log.state_names = state_names(model);
  log.nu = model.nu();
  log.n_ee = model.n_ee();
  log.nominal_height = setup.nominal_height > 0 ? setup.nominal_height : setup.x0(1);

  const double dt_track = setup.tracking.dt;
  const int substeps = ratio_of(dt_track, setup.plant.h, "tracking period / plant step");
  const int ticks = static_cast<int>(std::floor(setup.sim.duration / dt_track + kTimeEps));

  Plant plant(model, setup.contact, setup.ground, setup.plant, setup.disturbances);
  auto system = std::make_shared<RobotDynamics>(model_ptr, setup.contact,
                                                std::vector<GroundPlane>{setup.ground});
  MpcController mpc(NlocSolver(system, setup.cost, setup.solver), setup.mpc);
  const bool gnms = setup.solver.algorithm == Algorithm::gnms;

  std::mt19937_64 rng(setup.sim.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int nq = model.nq();
  auto measure = [&](const VectorXd& x) {
    VectorXd m = x;
    const PlantSettings& p = setup.plant;
    const double stds[4] = {p.noise_base_pose, p.noise_joint_positions, p.noise_base_twist,
                            p.noise_joint_velocities};
    for (int i = 0; i < 2 * nq; ++i) {
      const int local = i % nq;
      const int group = (i < nq ? 0 : 2) + (local < RobotModel::base_dof ? 0 : 1);
      if (stds[group] > 0) m(i) += stds[group] * normal(rng);
    }
    return m;
  };

  GroundEstimator estimator(model.n_ee(), setup.contact, setup.sim.stance_threshold,
                            setup.sim.ground_fit);

  VectorXd x = setup.x0;
  mpc.initialize(x, 0.0);

  struct Pending {
    double t_available;
    MpcPolicy policy;
    UpdateRecord record;
  };
  std::deque<Pending> pending;
  MpcPolicy active = mpc.policy();
  UpdateRecord active_record;
  active_record.cost = mpc.diagnostics().cost;
  active_record.defect_norm = mpc.diagnostics().defect_norm;
  active_record.alpha = mpc.diagnostics().alpha;
  double solver_free = 0.0;
  double last_cycle = setup.sim.lockstep_solve_time;

  for (int k = 0; k < ticks; ++k) {
    const double t = k * dt_track;
    while (!pending.empty() && pending.front().t_available <= t + kTimeEps) {
      active = std::move(pending.front().policy);
      active_record = pending.front().record;
      pending.pop_front();
    }

    const RobotDynamics& plant_dyn = plant.dynamics_at(t);
    const VectorXd fn = plant_dyn.normal_forces(x);
    if (setup.sim.estimate_ground) estimator.observe(model, x, fn);

    if (t >= solver_free - kTimeEps) {
      const VectorXd x_meas = measure(x);
      if (setup.sim.estimate_ground && estimator.has_estimate()) {
        mpc.solver().set_system(std::make_shared<RobotDynamics>(
            model_ptr, setup.contact, std::vector<GroundPlane>{estimator.estimate()}));
      }
      UpdateRecord rec;
      rec.t_meas = t;
      double charged = 0.0;
      double busy = 0.0;
      try {
        const auto start = std::chrono::steady_clock::now();
        MpcPolicy next = mpc.update(x_meas, t);
        const MpcDiagnostics fb_diag = mpc.diagnostics();
        double prepare_ms = 0.0;
        if (gnms) {
          const double expected_cycle = setup.sim.lockstep ? setup.sim.lockstep_solve_time : last_cycle;
          const double t_next = std::ceil((t + expected_cycle) / dt_track - kTimeEps) * dt_track;
          mpc.preparation_phase_gnms(t_next);
          prepare_ms = mpc.diagnostics().prepare_ms;
        }
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        rec.prepare_ms = prepare_ms;
        rec.cost = fb_diag.cost;
        rec.defect_norm = fb_diag.defect_norm;
        rec.ff_norm = fb_diag.ff_norm;
        rec.alpha = fb_diag.alpha;
        rec.handoff_jump = fb_diag.handoff_jump;
        rec.fallback = fb_diag.fallback;
        if (setup.sim.lockstep) {
          charged = setup.sim.lockstep_solve_time;
          busy = charged;
        } else {
          charged = fb_diag.solve_ms / 1000.0;
          busy = rec.wall_ms / 1000.0;
          last_cycle = busy;
        }
        rec.solve_ms = charged * 1000.0;
        rec.t_available = t + std::max(setup.plant.delay, charged);
        pending.push_back({rec.t_available, std::move(next), rec});
      } catch (const Error& e) {
        log.success = false;
        log.failure = std::string("solver diverged: ") + e.what();
        break;
      }
      log.updates.push_back(rec);
      solver_free = t + busy;
    }

    const TrackingOutput out = tracking_control(active, measure(x), t, setup.tracking);
    LogRow row;
    row.time = t;
    row.state = x;
    row.torque = out.torque;
    row.ff = out.ff;
    row.fb = out.fb;
    row.pd = out.pd;
    row.solve_ms = active_record.solve_ms;
    row.cost = active_record.cost;
    row.defect_norm = active_record.defect_norm;
    row.alpha = active_record.alpha;
    row.normal_forces = fn;
    row.reference = active.policy.x_ref[static_cast<std::size_t>(active.stage_at(t))];
    row.saturated = out.saturated;
    log.rows.push_back(std::move(row));

    try {
      for (int s = 0; s < substeps; ++s) x = plant.step(x, out.torque, t + s * setup.plant.h);
    } catch (const NonFiniteState& e) {
      log.success = false;
      log.failure = std::string("plant diverged: ") + e.what();
      break;
    }
    if (x(1) < setup.sim.fall_fraction * log.nominal_height) {
      log.success = false;
      log.failure = "fall detected at t = " + std::to_string(t + dt_track);
      break;
    }
  }
  return log;
}

}  // namespace wbmpc
