#include "wbmpc/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace wbmpc {

namespace {

using Names = std::vector<std::string>;

int line_of(const YAML::Node& n) {
  if (!n.IsDefined()) return -1;
  const auto mark = n.Mark();
  return mark.is_null() ? -1 : mark.line;
}

[[noreturn]] void fail(const YAML::Node& n, const std::string& path, const std::string& what) {
  throw ConfigError(path, what, line_of(n));
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void check_map(const YAML::Node& n, const std::string& path,
               std::initializer_list<const char*> allowed) {
  if (!n.IsMap()) fail(n, path, "expected a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) fail(kv.first, join(path, key), "unknown key");
  }
}

double as_double(const YAML::Node& n, const std::string& path) {
  if (!n.IsScalar()) fail(n, path, "expected a number");
  double v = 0.0;
  try {
    v = n.as<double>();
  } catch (const YAML::Exception&) {
    fail(n, path, "expected a number, got '" + n.Scalar() + "'");
  }
  if (!std::isfinite(v)) fail(n, path, "must be finite");
  return v;
}

template <typename Int>
Int as_int(const YAML::Node& n, const std::string& path) {
  if (!n.IsScalar()) fail(n, path, "expected an integer");
  try {
    return n.as<Int>();
  } catch (const YAML::Exception&) {
    fail(n, path, "expected an integer, got '" + n.Scalar() + "'");
  }
}

bool as_bool(const YAML::Node& n, const std::string& path) {
  if (!n.IsScalar()) fail(n, path, "expected true or false");
  try {
    return n.as<bool>();
  } catch (const YAML::Exception&) {
    fail(n, path, "expected true or false, got '" + n.Scalar() + "'");
  }
}

std::string as_string(const YAML::Node& n, const std::string& path) {
  if (!n.IsScalar()) fail(n, path, "expected a string");
  return n.Scalar();
}

void read(const YAML::Node& map, const std::string& path, const char* key, double& out) {
  if (const auto n = map[key]) out = as_double(n, join(path, key));
}

void read(const YAML::Node& map, const std::string& path, const char* key, int& out) {
  if (const auto n = map[key]) out = as_int<int>(n, join(path, key));
}

void read(const YAML::Node& map, const std::string& path, const char* key, bool& out) {
  if (const auto n = map[key]) out = as_bool(n, join(path, key));
}

void read(const YAML::Node& map, const std::string& path, const char* key, std::string& out) {
  if (const auto n = map[key]) out = as_string(n, join(path, key));
}

void require_nonnegative(const YAML::Node& n, const std::string& path, double v) {
  if (v < 0) fail(n, path, "must be non-negative");
}

void require_positive(const YAML::Node& n, const std::string& path, double v) {
  if (!(v > 0)) fail(n, path, "must be positive");
}

int resolve_index(const YAML::Node& n, const std::string& path, const Names& names) {
  if (!n.IsScalar()) fail(n, path, "expected an index or a coordinate name");
  const auto& s = n.Scalar();
  const auto it = std::find(names.begin(), names.end(), s);
  if (it != names.end()) return static_cast<int>(it - names.begin());
  int i = -1;
  try {
    i = n.as<int>();
  } catch (const YAML::Exception&) {
    fail(n, path, "unknown coordinate '" + s + "'");
  }
  if (i < 0 || i >= static_cast<int>(names.size()))
    fail(n, path, "index " + std::to_string(i) + " out of range");
  return i;
}

/// A scalar (broadcast), a list of exactly `names.size()` numbers, or a mapping from
/// coordinate names to values with an optional `default` for the rest.
VectorXd read_vector(const YAML::Node& n, const std::string& path, const Names& names,
                     bool nonnegative = false) {
  const auto size = static_cast<int>(names.size());
  VectorXd v(size);
  if (n.IsScalar()) {
    v.setConstant(as_double(n, path));
    if (nonnegative) require_nonnegative(n, path, v(0));
  } else if (n.IsSequence()) {
    if (static_cast<int>(n.size()) != size)
      fail(n, path, "expected " + std::to_string(size) + " values, got " + std::to_string(n.size()));
    for (int i = 0; i < size; ++i) {
      const auto p = join(path, names[i]);
      v(i) = as_double(n[i], p);
      if (nonnegative) require_nonnegative(n[i], p, v(i));
    }
  } else if (n.IsMap()) {
    v.setZero();
    if (const auto d = n["default"]) {
      v.setConstant(as_double(d, join(path, "default")));
      if (nonnegative) require_nonnegative(d, join(path, "default"), v(0));
    }
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (key == "default") continue;
      const auto p = join(path, key);
      const int i = resolve_index(kv.first, p, names);
      v(i) = as_double(kv.second, p);
      if (nonnegative) require_nonnegative(kv.second, p, v(i));
    }
  } else {
    fail(n, path, "expected a number, a list or a mapping");
  }
  return v;
}

/// Applies `{name: value}` entries on top of `v`, either replacing or adding.
void apply_entries(const YAML::Node& n, const std::string& path, const Names& names, VectorXd& v,
                   bool add) {
  if (!n.IsMap()) fail(n, path, "expected a mapping of coordinate names to values");
  for (const auto& kv : n) {
    const auto p = join(path, kv.first.as<std::string>());
    const int i = resolve_index(kv.first, p, names);
    const double value = as_double(kv.second, p);
    v(i) = add ? v(i) + value : value;
  }
}

Names numbered(const std::string& prefix, int n) {
  Names out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

Names control_names(const TaskConfig& task) {
  if (!task.is_robot()) return numbered("u", task.point_mass_dims);
  const Names s = task.state_names();
  return Names(s.begin() + RobotModel::base_dof, s.begin() + task.model.nq());
}

void parse_model(const YAML::Node& n, const std::string& path, TaskConfig& task) {
  check_map(n, path,
            {"type", "name", "base_mass", "base_inertia", "gravity", "legs", "joint_limits",
             "dims", "mass"});
  read(n, path, "type", task.model_type);
  if (task.model_type == "quadruped") {
    task.model = make_planar_quadruped();
  } else if (task.model_type == "hopper") {
    task.model = make_hopper();
  } else if (task.model_type == "point_mass") {
    for (const char* key : {"name", "base_mass", "base_inertia", "gravity", "legs", "joint_limits"})
      if (n[key]) fail(n[key], join(path, key), "not a point-mass parameter");
    read(n, path, "dims", task.point_mass_dims);
    read(n, path, "mass", task.point_mass_mass);
    if (task.point_mass_dims < 1) fail(n["dims"], join(path, "dims"), "must be >= 1");
    require_positive(n["mass"], join(path, "mass"), task.point_mass_mass);
    return;
  } else {
    fail(n["type"], join(path, "type"),
         "unknown model '" + task.model_type + "' (quadruped, hopper, point_mass)");
  }
  for (const char* key : {"dims", "mass"})
    if (n[key]) fail(n[key], join(path, key), "only valid for point_mass models");

  RobotModel& m = task.model;
  read(n, path, "name", m.name);
  read(n, path, "base_mass", m.base_mass);
  read(n, path, "base_inertia", m.base_inertia);
  read(n, path, "gravity", m.gravity);
  if (const auto legs = n["legs"]) {
    const auto lp = join(path, "legs");
    if (!legs.IsSequence() || legs.size() == 0) fail(legs, lp, "expected a non-empty list");
    m.legs.clear();
    for (std::size_t i = 0; i < legs.size(); ++i) {
      const auto p = at(lp, i);
      const auto& l = legs[i];
      check_map(l, p,
                {"hip_offset", "thigh_length", "shank_length", "thigh_mass", "shank_mass",
                 "thigh_inertia", "shank_inertia", "thigh_com", "shank_com"});
      LegParams leg;
      if (const auto h = l["hip_offset"]) {
        if (!h.IsSequence() || h.size() != 2) fail(h, join(p, "hip_offset"), "expected [x, z]");
        leg.hip_offset = Vector2d(as_double(h[0], join(p, "hip_offset")),
                                  as_double(h[1], join(p, "hip_offset")));
      }
      read(l, p, "thigh_length", leg.thigh_length);
      read(l, p, "shank_length", leg.shank_length);
      read(l, p, "thigh_mass", leg.thigh_mass);
      read(l, p, "shank_mass", leg.shank_mass);
      read(l, p, "thigh_inertia", leg.thigh_inertia);
      read(l, p, "shank_inertia", leg.shank_inertia);
      read(l, p, "thigh_com", leg.thigh_com);
      read(l, p, "shank_com", leg.shank_com);
      m.legs.push_back(leg);
    }
    if (static_cast<int>(m.joint_limits.size()) != m.nu()) m.joint_limits.clear();
  }
  if (const auto lim = n["joint_limits"]) {
    const auto lp = join(path, "joint_limits");
    if (!lim.IsSequence() || static_cast<int>(lim.size()) != m.nu())
      fail(lim, lp, "expected one [lower, upper] pair per joint");
    m.joint_limits.clear();
    for (std::size_t i = 0; i < lim.size(); ++i) {
      if (!lim[i].IsSequence() || lim[i].size() != 2) fail(lim[i], at(lp, i), "expected [lower, upper]");
      const Vector2d b(as_double(lim[i][0], at(lp, i)), as_double(lim[i][1], at(lp, i)));
      if (b(0) > b(1)) fail(lim[i], at(lp, i), "lower bound above upper bound");
      m.joint_limits.push_back(b);
    }
  }
  try {
    validate(m);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(n, path, e.what());
  }
}

void parse_nominal(const YAML::Node& n, const std::string& path, TaskConfig& task) {
  const Names xs = task.state_names();
  const Names us = control_names(task);
  if (!task.is_robot()) {
    task.nominal_state = VectorXd::Zero(static_cast<int>(xs.size()));
    task.nominal_controls = VectorXd::Zero(static_cast<int>(us.size()));
    if (!n) return;
    check_map(n, path, {"state", "controls"});
    if (const auto s = n["state"]) task.nominal_state = read_vector(s, join(path, "state"), xs);
    if (const auto u = n["controls"])
      task.nominal_controls = read_vector(u, join(path, "controls"), us);
    return;
  }
  task.nominal_joints = VectorXd(task.model.nu());
  for (int i = 0; i < task.model.n_ee(); ++i) task.nominal_joints.segment<2>(2 * i) << 0.5, -1.0;
  if (n) {
    check_map(n, path, {"joints", "base_x"});
    if (const auto j = n["joints"]) task.nominal_joints = read_vector(j, join(path, "joints"), us);
    read(n, path, "base_x", task.nominal_base_x);
  }
  try {
    const StaticStance stance = static_equilibrium(task.model, task.contact, task.ground(),
                                                   task.nominal_joints, task.nominal_base_x);
    task.nominal_state = stance.state;
    task.nominal_controls = stance.torques;
  } catch (const Error& e) {
    fail(n, path, std::string("no static stance: ") + e.what());
  }
  if (!task.nominal_state.allFinite()) fail(n, path, "no static stance for these joints");
}

/// x_ref: "nominal" or a vector; x_ref_set: entries replacing single coordinates.
VectorXd read_state_reference(const YAML::Node& term, const std::string& path,
                              const TaskConfig& task) {
  const Names xs = task.state_names();
  VectorXd ref = task.nominal_state;
  if (const auto r = term["x_ref"]) {
    if (r.IsScalar() && r.Scalar() == "nominal") {
      ref = task.nominal_state;
    } else {
      ref = read_vector(r, join(path, "x_ref"), xs);
    }
  }
  if (const auto s = term["x_ref_set"]) apply_entries(s, join(path, "x_ref_set"), xs, ref, false);
  return ref;
}

QuadraticTerm parse_running(const YAML::Node& n, const std::string& path, const TaskConfig& task) {
  check_map(n, path, {"state_weights", "control_weights", "x_ref", "x_ref_set", "u_ref"});
  const Names xs = task.state_names();
  const Names us = control_names(task);
  QuadraticTerm t;
  t.state_weights = VectorXd::Zero(static_cast<int>(xs.size()));
  t.control_weights = VectorXd::Zero(static_cast<int>(us.size()));
  if (const auto w = n["state_weights"])
    t.state_weights = read_vector(w, join(path, "state_weights"), xs, true);
  if (const auto w = n["control_weights"])
    t.control_weights = read_vector(w, join(path, "control_weights"), us, true);
  t.x_ref = read_state_reference(n, path, task);
  t.u_ref = task.nominal_controls;
  if (const auto r = n["u_ref"]) {
    if (r.IsScalar() && r.Scalar() == "gravity_compensation") {
      t.u_ref = task.nominal_controls;
    } else {
      t.u_ref = read_vector(r, join(path, "u_ref"), us);
    }
  }
  return t;
}

QuadraticTerm parse_final(const YAML::Node& n, const std::string& path, const TaskConfig& task) {
  check_map(n, path, {"state_weights", "x_ref", "x_ref_set"});
  const Names xs = task.state_names();
  QuadraticTerm t;
  t.state_weights = VectorXd::Zero(static_cast<int>(xs.size()));
  if (const auto w = n["state_weights"])
    t.state_weights = read_vector(w, join(path, "state_weights"), xs, true);
  t.x_ref = read_state_reference(n, path, task);
  return t;
}

TemporalActivation parse_temporal(const YAML::Node& n, const std::string& path,
                                  const TaskConfig& task) {
  check_map(n, path, {"name", "t_start", "t_end", "period", "indices", "target", "weights"});
  const Names xs = task.state_names();
  TemporalActivation t;
  read(n, path, "name", t.name);
  read(n, path, "t_start", t.t_start);
  read(n, path, "t_end", t.t_end);
  if (const auto p = n["period"]) t.period = as_double(p, join(path, "period"));
  const auto idx = n["indices"];
  if (!idx || !idx.IsSequence() || idx.size() == 0)
    fail(idx ? idx : n, join(path, "indices"), "expected a non-empty list of coordinates");
  Names picked;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    t.state_indices.push_back(resolve_index(idx[i], at(join(path, "indices"), i), xs));
    picked.push_back(xs[static_cast<std::size_t>(t.state_indices.back())]);
  }
  const auto k = static_cast<int>(picked.size());
  t.target = VectorXd(k);
  for (int i = 0; i < k; ++i) t.target(i) = task.nominal_state(t.state_indices[i]);
  if (const auto tg = n["target"]) {
    if (!(tg.IsScalar() && tg.Scalar() == "nominal"))
      t.target = read_vector(tg, join(path, "target"), picked);
  }
  t.weights = VectorXd::Zero(k);
  if (const auto w = n["weights"]) t.weights = read_vector(w, join(path, "weights"), picked, true);
  try {
    validate(t);
  } catch (const Error& e) {
    fail(n, path, e.what());
  }
  return t;
}

void parse_cost(const YAML::Node& n, const std::string& path, TaskConfig& task) {
  check_map(n, path, {"running", "final", "temporal"});
  CostFunction& c = task.cost;
  c = CostFunction{};
  if (const auto r = n["running"]) {
    const auto rp = join(path, "running");
    if (r.IsMap()) {
      c.running.push_back(parse_running(r, rp, task));
    } else if (r.IsSequence()) {
      for (std::size_t i = 0; i < r.size(); ++i) c.running.push_back(parse_running(r[i], at(rp, i), task));
    } else {
      fail(r, rp, "expected a term or a list of terms");
    }
  }
  if (const auto f = n["final"]) {
    c.final_term = parse_final(f, join(path, "final"), task);
  } else {
    c.final_term.state_weights = VectorXd::Zero(static_cast<int>(task.state_names().size()));
    c.final_term.x_ref = task.nominal_state;
  }
  if (const auto t = n["temporal"]) {
    const auto tp = join(path, "temporal");
    if (!t.IsSequence()) fail(t, tp, "expected a list");
    for (std::size_t i = 0; i < t.size(); ++i) c.temporal.push_back(parse_temporal(t[i], at(tp, i), task));
  }
}

void parse_solver(const YAML::Node& n, const std::string& path, TaskConfig& task) {
  NlocSettings& s = task.solver;
  if (!n) {
    s.control_dt = MpcSettings::default_control_dt(s.algorithm);
    return;
  }
  check_map(n, path,
            {"algorithm", "control_dt", "h_int", "scheme", "regularization",
             "adaptive_regularization", "max_escalations", "max_line_search_steps",
             "backtracking", "gnms_line_search", "defect_penalty", "cost_tolerance",
             "ff_tolerance", "defect_tolerance", "max_iterations", "workers", "cold_start_kp",
             "cold_start_kd"});
  if (const auto a = n["algorithm"]) {
    try {
      s.algorithm = algorithm_from_string(as_string(a, join(path, "algorithm")));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      fail(a, join(path, "algorithm"), e.what());
    }
  }
  s.control_dt = MpcSettings::default_control_dt(s.algorithm);
  read(n, path, "control_dt", s.control_dt);
  read(n, path, "h_int", s.integrator.h_int);
  if (const auto sc = n["scheme"]) {
    try {
      s.integrator.scheme = scheme_from_string(as_string(sc, join(path, "scheme")));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      fail(sc, join(path, "scheme"), e.what());
    }
  }
  read(n, path, "regularization", s.riccati.regularization);
  read(n, path, "adaptive_regularization", s.riccati.adaptive);
  read(n, path, "max_escalations", s.riccati.max_escalations);
  read(n, path, "max_line_search_steps", s.max_line_search_steps);
  read(n, path, "backtracking", s.backtracking);
  read(n, path, "gnms_line_search", s.gnms_line_search);
  read(n, path, "defect_penalty", s.defect_penalty);
  read(n, path, "cost_tolerance", s.cost_tolerance);
  read(n, path, "ff_tolerance", s.ff_tolerance);
  read(n, path, "defect_tolerance", s.defect_tolerance);
  read(n, path, "max_iterations", s.max_iterations);
  read(n, path, "workers", s.workers);
  read(n, path, "cold_start_kp", s.cold_start_kp);
  read(n, path, "cold_start_kd", s.cold_start_kd);
}

void parse_mpc(const YAML::Node& n, const std::string& path, TaskConfig& task) {
  task.mpc = MpcSettings::defaults(task.solver.algorithm);
  if (!n) return;
  check_map(n, path, {"horizon", "warm_start", "max_fallback_updates", "initial_iterations",
                     "reseed_defect"});
  read(n, path, "horizon", task.mpc.horizon);
  if (const auto w = n["warm_start"]) {
    try {
      task.mpc.warm_start = warm_start_from_string(as_string(w, join(path, "warm_start")));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      fail(w, join(path, "warm_start"), e.what());
    }
  }
  read(n, path, "max_fallback_updates", task.mpc.max_fallback_updates);
  read(n, path, "initial_iterations", task.mpc.initial_iterations);
  read(n, path, "reseed_defect", task.mpc.reseed_defect);
}

void parse_plant(const YAML::Node& n, const std::string& path, TaskConfig& task) {
  if (!n) return;
  check_map(n, path, {"h", "mass_scale", "inertia_scale", "delay", "noise"});
  PlantSettings& p = task.plant;
  read(n, path, "h", p.h);
  read(n, path, "mass_scale", p.mass_scale);
  read(n, path, "inertia_scale", p.inertia_scale);
  read(n, path, "delay", p.delay);
  if (const auto noise = n["noise"]) {
    const auto np = join(path, "noise");
    check_map(noise, np, {"base_pose", "joint_positions", "base_twist", "joint_velocities"});
    read(noise, np, "base_pose", p.noise_base_pose);
    read(noise, np, "joint_positions", p.noise_joint_positions);
    read(noise, np, "base_twist", p.noise_base_twist);
    read(noise, np, "joint_velocities", p.noise_joint_velocities);
  }
}

void parse_tracking(const YAML::Node& n, const std::string& path, TaskConfig& task) {
  const Names us = control_names(task);
  const auto nu = static_cast<int>(us.size());
  TrackingGains& g = task.tracking;
  g.kp = VectorXd::Constant(nu, 20.0);
  g.kd = VectorXd::Constant(nu, 0.5);
  if (!n) return;
  check_map(n, path, {"kp", "kd", "torque_limit", "dt"});
  if (const auto kp = n["kp"]) g.kp = read_vector(kp, join(path, "kp"), us, true);
  if (const auto kd = n["kd"]) g.kd = read_vector(kd, join(path, "kd"), us, true);
  read(n, path, "torque_limit", g.torque_limit);
  read(n, path, "dt", g.dt);
}

void parse_disturbances(const YAML::Node& n, const std::string& path, TaskConfig& task) {
  if (!n) return;
  if (!n.IsSequence()) fail(n, path, "expected a list of events");
  for (std::size_t i = 0; i < n.size(); ++i) {
    const auto p = at(path, i);
    const auto& e = n[i];
    check_map(e, p, {"kind", "start", "duration", "magnitude", "direction", "foot"});
    DisturbanceEvent ev;
    if (const auto k = e["kind"]) {
      try {
        ev.kind = disturbance_kind_from_string(as_string(k, join(p, "kind")));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& err) {
        fail(k, join(p, "kind"), err.what());
      }
    } else {
      fail(e, join(p, "kind"), "missing");
    }
    read(e, p, "start", ev.start);
    read(e, p, "duration", ev.duration);
    read(e, p, "magnitude", ev.magnitude);
    read(e, p, "foot", ev.foot);
    if (const auto d = e["direction"]) {
      if (!d.IsSequence() || d.size() != 2) fail(d, join(p, "direction"), "expected [x, z]");
      ev.direction = Vector2d(as_double(d[0], join(p, "direction")), as_double(d[1], join(p, "direction")));
    }
    try {
      validate(ev, task.model.n_ee());
    } catch (const Error& err) {
      fail(e, p, err.what());
    }
    task.disturbances.push_back(ev);
  }
}

void parse_sim(const YAML::Node& n, const std::string& path, TaskConfig& task) {
  if (!n) return;
  check_map(n, path,
            {"duration", "lockstep", "lockstep_solve_time", "seed", "fall_fraction",
             "stance_threshold", "estimate_ground", "ground_fit"});
  SimSettings& s = task.sim;
  read(n, path, "duration", s.duration);
  read(n, path, "lockstep", s.lockstep);
  read(n, path, "lockstep_solve_time", s.lockstep_solve_time);
  if (const auto seed = n["seed"]) s.seed = as_int<std::uint64_t>(seed, join(path, "seed"));
  read(n, path, "fall_fraction", s.fall_fraction);
  read(n, path, "stance_threshold", s.stance_threshold);
  read(n, path, "estimate_ground", s.estimate_ground);
  if (const auto f = n["ground_fit"]) {
    const auto name = as_string(f, join(path, "ground_fit"));
    if (name == "line") {
      s.ground_fit = GroundFit::line;
    } else if (name == "mean_height") {
      s.ground_fit = GroundFit::mean_height;
    } else {
      fail(f, join(path, "ground_fit"), "expected line or mean_height");
    }
  }
}

/// Derived quantities and cross-section checks, shared by parsing and overrides.
void finalize(TaskConfig& task, const YAML::Node& root) {
  auto section = [&](const char* key) { return root && root[key] ? root[key] : root; };
  try {
    task.solver.horizon = horizon_stages(task.mpc.horizon, task.solver.control_dt);
  } catch (const Error& e) {
    fail(section("mpc"), "mpc.horizon", e.what());
  }
  try {
    validate(task.solver);
  } catch (const Error& e) {
    fail(section("solver"), "solver", e.what());
  }
  if (task.mpc.max_fallback_updates < 0)
    fail(section("mpc"), "mpc.max_fallback_updates", "must be >= 0");
  if (task.mpc.initial_iterations < 0) fail(section("mpc"), "mpc.initial_iterations", "must be >= 0");
  if (!(task.mpc.reseed_defect > 0)) fail(section("mpc"), "mpc.reseed_defect", "must be > 0");
  const auto names = task.state_names();
  const auto nx = static_cast<int>(names.size());
  const auto nu = static_cast<int>(control_names(task).size());
  try {
    validate(task.cost, nx, nu);
  } catch (const Error& e) {
    fail(section("cost"), "cost", e.what());
  }
  if (task.cost.running.empty()) fail(section("cost"), "cost.running", "at least one running term");
  if (task.x0.size() != nx) fail(section("initial_state"), "initial_state", "wrong state size");
  if (!(task.sim.duration > 0)) fail(section("sim"), "sim.duration", "must be positive");
  if (!(task.sim.fall_fraction >= 0 && task.sim.fall_fraction < 1))
    fail(section("sim"), "sim.fall_fraction", "must be in [0, 1)");
  if (!(task.sim.lockstep_solve_time >= 0))
    fail(section("sim"), "sim.lockstep_solve_time", "must be non-negative");
  if (!task.is_robot()) return;
  try {
    validate(task.contact);
  } catch (const Error& e) {
    fail(section("contact"), "contact", e.what());
  }
  try {
    validate(task.plant);
  } catch (const Error& e) {
    fail(section("plant"), "plant", e.what());
  }
  try {
    validate(task.tracking, nu);
  } catch (const Error& e) {
    fail(section("tracking"), "tracking", e.what());
  }
  for (std::size_t i = 0; i < task.disturbances.size(); ++i) {
    try {
      validate(task.disturbances[i], task.model.n_ee());
    } catch (const Error& e) {
      fail(section("disturbances"), at("disturbances", i), e.what());
    }
  }
}

void emit_vector(YAML::Emitter& out, const VectorXd& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (int i = 0; i < v.size(); ++i) out << v(i);
  out << YAML::EndSeq;
}

}  // namespace

std::vector<std::string> TaskConfig::state_names() const {
  if (is_robot()) return wbmpc::state_names(model);
  Names out = numbered("q", point_mass_dims);
  for (const auto& s : numbered("v", point_mass_dims)) out.push_back(s);
  return out;
}

TaskConfig parse_task(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", e.msg, e.mark.line);
  }
  if (!root.IsMap()) throw ConfigError("", "task file must be a mapping");
  check_map(root, "",
            {"schema_version", "name", "model", "contact", "ground", "nominal", "initial_state",
             "cost", "solver", "mpc", "plant", "tracking", "disturbances", "sim", "output"});

  TaskConfig task;
  const auto version = root["schema_version"];
  if (!version) throw ConfigError("schema_version", "missing");
  task.schema_version = as_int<int>(version, "schema_version");
  if (task.schema_version != kSchemaVersion)
    fail(version, "schema_version",
         "unsupported version " + std::to_string(task.schema_version) + " (expected " +
             std::to_string(kSchemaVersion) + ")");
  read(root, "", "name", task.name);

  if (const auto m = root["model"]) {
    parse_model(m, "model", task);
  } else {
    task.model = make_planar_quadruped();
  }
  if (const auto c = root["contact"]) {
    check_map(c, "contact", {"k", "d", "alpha_k", "alpha_d"});
    read(c, "contact", "k", task.contact.k);
    read(c, "contact", "d", task.contact.d);
    read(c, "contact", "alpha_k", task.contact.alpha_k);
    read(c, "contact", "alpha_d", task.contact.alpha_d);
    try {
      validate(task.contact);
    } catch (const Error& e) {
      fail(c, "contact", e.what());
    }
  }
  if (const auto g = root["ground"]) {
    check_map(g, "ground", {"height", "incline"});
    read(g, "ground", "height", task.ground_height);
    read(g, "ground", "incline", task.ground_incline);
    if (std::abs(task.ground_incline) >= 1.5) fail(g, "ground.incline", "too steep");
  }
  parse_nominal(root["nominal"], "nominal", task);

  const Names xs = task.state_names();
  task.x0 = task.nominal_state;
  if (const auto s = root["initial_state"]) {
    check_map(s, "initial_state", {"state", "set", "offset"});
    if (const auto st = s["state"]) {
      if (!(st.IsScalar() && st.Scalar() == "nominal"))
        task.x0 = read_vector(st, "initial_state.state", xs);
    }
    if (const auto set = s["set"]) apply_entries(set, "initial_state.set", xs, task.x0, false);
    if (const auto off = s["offset"]) apply_entries(off, "initial_state.offset", xs, task.x0, true);
  }

  const auto cost = root["cost"];
  if (!cost) throw ConfigError("cost", "missing");
  parse_cost(cost, "cost", task);
  parse_solver(root["solver"], "solver", task);
  parse_mpc(root["mpc"], "mpc", task);
  parse_plant(root["plant"], "plant", task);
  parse_tracking(root["tracking"], "tracking", task);
  parse_disturbances(root["disturbances"], "disturbances", task);
  parse_sim(root["sim"], "sim", task);
  if (const auto o = root["output"]) {
    check_map(o, "output", {"dir"});
    read(o, "output", "dir", task.output_dir);
  }
  finalize(task, root);
  return task;
}

TaskConfig load_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read task file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_task(ss.str());
}

std::string serialize_task(const TaskConfig& task) {
  const Names xs = task.state_names();
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << task.schema_version;
  out << YAML::Key << "name" << YAML::Value << task.name;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "type" << YAML::Value << task.model_type;
  if (task.is_robot()) {
    const RobotModel& m = task.model;
    out << YAML::Key << "name" << YAML::Value << m.name;
    out << YAML::Key << "base_mass" << YAML::Value << m.base_mass;
    out << YAML::Key << "base_inertia" << YAML::Value << m.base_inertia;
    out << YAML::Key << "gravity" << YAML::Value << m.gravity;
    out << YAML::Key << "legs" << YAML::Value << YAML::BeginSeq;
    for (const auto& leg : m.legs) {
      out << YAML::BeginMap;
      out << YAML::Key << "hip_offset" << YAML::Value;
      emit_vector(out, leg.hip_offset);
      out << YAML::Key << "thigh_length" << YAML::Value << leg.thigh_length;
      out << YAML::Key << "shank_length" << YAML::Value << leg.shank_length;
      out << YAML::Key << "thigh_mass" << YAML::Value << leg.thigh_mass;
      out << YAML::Key << "shank_mass" << YAML::Value << leg.shank_mass;
      out << YAML::Key << "thigh_inertia" << YAML::Value << leg.thigh_inertia;
      out << YAML::Key << "shank_inertia" << YAML::Value << leg.shank_inertia;
      out << YAML::Key << "thigh_com" << YAML::Value << leg.thigh_com;
      out << YAML::Key << "shank_com" << YAML::Value << leg.shank_com;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    if (!m.joint_limits.empty()) {
      out << YAML::Key << "joint_limits" << YAML::Value << YAML::BeginSeq;
      for (const auto& b : m.joint_limits) emit_vector(out, b);
      out << YAML::EndSeq;
    }
  } else {
    out << YAML::Key << "dims" << YAML::Value << task.point_mass_dims;
    out << YAML::Key << "mass" << YAML::Value << task.point_mass_mass;
  }
  out << YAML::EndMap;

  out << YAML::Key << "contact" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "k" << YAML::Value << task.contact.k;
  out << YAML::Key << "d" << YAML::Value << task.contact.d;
  out << YAML::Key << "alpha_k" << YAML::Value << task.contact.alpha_k;
  out << YAML::Key << "alpha_d" << YAML::Value << task.contact.alpha_d;
  out << YAML::EndMap;
  out << YAML::Key << "ground" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "height" << YAML::Value << task.ground_height;
  out << YAML::Key << "incline" << YAML::Value << task.ground_incline;
  out << YAML::EndMap;

  out << YAML::Key << "nominal" << YAML::Value << YAML::BeginMap;
  if (task.is_robot()) {
    out << YAML::Key << "joints" << YAML::Value;
    emit_vector(out, task.nominal_joints);
    out << YAML::Key << "base_x" << YAML::Value << task.nominal_base_x;
  } else {
    out << YAML::Key << "state" << YAML::Value;
    emit_vector(out, task.nominal_state);
    out << YAML::Key << "controls" << YAML::Value;
    emit_vector(out, task.nominal_controls);
  }
  out << YAML::EndMap;

  out << YAML::Key << "initial_state" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "state" << YAML::Value;
  emit_vector(out, task.x0);
  out << YAML::EndMap;

  out << YAML::Key << "cost" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "running" << YAML::Value << YAML::BeginSeq;
  for (const auto& t : task.cost.running) {
    out << YAML::BeginMap;
    out << YAML::Key << "state_weights" << YAML::Value;
    emit_vector(out, t.state_weights);
    out << YAML::Key << "control_weights" << YAML::Value;
    emit_vector(out, t.control_weights);
    out << YAML::Key << "x_ref" << YAML::Value;
    emit_vector(out, t.x_ref);
    out << YAML::Key << "u_ref" << YAML::Value;
    emit_vector(out, t.u_ref);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "final" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "state_weights" << YAML::Value;
  emit_vector(out, task.cost.final_term.state_weights);
  out << YAML::Key << "x_ref" << YAML::Value;
  emit_vector(out, task.cost.final_term.x_ref);
  out << YAML::EndMap;
  if (!task.cost.temporal.empty()) {
    out << YAML::Key << "temporal" << YAML::Value << YAML::BeginSeq;
    for (const auto& t : task.cost.temporal) {
      out << YAML::BeginMap;
      out << YAML::Key << "name" << YAML::Value << t.name;
      out << YAML::Key << "t_start" << YAML::Value << t.t_start;
      out << YAML::Key << "t_end" << YAML::Value << t.t_end;
      if (t.period) out << YAML::Key << "period" << YAML::Value << *t.period;
      out << YAML::Key << "indices" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (int i : t.state_indices) out << xs[static_cast<std::size_t>(i)];
      out << YAML::EndSeq;
      out << YAML::Key << "target" << YAML::Value;
      emit_vector(out, t.target);
      out << YAML::Key << "weights" << YAML::Value;
      emit_vector(out, t.weights);
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;

  const NlocSettings& s = task.solver;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "algorithm" << YAML::Value << to_string(s.algorithm);
  out << YAML::Key << "control_dt" << YAML::Value << s.control_dt;
  out << YAML::Key << "h_int" << YAML::Value << s.integrator.h_int;
  out << YAML::Key << "scheme" << YAML::Value << to_string(s.integrator.scheme);
  out << YAML::Key << "regularization" << YAML::Value << s.riccati.regularization;
  out << YAML::Key << "adaptive_regularization" << YAML::Value << s.riccati.adaptive;
  out << YAML::Key << "max_escalations" << YAML::Value << s.riccati.max_escalations;
  out << YAML::Key << "max_line_search_steps" << YAML::Value << s.max_line_search_steps;
  out << YAML::Key << "backtracking" << YAML::Value << s.backtracking;
  out << YAML::Key << "gnms_line_search" << YAML::Value << s.gnms_line_search;
  out << YAML::Key << "defect_penalty" << YAML::Value << s.defect_penalty;
  out << YAML::Key << "cost_tolerance" << YAML::Value << s.cost_tolerance;
  out << YAML::Key << "ff_tolerance" << YAML::Value << s.ff_tolerance;
  out << YAML::Key << "defect_tolerance" << YAML::Value << s.defect_tolerance;
  out << YAML::Key << "max_iterations" << YAML::Value << s.max_iterations;
  out << YAML::Key << "workers" << YAML::Value << s.workers;
  out << YAML::Key << "cold_start_kp" << YAML::Value << s.cold_start_kp;
  out << YAML::Key << "cold_start_kd" << YAML::Value << s.cold_start_kd;
  out << YAML::EndMap;

  out << YAML::Key << "mpc" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "horizon" << YAML::Value << task.mpc.horizon;
  out << YAML::Key << "warm_start" << YAML::Value << to_string(task.mpc.warm_start);
  out << YAML::Key << "max_fallback_updates" << YAML::Value << task.mpc.max_fallback_updates;
  out << YAML::Key << "initial_iterations" << YAML::Value << task.mpc.initial_iterations;
  if (std::isfinite(task.mpc.reseed_defect))
    out << YAML::Key << "reseed_defect" << YAML::Value << task.mpc.reseed_defect;
  out << YAML::EndMap;

  const PlantSettings& p = task.plant;
  out << YAML::Key << "plant" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "h" << YAML::Value << p.h;
  out << YAML::Key << "mass_scale" << YAML::Value << p.mass_scale;
  out << YAML::Key << "inertia_scale" << YAML::Value << p.inertia_scale;
  out << YAML::Key << "delay" << YAML::Value << p.delay;
  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "base_pose" << YAML::Value << p.noise_base_pose;
  out << YAML::Key << "joint_positions" << YAML::Value << p.noise_joint_positions;
  out << YAML::Key << "base_twist" << YAML::Value << p.noise_base_twist;
  out << YAML::Key << "joint_velocities" << YAML::Value << p.noise_joint_velocities;
  out << YAML::EndMap;
  out << YAML::EndMap;

  out << YAML::Key << "tracking" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kp" << YAML::Value;
  emit_vector(out, task.tracking.kp);
  out << YAML::Key << "kd" << YAML::Value;
  emit_vector(out, task.tracking.kd);
  out << YAML::Key << "torque_limit" << YAML::Value << task.tracking.torque_limit;
  out << YAML::Key << "dt" << YAML::Value << task.tracking.dt;
  out << YAML::EndMap;

  if (!task.disturbances.empty()) {
    out << YAML::Key << "disturbances" << YAML::Value << YAML::BeginSeq;
    for (const auto& e : task.disturbances) {
      out << YAML::BeginMap;
      out << YAML::Key << "kind" << YAML::Value << to_string(e.kind);
      out << YAML::Key << "start" << YAML::Value << e.start;
      out << YAML::Key << "duration" << YAML::Value << e.duration;
      out << YAML::Key << "magnitude" << YAML::Value << e.magnitude;
      out << YAML::Key << "direction" << YAML::Value;
      emit_vector(out, e.direction);
      out << YAML::Key << "foot" << YAML::Value << e.foot;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }

  const SimSettings& sim = task.sim;
  out << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "duration" << YAML::Value << sim.duration;
  out << YAML::Key << "lockstep" << YAML::Value << sim.lockstep;
  out << YAML::Key << "lockstep_solve_time" << YAML::Value << sim.lockstep_solve_time;
  out << YAML::Key << "seed" << YAML::Value << sim.seed;
  out << YAML::Key << "fall_fraction" << YAML::Value << sim.fall_fraction;
  out << YAML::Key << "stance_threshold" << YAML::Value << sim.stance_threshold;
  out << YAML::Key << "estimate_ground" << YAML::Value << sim.estimate_ground;
  out << YAML::Key << "ground_fit" << YAML::Value
      << (sim.ground_fit == GroundFit::line ? "line" : "mean_height");
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << task.output_dir;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void apply_overrides(TaskConfig& task, const Overrides& o) {
  if (o.solver) {
    try {
      task.solver.algorithm = algorithm_from_string(*o.solver);
    } catch (const Error& e) {
      throw ConfigError("solver.algorithm", e.what());
    }
  }
  if (o.horizon) task.mpc.horizon = *o.horizon;
  if (o.control_dt) task.solver.control_dt = *o.control_dt;
  if (o.duration) task.sim.duration = *o.duration;
  if (o.threads) task.solver.workers = *o.threads;
  if (o.seed) task.sim.seed = *o.seed;
  if (o.lockstep) task.sim.lockstep = *o.lockstep;
  if (o.output_dir) task.output_dir = *o.output_dir;
  finalize(task, YAML::Node());
}

std::shared_ptr<const SecondOrderSystem> make_system(const TaskConfig& task) {
  if (!task.is_robot())
    return std::make_shared<LinearSecondOrderSystem>(
        LinearSecondOrderSystem::point_mass(task.point_mass_dims, task.point_mass_mass));
  return std::make_shared<RobotDynamics>(std::make_shared<RobotModel>(task.model), task.contact,
                                         std::vector<GroundPlane>{task.ground()});
}

NlocSolver make_solver(const TaskConfig& task) {
  return NlocSolver(make_system(task), task.cost, task.solver);
}

ClosedLoopSetup closed_loop_setup(const TaskConfig& task) {
  if (!task.is_robot()) throw ConfigError("model.type", "closed-loop runs need a legged robot model");
  ClosedLoopSetup s;
  s.model = task.model;
  s.contact = task.contact;
  s.ground = task.ground();
  s.x0 = task.x0;
  s.cost = task.cost;
  s.solver = task.solver;
  s.mpc = task.mpc;
  s.plant = task.plant;
  s.tracking = task.tracking;
  s.disturbances = task.disturbances;
  s.sim = task.sim;
  s.nominal_height = task.nominal_state(1);
  return s;
}

}  // namespace wbmpc
