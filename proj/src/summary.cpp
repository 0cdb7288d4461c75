#include "wbmpc/summary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace wbmpc {

Percentiles percentiles(std::vector<double> samples) {
  Percentiles p;
  if (samples.empty()) return p;
  std::sort(samples.begin(), samples.end());
  const auto n = samples.size();
  auto rank = [&](double q) {
    const auto r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    return samples[std::clamp<std::size_t>(r, 1, n) - 1];
  };
  p.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  p.p50 = rank(0.5);
  p.p90 = rank(0.9);
  p.p99 = rank(0.99);
  p.max = samples.back();
  return p;
}

RunSummary summarize(const ClosedLoopLog& log) {
  RunSummary s;
  s.success = log.success;
  s.failure = log.failure;
  s.updates = static_cast<int>(log.updates.size());
  if (log.rows.size() >= 2) {
    const double dt = log.rows[1].time - log.rows[0].time;
    s.duration = log.rows.back().time - log.rows.front().time + dt;
  }

  const auto nq = static_cast<int>(log.state_names.size() / 2);
  const int tail_start = static_cast<int>(0.9 * static_cast<double>(log.rows.size()));
  double tail_sum = 0.0;
  int tail_count = 0;
  int index = 0;
  for (const auto& r : log.rows) {
    const VectorXd e = r.state - r.reference;
    const double base = e.head<2>().norm();
    const double pitch = std::abs(e(2));
    const double joint = e.segment(3, nq - 3).lpNorm<Eigen::Infinity>();
    s.mean_base_error += base;
    s.mean_pitch_error += pitch;
    s.mean_joint_error += joint;
    s.max_base_error = std::max(s.max_base_error, base);
    s.max_pitch_error = std::max(s.max_pitch_error, pitch);
    s.max_joint_error = std::max(s.max_joint_error, joint);
    if (index++ >= tail_start) {
      tail_sum += base;
      ++tail_count;
    }
    s.max_abs_torque = std::max(s.max_abs_torque, r.torque.lpNorm<Eigen::Infinity>());
    const VectorXd commanded = r.ff + r.fb + r.pd;
    s.max_abs_commanded = std::max(s.max_abs_commanded, commanded.lpNorm<Eigen::Infinity>());
    if (r.saturated) ++s.saturation_count;
  }
  if (!log.rows.empty()) {
    const auto n = static_cast<double>(log.rows.size());
    s.mean_base_error /= n;
    s.mean_pitch_error /= n;
    s.mean_joint_error /= n;
  }
  if (tail_count > 0) s.final_base_error = tail_sum / tail_count;

  std::vector<double> solve;
  std::vector<double> wall;
  for (const auto& u : log.updates) {
    solve.push_back(u.solve_ms);
    wall.push_back(u.wall_ms);
    s.cost_trace.push_back(u.cost);
    if (u.fallback) ++s.fallbacks;
  }
  s.solve_ms = percentiles(solve);
  s.wall_ms = percentiles(wall);
  if (s.duration > 0) s.update_rate_hz = s.updates / s.duration;
  return s;
}

void write_summary(const RunSummary& s, std::ostream& out) {
  auto line = [&](const char* key, const auto& value) { out << key << ": " << value << '\n'; };
  auto stats = [&](const char* key, const Percentiles& p) {
    out << key << ": {mean: " << p.mean << ", p50: " << p.p50 << ", p90: " << p.p90
        << ", p99: " << p.p99 << ", max: " << p.max << "}\n";
  };
  line("success", s.success ? "true" : "false");
  if (!s.success) line("failure", "\"" + s.failure + "\"");
  line("duration_s", s.duration);
  line("updates", s.updates);
  line("fallbacks", s.fallbacks);
  line("update_rate_hz", s.update_rate_hz);
  stats("solve_ms", s.solve_ms);
  stats("wall_ms", s.wall_ms);
  line("mean_base_error_m", s.mean_base_error);
  line("max_base_error_m", s.max_base_error);
  line("final_base_error_m", s.final_base_error);
  line("mean_pitch_error_rad", s.mean_pitch_error);
  line("max_pitch_error_rad", s.max_pitch_error);
  line("mean_joint_error_rad", s.mean_joint_error);
  line("max_joint_error_rad", s.max_joint_error);
  line("max_abs_torque_nm", s.max_abs_torque);
  line("max_abs_commanded_nm", s.max_abs_commanded);
  line("saturation_count", s.saturation_count);
  out << "cost_trace: [";
  for (std::size_t i = 0; i < s.cost_trace.size(); ++i) out << (i ? ", " : "") << s.cost_trace[i];
  out << "]\n";
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DimensionMismatch("fit_line needs >= 2 points");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

}  // namespace wbmpc
