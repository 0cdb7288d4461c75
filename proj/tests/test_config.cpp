#include "helpers.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace wbmpc;
using namespace wbmpc::test;

namespace {

const char* kShipped[] = {"stand",       "hopper_stand", "lq_point_mass",   "trot",
                          "squat_jump",  "forward_jump", "disturbance_trot"};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

ConfigError parse_error(const std::string& text) {
  try {
    parse_task(text);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected a ConfigError");
  return ConfigError("", "");
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("shipped tasks parse and round trip") {
  for (const char* name : kShipped) {
    CAPTURE(name);
    const TaskConfig task = load_task(task_path(name));
    CHECK(task.name == name);
    const std::string once = serialize_task(task);
    const TaskConfig again = parse_task(once);
    CHECK(serialize_task(again) == once);
    CHECK(again.x0 == task.x0);
    CHECK(again.cost.running.front().state_weights == task.cost.running.front().state_weights);
    CHECK(again.cost.temporal.size() == task.cost.temporal.size());
    CHECK(again.solver.horizon == task.solver.horizon);
  }
}

TEST_CASE("symbolic references resolve") {
  const TaskConfig task = load_task(task_path("trot"));
  CHECK(task.cost.running.front().x_ref == task.nominal_state);
  CHECK(task.cost.running.front().u_ref == task.nominal_controls);
  CHECK(task.solver.horizon == 125);
  const auto& apex = task.cost.temporal.front();
  CHECK(apex.state_indices == std::vector<int>{3, 4});
  REQUIRE(apex.period.has_value());
  CHECK(*apex.period == doctest::Approx(0.4));
}

TEST_CASE("negative weight names the field and line") {
  const std::string text = read_file(task_path("stand"));
  const ConfigError e = parse_error(replace(text, "control_weights: ", "control_weights: -"));
  CHECK(e.field == "cost.running.control_weights");
  CHECK(e.line > 0);
  CHECK(std::string(e.what()).find("cost.running.control_weights") != std::string::npos);
}

TEST_CASE("malformed tasks are rejected") {
  const std::string text = read_file(task_path("stand"));
  CHECK(parse_error(replace(text, "name: stand", "name: stand\nbogus: 1")).field == "bogus");
  CHECK(parse_error(replace(text, "schema_version: 1", "schema_version: 7")).field ==
        "schema_version");
  CHECK(parse_error(replace(text, "horizon: 0.5", "horizon: 0.5003")).field.find("horizon") !=
        std::string::npos);
  CHECK_THROWS_AS(parse_task("name: [unclosed"), ConfigError);
  CHECK_THROWS_AS(load_task("/nonexistent/file.task"), ConfigError);
}

TEST_CASE("overrides") {
  TaskConfig task = load_task(task_path("stand"));
  Overrides o;
  o.solver = "gnms";
  o.horizon = 0.4;
  o.duration = 1.5;
  o.threads = 3;
  o.seed = 99;
  o.lockstep = false;
  o.output_dir = "elsewhere";
  apply_overrides(task, o);
  CHECK(task.solver.algorithm == Algorithm::gnms);
  CHECK(task.solver.horizon == 100);
  CHECK(task.solver.workers == 3);
  CHECK(task.sim.seed == 99);
  CHECK(!task.sim.lockstep);
  const std::string effective = serialize_task(task);
  CHECK(effective.find("horizon: 0.4") != std::string::npos);
  CHECK(effective.find("algorithm: gnms") != std::string::npos);
  CHECK(effective.find("duration: 1.5") != std::string::npos);

  Overrides bad;
  bad.control_dt = 0.003;  // 0.4 s is not a multiple
  CHECK_THROWS_AS(apply_overrides(task, bad), ConfigError);
  Overrides unknown;
  unknown.solver = "sqp";
  CHECK_THROWS_AS(apply_overrides(task, unknown), ConfigError);
}

TEST_CASE("point-mass tasks have no closed loop") {
  const TaskConfig task = load_task(task_path("lq_point_mass"));
  CHECK(!task.is_robot());
  CHECK(task.state_names() == std::vector<std::string>{"q0", "q1", "v0", "v1"});
  CHECK_THROWS_AS(closed_loop_setup(task), ConfigError);
}

}  // TEST_SUITE
