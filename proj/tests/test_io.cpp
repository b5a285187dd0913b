#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "lcplan/io.hpp"

using namespace lcplan;
namespace fs = std::filesystem;

namespace {

fs::path scratchDir(const char* name) {
  const fs::path d = fs::temp_directory_path() / ("lcplan_test_" + std::string(name));
  fs::create_directories(d);
  return d;
}

std::string messageOf(const std::string& yaml) {
  try {
    parseScenarioFile(yaml, "case.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TrajectoryCsv csvOf(const std::string& text) {
  std::istringstream in(text);
  return parseTrajectoryCsv(in, "case.csv");
}

// Leader 2 ahead of follower 1 in lane 3, `n` frames at 0.04 s.
std::string pairCsv(int n, int change_lane_at = -1) {
  std::ostringstream s;
  s << "time_s,vehicle_id,lane_id,x_m,y_m,vx_mps,ax_mps2,leader_id,length_m\n";
  for (int k = 0; k < n; ++k) {
    const double t = 0.04 * k;
    const int lane = change_lane_at >= 0 && k >= change_lane_at ? 4 : 3;
    s << t << ",2," << lane << ',' << 40 + 20 * t << ",0,20,0,0,4.5\n";
    s << t << ",1," << lane << ',' << 20 * t << ",0,20,0,2,4.2\n";
  }
  return s.str();
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("bundled benchmark scenario carries the reference parameters") {
  const ScenarioFile f = loadScenarioFile(fs::path(LCPLAN_SOURCE_DIR) / "scenarios/benchmark.yaml");
  const Scenario& s = f.scenario;
  CHECK(s.hv_count == 10);
  CHECK(s.lc_start_s == 80.0);
  CHECK(s.av_gap_m == 10.0);
  CHECK(s.hv_params.max_accel == 2.81);
  CHECK(s.hv_params.own_decel == 6.14);
  CHECK(s.hv_params.leader_decel == 5.95);
  CHECK(s.hv_params.reaction_time == 0.46);
  CHECK(s.hv_params.leader_length == 5.03);
  CHECK(s.hv_initial_spacing_m == doctest::Approx(quasiSteadySpacing(25.0, s.hv_params)).epsilon(1e-9));
  CHECK(s.weights.omega_av == 1.0);
}

TEST_CASE("scenario files round-trip exactly") {
  ScenarioFile f;
  f.scenario.name = "odd";
  f.scenario.av_gap_m = 0.1 + 0.2;
  f.scenario.hv_count = 3;
  f.scenario.hv_params_per_vehicle = {LcmParams{}, LcmParams{3.0, 6.0, 6.0, 0.7, 27.0, 4.8}, LcmParams{}};
  f.scenario.target_leader = TargetLeader{77.7, 23.3};
  f.scenario.handoff = HandoffMode::LcStart;
  f.scenario.weights.omega_av = 1.0 / 3.0;
  f.planner.refine = false;
  f.planner.t_step = 0.25;
  f.tracker.q = Eigen::Vector3d(1.0 / 7.0, 2.0, 3.0);
  f.tracker.qp.tolerance = 1e-11;
  f.metrics.clip = EdieClip::Step;
  f.calibration.objective = ObjectiveKind::SpeedRmse;
  f.calibration.seed = 18446744073709551615ull;
  f.calibration.bounds[2] = {0.05, 3.0};
  const ScenarioFile back = parseScenarioFile(serializeScenarioFile(f));
  CHECK(back == f);
  CHECK(parseScenarioFile(serializeScenarioFile(ScenarioFile{})) == ScenarioFile{});
}

TEST_CASE("unknown keys are reported with position and unit hint") {
  const std::string msg = messageOf("schema_version: 1\nscenario:\n  step: 0.1\n");
  CHECK(msg.find("case.yaml:3:") != std::string::npos);
  CHECK(msg.find("scenario.step") != std::string::npos);
  CHECK(msg.find("step_s") != std::string::npos);
  CHECK(messageOf("schema_version: 1\nbogus: 2\n").find("unknown key 'bogus'") != std::string::npos);
}

TEST_CASE("bad values are rejected") {
  CHECK_FALSE(messageOf("schema_version: 2\n").empty());
  CHECK_FALSE(messageOf("scenario:\n  duration_s: abc\n").empty());
  CHECK_FALSE(messageOf("scenario:\n  step_s: -0.1\n").empty());
  CHECK_FALSE(messageOf("scenario:\n  handoff: sideways\n").empty());
  CHECK_FALSE(messageOf("scenario:\n  hvs:\n    count: 2.5\n").empty());
  CHECK_FALSE(messageOf("tracker:\n  q: [1, 2]\n").empty());
  CHECK_FALSE(messageOf("weights:\n  omega_av: 1.5\n").empty());
  CHECK_FALSE(messageOf("scenario: [1, 2]\n").empty());
  CHECK_FALSE(messageOf("a: [\n").empty());
  CHECK(messageOf("scenario:\n  hvs:\n    count: 0\n").empty());
}

TEST_CASE("trajectory CSV parsing") {
  const TrajectoryCsv ok = csvOf(pairCsv(5));
  CHECK(ok.rows.size() == 10);
  CHECK(ok.step == doctest::Approx(0.04));
  // column order does not matter
  const TrajectoryCsv shuffled =
      csvOf("vehicle_id,time_s,lane_id,y_m,x_m,vx_mps,ax_mps2,leader_id,length_m\n1,0,1,0,5,20,0,0,4\n1,0.1,1,0,7,20,0,0,4\n");
  CHECK(shuffled.rows[1].x == 7.0);
  CHECK_THROWS_AS(csvOf("time_s,vehicle_id\n"), ConfigError);
  CHECK_THROWS_AS(csvOf("time_s,vehicle_id,lane_id,x_m,y_m,vx_mps,ax_mps2,leader_id,length_m,color\n"), ConfigError);
  const std::string head = "time_s,vehicle_id,lane_id,x_m,y_m,vx_mps,ax_mps2,leader_id,length_m\n";
  CHECK_THROWS_AS(csvOf(head + "0,1,1,0,0,20,0,0,4\n0.1,1,1,2,0,20,0,0,4\n0.3,1,1,6,0,20,0,0,4\n"), ConfigError);
  CHECK_THROWS_AS(csvOf(head + "0.1,1,1,0,0,20,0,0,4\n0,1,1,2,0,20,0,0,4\n"), ConfigError);
  CHECK_THROWS_AS(csvOf(head + "0,1,1,0,0,20,0,0,4\n"), ConfigError);
  CHECK_THROWS_AS(csvOf(head + "0,1,1,zero,0,20,0,0,4\n0.1,1,1,2,0,20,0,0,4\n"), ConfigError);
  CHECK_THROWS_AS(csvOf(""), ConfigError);
}

TEST_CASE("car-following extraction") {
  const CfExtraction one = extractCfPairs(csvOf(pairCsv(50)));
  REQUIRE(one.records.size() == 1);
  const TrajectoryRecord& r = one.records[0];
  CHECK(r.size() == 50);
  CHECK(r.leader_id == 2);
  CHECK(r.follower_id == 1);
  CHECK(r.spacing(0) == doctest::Approx(40.0));
  CHECK(r.leader_length == 4.5);
  CHECK(r.name == "f1_l2_0");

  const CfExtraction split = extractCfPairs(csvOf(pairCsv(50, 20)));
  REQUIRE(split.records.size() == 2);
  CHECK(split.records[0].size() == 20);
  CHECK(split.records[1].size() == 30);
  CHECK(extractCfPairs(csvOf(pairCsv(50, 20)), 25).records.size() == 1);

  const std::string head = "time_s,vehicle_id,lane_id,x_m,y_m,vx_mps,ax_mps2,leader_id,length_m\n";
  CHECK_THROWS_AS(extractCfPairs(csvOf(head + "0,1,1,0,0,20,0,1,4\n0.1,1,1,2,0,20,0,1,4\n")), ConfigError);
  const CfExtraction dangling = extractCfPairs(csvOf(head + "0,1,1,0,0,20,0,9,4\n0.1,1,1,2,0,20,0,9,4\n"));
  CHECK(dangling.records.empty());
  CHECK(dangling.warnings.size() == 1);
}

TEST_CASE("simulation log CSV round-trip") {
  Scenario s;
  s.hv_count = 2;
  s.duration_s = 3;
  s.lc_start_s = 1;
  s.hv_initial_spacing_m = 60;
  const SimulationLog log = runScenario(s, makeTrajectory(symmetricCoeffs(25.0, 1.5, 37.0, 3.5), 1.5, 0.1));
  const fs::path p = scratchDir("log") / "log.csv";
  writeLogCsv(log, p);
  const SimulationLog back = readLogCsv(p);
  CHECK(back.step == log.step);
  CHECK(back.events == log.events);
  REQUIRE(back.records.size() == log.records.size());
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto &a = log.records[i], &b = back.records[i];
    CHECK((a.t == b.t && a.id == b.id && a.lane == b.lane && a.x == b.x && a.y == b.y && a.v == b.v && a.a == b.a &&
           a.jerk == b.jerk && a.heading == b.heading && a.headway == b.headway && a.spacing == b.spacing));
  }
}

TEST_CASE("plan JSON round-trip") {
  PlanResult plan;
  plan.trajectory = makeTrajectory(symmetricCoeffs(25.0, 9.5, 237.5, 3.5), 9.5, 0.1);
  plan.rollout.lc_start = 80.0;
  plan.rollout.av_x0 = 1234.5;
  const fs::path p = scratchDir("plan") / "plan.json";
  writeJson(planToJson(plan, Scenario{}), p);
  const StoredPlan back = planFromJson(readJson(p));
  CHECK(back.lc_start_s == 80.0);
  CHECK(back.x0 == 1234.5);
  CHECK(back.trajectory.coeffs.lon == plan.trajectory.coeffs.lon);
  CHECK(back.trajectory.coeffs.lat == plan.trajectory.coeffs.lat);
  CHECK(back.trajectory.samples.size() == plan.trajectory.samples.size());
  nlohmann::json broken = planToJson(plan, Scenario{});
  broken["trajectory"]["coeffs"]["lon"] = {1, 2};
  CHECK_THROWS_AS(planFromJson(broken), ConfigError);
}

}
