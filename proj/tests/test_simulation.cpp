#include <doctest.h>

#include "lcplan/simulation.hpp"

using namespace lcplan;

namespace {

// One vehicle per id moving at constant speed from x0, sampled every dt.
SimulationLog constantSpeedLog(const std::vector<std::tuple<int, double, double>>& vehicles, double dt, double t_end) {
  SimulationLog log;
  log.step = dt;
  const auto n = static_cast<long>(std::llround(t_end / dt));
  for (long k = 0; k <= n; ++k)
    for (const auto& [id, x0, v] : vehicles) {
      VehicleRecord r;
      r.t = k * dt;
      r.id = id;
      r.x = x0 + v * r.t;
      r.v = v;
      log.records.push_back(r);
    }
  return log;
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("Edie quantities from totals satisfy q = k v") {
  for (auto [t, d] : {std::pair{92.7, 1786.56}, {96.3, 1758.72}, {12.0, 300.0}}) {
    const MetricsReport m = edieFromTotals(t, d, 3375.0);
    CHECK(std::abs(m.flow_vph - m.density_vpkm * m.speed_kmh) < 1e-9 * m.flow_vph);
  }
  CHECK(edieFromTotals(0.0, 0.0, 3375.0).empty);
  CHECK_THROWS_AS(edieFromTotals(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("published region totals give the published flow, speed and density") {
  const MetricsReport opt = edieFromTotals(92.70, 1786.56, 225.0 * 15.0);
  CHECK(opt.flow_vph == doctest::Approx(1905.666).epsilon(5e-3));
  CHECK(opt.speed_kmh == doctest::Approx(69.381).epsilon(5e-3));
  CHECK(opt.density_vpkm == doctest::Approx(27.467).epsilon(5e-3));
  const MetricsReport base = edieFromTotals(96.30, 1758.72, 225.0 * 15.0);
  CHECK(base.flow_vph == doctest::Approx(1875.963).epsilon(5e-3));
  CHECK(base.speed_kmh == doctest::Approx(65.746).epsilon(5e-3));
  CHECK(base.density_vpkm == doctest::Approx(28.533).epsilon(5e-3));
}

TEST_CASE("a vehicle crossing the region spends length / speed inside it") {
  const SimulationLog log = constantSpeedLog({{1, -13.0, 10.0}}, 0.1, 60);
  const EdieRegion region{0.0, 225.0, 0.0, 40.0};
  const MetricsReport m = edieMetrics(log, region);
  REQUIRE(m.per_vehicle.size() == 1);
  CHECK(m.per_vehicle[0].time == doctest::Approx(22.5).epsilon(1e-12));
  CHECK(m.per_vehicle[0].distance == doctest::Approx(225.0).epsilon(1e-12));
  const MetricsReport step = edieMetrics(log, region, EdieClip::Step);
  CHECK(std::abs(step.per_vehicle[0].time - 22.5) <= 0.1 + 1e-9);
}

TEST_CASE("region metrics add up over a split of the region") {
  const SimulationLog log = constantSpeedLog({{1, 0.0, 23.3}, {2, -70.0, 19.1}, {3, -160.0, 27.7}}, 0.1, 30);
  const EdieRegion whole{10.0, 225.0, 3.0, 15.0};
  const MetricsReport w = edieMetrics(log, whole);
  const MetricsReport a = edieMetrics(log, {10.0, 100.0, 3.0, 15.0});
  const MetricsReport b = edieMetrics(log, {110.0, 125.0, 3.0, 15.0});
  CHECK(std::abs(w.total_time - a.total_time - b.total_time) < 1e-9);
  CHECK(std::abs(w.total_distance - a.total_distance - b.total_distance) < 1e-9);
  const MetricsReport c = edieMetrics(log, {10.0, 225.0, 3.0, 6.35});
  const MetricsReport d = edieMetrics(log, {10.0, 225.0, 9.35, 8.65});
  CHECK(std::abs(w.total_time - c.total_time - d.total_time) < 1e-9);
}

TEST_CASE("AV and target leader are excluded from region metrics") {
  const SimulationLog log = constantSpeedLog({{kAvId, 0.0, 20.0}, {kTargetLeaderId, 10.0, 20.0}}, 0.1, 20);
  CHECK(edieMetrics(log, {0.0, 225.0, 0.0, 15.0}).empty);
}

TEST_CASE("travel-time difference") {
  const SimulationLog base = constantSpeedLog({{1, 0.0, 20.0}, {2, -50.0, 20.0}}, 0.1, 40);
  const SimulationLog slow = constantSpeedLog({{1, 0.0, 16.0}, {2, -50.0, 20.0}}, 0.1, 40);
  CHECK(tttDifference(base, base, 300.0, 40.0).total == 0.0);
  const TttResult r = tttDifference(slow, base, 300.0, 40.0);
  CHECK(r.total == doctest::Approx(300.0 / 16 - 300.0 / 20));
  CHECK(r.missing.empty());
  const TttResult late = tttDifference(slow, base, 300.0, 18.0);
  CHECK(late.missing.size() == 1);
  CHECK_THROWS_AS(tttDifference(slow, base, -10.0, 40.0), std::invalid_argument);
}

TEST_CASE("heatmap difference of a log with itself is zero") {
  const SimulationLog log = constantSpeedLog({{1, 0.0, 20.0}, {kAvId, 5.0, 20.0}}, 0.1, 5);
  const auto rows = heatmapDifference(log, log);
  CHECK(rows.size() == 51);
  for (const auto& r : rows) CHECK(r.v == 0.0);
  CHECK(heatmapRows(log).size() == 51);
}

TEST_CASE("scenario run records every vehicle at every step") {
  Scenario s;
  s.hv_count = 4;
  s.duration_s = 20;
  s.lc_start_s = 5;
  s.hv_initial_spacing_m = 60;
  const SimulationLog log = runScenario(s);
  CHECK(log.records.size() == 200 * 5);
  CHECK(log.vehicleIds() == std::vector<int>{0, 1, 2, 3, 4});
  s.target_leader = TargetLeader{80.0, 25.0};
  CHECK(runScenario(s).vehicleIds().back() == kTargetLeaderId);
}

TEST_CASE("a slow cut-in disturbance is damped upstream in a sparse platoon") {
  Scenario s;
  s.hv_count = 12;
  s.duration_s = 120;
  s.lc_start_s = 10;
  s.hv_initial_spacing_m = quasiSteadySpacing(25.0, s.hv_params);
  s.av_initial_speed_mps = s.av_target_speed_mps = s.av_desired_speed_mps = 15;
  s.av_gap_m = 50;
  const Trajectory tr = makeTrajectory(symmetricCoeffs(15.0, 6.0, 90.0, 3.5), 6.0, 0.1);
  const SimulationLog log = runScenario(s, tr);
  std::vector<double> vmin(13, 1e9);
  for (const auto& r : log.records)
    if (r.id >= 1 && r.id <= 12) vmin[static_cast<std::size_t>(r.id)] = std::min(vmin[static_cast<std::size_t>(r.id)], r.v);
  CHECK(vmin[1] < 15.0);
  CHECK(vmin[2] < 24.0);
  for (std::size_t i = 2; i <= 12; ++i) CHECK(vmin[i] >= vmin[i - 1]);
}

}
