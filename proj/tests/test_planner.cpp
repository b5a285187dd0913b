#include <doctest.h>

#include "lcplan/planner.hpp"
#include "lcplan/simulation.hpp"

using namespace lcplan;

namespace {

Scenario smallScenario() {
  Scenario s;
  s.name = "small";
  s.hv_count = 3;
  s.duration_s = 40;
  s.lc_start_s = 5;
  s.hv_initial_spacing_m = quasiSteadySpacing(25.0, s.hv_params);
  return s;
}

PlannerConfig coarse() {
  PlannerConfig c;
  c.t_step = 0.5;
  c.xf_step = 5.0;
  return c;
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("without a plan the AV keeps its lane and speed") {
  const SimulationLog log = runScenario(smallScenario());
  for (const auto& r : log.vehicle(kAvId)) {
    CHECK(r.lane == 0);
    CHECK(r.y == 0.0);
    CHECK(r.v == doctest::Approx(25.0));
  }
  CHECK(log.events.empty());
}

TEST_CASE("a planned lane change ends in the target lane with ordered events") {
  const Scenario s = smallScenario();
  const LaneChangeProblem problem(s);
  const Trajectory tr = problem.trajectoryFor(5.0, 125.0);
  const SimulationLog log = runScenario(s, tr);
  const double t0 = *log.eventTime("lc_start"), th = *log.eventTime("handoff"), t1 = *log.eventTime("lc_end");
  CHECK(t0 == doctest::Approx(5.0));
  CHECK(t0 <= th);
  CHECK(th <= t1);
  CHECK(t1 == doctest::Approx(10.0));
  CHECK(th - t0 == doctest::Approx(lateralCrossingTime(tr, s.lane_width_m)).epsilon(1e-6));
  const auto av = log.vehicle(kAvId);
  CHECK(av.back().y == doctest::Approx(s.lane_width_m));
  // the AV sits av_gap ahead of HV1 when the manoeuvre starts
  for (const auto& r : log.records)
    if (r.id == 1 && std::abs(r.t - t0) < 1e-9) {
      for (const auto& a : av)
        if (std::abs(a.t - t0) < 1e-9) CHECK(a.x - r.x == doctest::Approx(s.av_gap_m));
    }
}

TEST_CASE("scenario validation") {
  Scenario s = smallScenario();
  s.step_s = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = smallScenario();
  s.hv_count = 0;
  CHECK_NOTHROW(s.validate());
}

}

TEST_SUITE("planner") {

TEST_CASE("returned plan is feasible at ten times finer sampling and not worse than the grid") {
  const Scenario s = smallScenario();
  const LaneChangeProblem problem(s);
  const PlannerConfig cfg = coarse();
  CostWeights w;
  w.omega_av = 0.5;
  const PlanResult plan = optimize(problem, w, cfg);
  CHECK(plan.best.feasible);
  CHECK(plan.best.loss.joint_total <= plan.grid_best.loss.joint_total);
  const Rollout r = problem.rollout(plan.trajectory);
  const Trajectory fine = makeTrajectory(plan.trajectory.coeffs, plan.trajectory.duration, s.step_s / 10);
  CHECK(checkFeasibility(fine, r, s, cfg, s.step_s / 10).feasible);
  CHECK(std::isfinite(plan.best.loss.joint_total));
}

TEST_CASE("a larger penalty does not change the chosen candidate") {
  const Scenario s = smallScenario();
  const LaneChangeProblem problem(s);
  PlannerConfig cfg = coarse();
  const CostWeights w;
  const PlanResult a = optimize(problem, w, cfg);
  cfg.infeasible_penalty *= 10;
  const PlanResult b = optimize(problem, w, cfg);
  CHECK(a.best.duration == b.best.duration);
  CHECK(a.best.x_final == b.best.x_final);
}

TEST_CASE("single-weight sweep equals a direct optimisation") {
  const Scenario s = smallScenario();
  const LaneChangeProblem problem(s);
  const PlannerConfig cfg = coarse();
  CostWeights w;
  w.omega_av = 1.0;
  const PlanResult direct = optimize(problem, w, cfg);
  const std::vector<double> one{1.0};
  const auto rows = sweepOmega(problem, one, CostWeights{}, cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].best.loss == direct.best.loss);
  CHECK_THROWS_AS(sweepOmega(problem, std::vector<double>{0.0}, CostWeights{}, cfg), std::invalid_argument);
}

TEST_CASE("speed bounds that exclude the entry speed leave nothing feasible") {
  const Scenario s = smallScenario();
  const LaneChangeProblem problem(s);
  PlannerConfig cfg = coarse();
  cfg.v_max = 20.0;
  CHECK_THROWS_AS(optimize(problem, CostWeights{}, cfg), NoFeasibleCandidate);
}

TEST_CASE("feasibility reports bound violations by name") {
  const Scenario s = smallScenario();
  const LaneChangeProblem problem(s);
  const Trajectory harsh = problem.trajectoryFor(1.5, 20.0);  // stops short: violent braking
  const Rollout r = problem.rollout(harsh);
  const auto rep = checkFeasibility(harsh, r, s, coarse(), s.step_s);
  CHECK_FALSE(rep.feasible);
  CHECK(rep.magnitude > 0);
  CHECK_FALSE(rep.violations.empty());
}

TEST_CASE("candidate losses match an independent recomputation") {
  const Scenario s = smallScenario();
  const LaneChangeProblem problem(s);
  CostWeights w;
  w.omega_av = 0.8;
  Rollout r;
  const auto ev = evaluateCandidate(problem, 6.0, 150.0, w, coarse(), &r);
  const Trajectory tr = problem.trajectoryFor(6.0, 150.0);
  double comfort = 0, eff = 0;
  for (const auto& smp : tr.samples) {
    comfort += std::abs(smp.jx) + std::abs(smp.jy);
    eff += std::abs(std::hypot(smp.vx, smp.vy) - s.av_desired_speed_mps);
  }
  CHECK(ev.loss.av_comfort == doctest::Approx(comfort));
  CHECK(ev.loss.av_efficiency == doctest::Approx(eff));
  double hv_c = 0;
  for (std::size_t i = 0; i < r.series.size(); ++i) {
    double c = 0;
    for (double j : r.series[i].jerk) c += std::abs(j);
    hv_c += problem.hvWeighting().omega[i] * c;
  }
  CHECK(ev.loss.hv_comfort == doctest::Approx(hv_c));
  CHECK(ev.loss.joint_total == doctest::Approx(0.8 * ev.loss.av_total + 0.2 * ev.loss.hv_total));
}

}
