#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcplan/cost.hpp"
#include "lcplan/engine.hpp"
#include "lcplan/trajectory.hpp"

namespace lcplan {

struct PlannerConfig {
  double t_min = 1.5;
  double t_max = 10.0;
  double t_step = 0.25;
  // x_final range as factors of the nominal distance T (v_start + v_end) / 2
  double xf_factor_min = 0.6;
  double xf_factor_max = 1.4;
  double xf_step = 2.0;
  double v_min = 5.0;
  double v_max = 30.0;
  double a_min = -8.0;
  double a_max = 8.0;
  double j_min = -8.0;
  double j_max = 8.0;
  double clearance_margin = 0.2;
  bool refine = true;
  double refine_tol = 1e-3;  // simplex diameter in grid-step units
  int refine_max_iter = 200;  // over all passes
  int refine_restarts = 2;    // extra passes, each a tenth the simplex size
  double infeasible_penalty = 1e6;

  void validate() const;
  bool operator==(const PlannerConfig&) const = default;
};

struct FeasibilityReport {
  bool feasible = true;
  double magnitude = 0.0;  // summed bound excess plus clearance deficit
  double min_clearance = 0.0;
  std::vector<std::string> violations;
};

struct CandidateEvaluation {
  double duration = 0.0;
  double x_final = 0.0;
  bool feasible = false;
  double violation_magnitude = 0.0;
  std::vector<std::string> violations;
  double min_clearance = 0.0;
  LossBreakdown loss;
};

/// Target-lane response to one candidate trajectory.
struct Rollout {
  double lc_start = 0.0;
  double av_x0 = 0.0;
  bool collided = false;
  std::string collision_message;
  std::vector<std::vector<VehicleRecord>> steps;  // records per step over the window
  std::vector<HvSeries> series;                   // per HV over the loss window
};

/// Pre-simulates the scenario up to the LC start and evaluates candidates
/// against copies of that snapshot.
class LaneChangeProblem {
 public:
  explicit LaneChangeProblem(const Scenario& scenario);

  const Scenario& scenario() const { return scenario_; }
  const TrafficEngine& snapshot() const { return snapshot_; }
  const HvWeighting& hvWeighting() const { return hv_weighting_; }
  /// Records of the run before the LC start (for full-run logs).
  const std::vector<std::vector<VehicleRecord>>& preLcSteps() const { return pre_steps_; }

  double nominalDistance(double duration) const;
  Trajectory trajectoryFor(double duration, double x_final) const;
  Rollout rollout(const Trajectory& traj) const;

 private:
  Scenario scenario_;
  TrafficEngine snapshot_;
  HvWeighting hv_weighting_;
  std::vector<std::vector<VehicleRecord>> pre_steps_;
};

/// Speed/acceleration/jerk bounds (acceleration and jerk extrema analytic,
/// speed at each sample) and elliptical clearance to every target-lane
/// vehicle at each sample time. Target-lane positions are interpolated
/// linearly between rollout steps.
FeasibilityReport checkFeasibility(const Trajectory& traj, const Rollout& rollout, const Scenario& scenario,
                                   const PlannerConfig& config, double sample_step);

CandidateEvaluation evaluateCandidate(const LaneChangeProblem& problem, double duration, double x_final,
                                      const CostWeights& weights, const PlannerConfig& config,
                                      Rollout* rollout_out = nullptr);

struct PlanResult {
  CandidateEvaluation best;
  CandidateEvaluation grid_best;
  std::vector<CandidateEvaluation> grid;
  int refine_iterations = 0;
  CostWeights weights;
  Trajectory trajectory;
  Rollout rollout;
};

class NoFeasibleCandidate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

PlanResult optimize(const LaneChangeProblem& problem, const CostWeights& weights, const PlannerConfig& config);

struct SweepRow {
  double omega_av = 0.0;
  CandidateEvaluation best;
};

std::vector<SweepRow> sweepOmega(const LaneChangeProblem& problem, std::span<const double> omegas,
                                 const CostWeights& base_weights, const PlannerConfig& config);

}  // namespace lcplan
