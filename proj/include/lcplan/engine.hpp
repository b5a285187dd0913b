#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lcplan/carfollow.hpp"
#include "lcplan/collision.hpp"
#include "lcplan/cost.hpp"
#include "lcplan/trajectory.hpp"

namespace lcplan {

enum class HandoffMode { LateralBoundary, LcStart };

/// Optional vehicle ahead of HV1 in the target lane.
struct TargetLeader {
  double spacing_m = 100.0;  // front-to-front ahead of HV1 at t = 0
  double speed_mps = 25.0;
  bool operator==(const TargetLeader&) const = default;
};

/// Physical scenario. Lane 0 is the AV's origin lane at y = 0, lane 1 the
/// target lane at y = lane_width. HV1's front bumper starts at x = 0 and the
/// i-th HV sits (i - 1) spacings behind it.
struct Scenario {
  std::string name = "scenario";
  double step_s = 0.1;
  double duration_s = 300.0;
  double lc_start_s = 80.0;
  double av_initial_speed_mps = 25.0;
  double av_target_speed_mps = 25.0;
  double av_desired_speed_mps = 25.0;
  double av_gap_m = 10.0;  // AV front minus HV1 front at LC start
  int hv_count = 10;
  double hv_initial_spacing_m = 25.0;
  double hv_initial_speed_mps = 25.0;
  double lane_width_m = 3.5;
  std::optional<TargetLeader> target_leader;
  LcmParams hv_params;
  std::vector<LcmParams> hv_params_per_vehicle;  // empty: hv_params for all
  LcmParams av_follow_params{2.81, 6.14, 5.95, 0.46, 25.0, 5.03};
  MotionLimits limits;
  CostWeights weights;
  CollisionConfig collision;
  HandoffMode handoff = HandoffMode::LateralBoundary;
  double hv_loss_settle_s = 0.0;

  void validate() const;
  LcmParams hvParams(int i) const;
  bool operator==(const Scenario&) const = default;
};

constexpr int kAvId = 0;
constexpr int kTargetLeaderId = 1000;

/// One vehicle at one time step: position/speed at t, acceleration and
/// jerk applied from t.
struct VehicleRecord {
  double t = 0.0;
  int id = 0;
  int lane = 1;
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double a = 0.0;
  double jerk = 0.0;
  double heading = 0.0;
  double headway = 0.0;  // spacing / speed to the current leader; 0 when free
  double spacing = 0.0;
};

enum class AvPhase { Cruise, LaneChange, Following };

/// Owns the target-lane platoon and the AV. Value type: copying an engine
/// snapshots the whole traffic state.
class TrafficEngine {
 public:
  explicit TrafficEngine(const Scenario& scenario);

  double time() const { return platoon_.time(); }
  const Scenario& scenario() const { return scenario_; }
  AvPhase avPhase() const { return phase_; }
  const PlatoonState& platoon() const { return platoon_; }
  double laneChangeStart() const { return lc_start_; }
  double handoffTime() const { return handoff_time_; }
  double laneChangeEnd() const { return lc_start_ + (traj_ ? traj_->duration : 0.0); }

  /// Starts the manoeuvre at the current time, placing the AV
  /// av_gap_m ahead of HV1 (or of the origin when the platoon is empty).
  void beginLaneChange(const Trajectory& traj);

  /// Position of the AV at the current time (x, y, heading, speed, accel).
  VehicleRecord avRecord() const;

  /// Advances one step and returns the records at the pre-step time.
  std::vector<VehicleRecord> step();

  /// HV indices into the platoon (excludes the target leader and the AV).
  std::vector<std::size_t> hvIndices() const;

 private:
  VehicleState avLongitudinal(double t) const;

  Scenario scenario_;
  PlatoonState platoon_;
  AvPhase phase_ = AvPhase::Cruise;
  std::optional<Trajectory> traj_;
  double lc_start_ = 0.0;
  double handoff_time_ = 0.0;
  double av_x0_ = 0.0;   // AV x at LC start
  double av_cruise_x_ = 0.0;
  std::size_t insert_before_ = 0;
};

/// First local time at which the lateral position reaches half the lane width.
double lateralCrossingTime(const Trajectory& traj, double lane_width);

}  // namespace lcplan
