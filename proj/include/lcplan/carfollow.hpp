#pragma once

#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcplan {

/// Longitudinal Control Model driver parameters.
struct LcmParams {
  double max_accel = 2.81;        // A_i, m/s^2
  double own_decel = 6.14;        // b_i, m/s^2
  double leader_decel = 5.95;     // B_j, m/s^2
  double reaction_time = 0.46;    // tau_i, s
  double desired_speed = 25.0;    // m/s
  double leader_length = 5.03;    // L_j, m

  void validate() const;
  bool operator==(const LcmParams&) const = default;
};

/// Bounds applied uniformly to every LCM-driven vehicle.
struct MotionLimits {
  double v_max = 30.0;
  double a_min = -8.0;
  double a_max = 8.0;

  bool operator==(const MotionLimits&) const = default;
};

/// Longitudinal state; x is the front-bumper position.
struct VehicleState {
  int id = 0;
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
  int lane = 0;
};

class CollisionError : public std::runtime_error {
 public:
  CollisionError(int follower_id, int leader_id, double time, double spacing);
  int follower_id;
  int leader_id;
  double time;
  double spacing;
};

/// s* = v_i^2 / (2 b_i) - v_j^2 / (2 B_j) + v_i tau_i + L_j
double desiredSpacing(const VehicleState& follower, const VehicleState& leader, const LcmParams& p);

/// Unclamped LCM acceleration. Without a leader the spacing term vanishes
/// (free road). Throws CollisionError on non-positive spacing.
double lcmAccelerationRaw(const VehicleState& follower, const std::optional<VehicleState>& leader,
                          const LcmParams& p);

/// LCM acceleration clamped to [a_min, a_max].
double lcmAcceleration(const VehicleState& follower, const std::optional<VehicleState>& leader, const LcmParams& p,
                       const MotionLimits& limits = {});

/// Time derivative of the LCM acceleration (chain rule of the LCM law). The
/// spacing rate is v_j - v_i and the accelerations come from the states.
double lcmJerk(const VehicleState& follower, const std::optional<VehicleState>& leader, const LcmParams& p);

/// Time-indexed (t, x, v, a) samples with linear interpolation.
class StateHistory {
 public:
  struct Entry {
    double t, x, v, a;
  };

  void push(double t, double x, double v, double a);
  /// Pre-fills samples covering [t0 - span, t0] assuming constant speed.
  void seedSteady(double t0, double x0, double v0, double span, double dt);
  void setLatestAccel(double a);
  /// Interpolated state; times before the first entry extrapolate at constant speed.
  VehicleState at(double t) const;
  void trimBefore(double t);

  bool empty() const { return entries_.empty(); }
  const Entry& latest() const { return entries_.back(); }
  const std::deque<Entry>& entries() const { return entries_; }

 private:
  std::deque<Entry> entries_;
};

struct PlatoonMember {
  VehicleState state;
  LcmParams params;
  StateHistory history;
  double jerk = 0.0;        // analytic jerk of the most recent step
  double raw_accel = 0.0;   // before clamping
};

/// An externally driven leader (the lane-changing vehicle) inserted in front
/// of members[insert_before] once the perceived time reaches active_from.
struct ExternalLeader {
  int id = 0;
  double length = 5.0;
  double active_from = 0.0;
  std::size_t insert_before = 0;
  StateHistory history;
  VehicleState current;
};

/// One lane of LCM vehicles, leader first.
struct PlatoonState {
  double t0 = 0.0;
  long step_index = 0;
  double dt = 0.1;
  MotionLimits limits;
  std::vector<PlatoonMember> members;
  std::optional<ExternalLeader> external;

  double time() const { return t0 + static_cast<double>(step_index) * dt; }
  /// Leader state as perceived by member i at time t (history lookup).
  std::optional<VehicleState> leaderAt(std::size_t i, double t) const;
  /// Physical leader of member i at the current time: (state, length).
  std::optional<std::pair<VehicleState, double>> currentLeader(std::size_t i) const;
  double maxReactionTime() const;
};

/// Builds a platoon with histories seeded at steady speed.
PlatoonState makePlatoon(std::vector<VehicleState> vehicles, const std::vector<LcmParams>& params, double dt,
                         double t0 = 0.0, MotionLimits limits = {});

/// Advances one step: accelerations from delayed states, then semi-implicit
/// Euler (speed first, then position). When present, ext_state is the
/// external leader's state at the current time and is appended to its
/// history before the update. Throws CollisionError on overlap.
void stepPlatoon(PlatoonState& platoon, const std::optional<VehicleState>& ext_state = std::nullopt);

/// Spacing at which a follower at speed v behind a leader at the same speed
/// decelerates by at most accel_tol under LCM. Solved numerically; LCM has no
/// finite equilibrium at v = desired speed.
double quasiSteadySpacing(double v, const LcmParams& p, double accel_tol = 1e-3);

}  // namespace lcplan
