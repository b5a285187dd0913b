#include "lcplan/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lcplan {

void Scenario::validate() const {
  if (!(step_s > 0)) throw std::invalid_argument("scenario: step must be > 0");
  if (!(duration_s > 0)) throw std::invalid_argument("scenario: duration must be > 0");
  if (lc_start_s < 0 || lc_start_s > duration_s) throw std::invalid_argument("scenario: LC start outside duration");
  if (hv_count < 0) throw std::invalid_argument("scenario: hv_count must be >= 0");
  if (hv_count > 1 && !(hv_initial_spacing_m > 0)) throw std::invalid_argument("scenario: HV spacing must be > 0");
  if (!(lane_width_m > 0)) throw std::invalid_argument("scenario: lane width must be > 0");
  if (!(av_initial_speed_mps > 0) || !(av_target_speed_mps > 0))
    throw std::invalid_argument("scenario: AV speeds must be > 0");
  if (!hv_params_per_vehicle.empty() && static_cast<int>(hv_params_per_vehicle.size()) != hv_count)
    throw std::invalid_argument("scenario: per-vehicle HV parameters must list hv_count entries");
  hv_params.validate();
  for (const auto& p : hv_params_per_vehicle) p.validate();
  av_follow_params.validate();
  weights.validate();
  collision.validate();
  if (hv_loss_settle_s < 0) throw std::invalid_argument("scenario: settle horizon must be >= 0");
}

LcmParams Scenario::hvParams(int i) const {
  return hv_params_per_vehicle.empty() ? hv_params : hv_params_per_vehicle.at(static_cast<std::size_t>(i));
}

double lateralCrossingTime(const Trajectory& traj, double lane_width) {
  const double target = lane_width / 2.0;
  double lo = 0.0, hi = traj.duration;
  if (evaluate(traj.coeffs, hi).y < target) return traj.duration;
  for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    (evaluate(traj.coeffs, mid).y >= target ? hi : lo) = mid;
  }
  return hi;
}

TrafficEngine::TrafficEngine(const Scenario& scenario) : scenario_(scenario) {
  scenario_.validate();
  std::vector<VehicleState> vehicles;
  std::vector<LcmParams> params;
  if (scenario_.target_leader) {
    vehicles.push_back({kTargetLeaderId, scenario_.target_leader->spacing_m, scenario_.target_leader->speed_mps, 0.0, 1});
    LcmParams p = scenario_.hv_params;
    p.desired_speed = scenario_.target_leader->speed_mps;
    params.push_back(p);
    insert_before_ = 1;
  }
  for (int i = 0; i < scenario_.hv_count; ++i) {
    vehicles.push_back({i + 1, -i * scenario_.hv_initial_spacing_m, scenario_.hv_initial_speed_mps, 0.0, 1});
    params.push_back(scenario_.hvParams(i));
  }
  platoon_ = makePlatoon(std::move(vehicles), params, scenario_.step_s, 0.0, scenario_.limits);
  if (scenario_.hv_count == 0) insert_before_ = platoon_.members.size();
  av_cruise_x_ = scenario_.av_gap_m +
                 (scenario_.hv_initial_speed_mps - scenario_.av_initial_speed_mps) * scenario_.lc_start_s;
}

std::vector<std::size_t> TrafficEngine::hvIndices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < platoon_.members.size(); ++i) {
    const int id = platoon_.members[i].state.id;
    if (id != kAvId && id != kTargetLeaderId) idx.push_back(i);
  }
  return idx;
}

void TrafficEngine::beginLaneChange(const Trajectory& traj) {
  if (phase_ != AvPhase::Cruise) throw std::logic_error("beginLaneChange: manoeuvre already started");
  traj_ = traj;
  lc_start_ = time();
  const auto hvs = hvIndices();
  av_x0_ = (hvs.empty() ? 0.0 : platoon_.members[hvs.front()].state.x) + scenario_.av_gap_m;
  handoff_time_ = lc_start_;
  if (scenario_.handoff == HandoffMode::LateralBoundary) handoff_time_ += lateralCrossingTime(traj, scenario_.lane_width_m);

  ExternalLeader ext;
  ext.id = kAvId;
  ext.length = scenario_.collision.vehicle_length;
  ext.active_from = handoff_time_;
  ext.insert_before = insert_before_;
  const VehicleState s0 = avLongitudinal(lc_start_);
  ext.history.seedSteady(lc_start_, s0.x, s0.v, platoon_.maxReactionTime() + 2 * platoon_.dt, platoon_.dt);
  ext.current = s0;
  platoon_.external = std::move(ext);
  phase_ = AvPhase::LaneChange;
}

VehicleState TrafficEngine::avLongitudinal(double t) const {
  VehicleState s;
  s.id = kAvId;
  s.lane = 1;
  const double local = t - lc_start_;
  if (local >= traj_->duration) {
    const auto e = evaluate(traj_->coeffs, traj_->duration);
    s.x = av_x0_ + e.x + e.vx * (local - traj_->duration);
    s.v = e.vx;
    s.a = 0.0;
  } else {
    const auto e = evaluate(traj_->coeffs, std::max(0.0, local));
    s.x = av_x0_ + e.x;
    s.v = e.vx;
    s.a = e.ax;
  }
  return s;
}

VehicleRecord TrafficEngine::avRecord() const {
  VehicleRecord r;
  r.t = time();
  r.id = kAvId;
  switch (phase_) {
    case AvPhase::Cruise:
      r.lane = 0;
      r.x = av_cruise_x_ + scenario_.av_initial_speed_mps * r.t;
      r.v = scenario_.av_initial_speed_mps;
      break;
    case AvPhase::LaneChange: {
      const double local = std::clamp(r.t - lc_start_, 0.0, traj_->duration);
      const auto e = evaluate(traj_->coeffs, local);
      const auto lon = avLongitudinal(r.t);
      r.lane = e.y >= scenario_.lane_width_m / 2.0 ? 1 : 0;
      r.x = lon.x;
      r.y = e.y;
      r.v = lon.v;
      r.a = lon.a;
      r.jerk = e.jx;
      r.heading = e.heading;
      break;
    }
    case AvPhase::Following:
      for (const auto& m : platoon_.members)
        if (m.state.id == kAvId) {
          r.lane = 1;
          r.x = m.state.x;
          r.y = scenario_.lane_width_m;
          r.v = m.state.v;
          r.a = m.state.a;
        }
      break;
  }
  return r;
}

std::vector<VehicleRecord> TrafficEngine::step() {
  const double t = time();
  if (phase_ == AvPhase::LaneChange && t >= laneChangeEnd() - 1e-9) {
    PlatoonMember m;
    m.state = avLongitudinal(t);
    m.params = scenario_.av_follow_params;
    m.history = std::move(platoon_.external->history);
    if (m.history.latest().t < t - 1e-12) m.history.push(t, m.state.x, m.state.v, m.state.a);
    platoon_.external.reset();
    platoon_.members.insert(platoon_.members.begin() + static_cast<long>(insert_before_), std::move(m));
    phase_ = AvPhase::Following;
  }

  std::vector<VehicleRecord> recs;
  recs.reserve(platoon_.members.size() + 1);
  const bool av_in_platoon = phase_ == AvPhase::Following;
  if (!av_in_platoon) recs.push_back(avRecord());
  for (std::size_t i = 0; i < platoon_.members.size(); ++i) {
    const auto& m = platoon_.members[i];
    VehicleRecord r;
    r.t = t;
    r.id = m.state.id;
    r.lane = 1;
    r.x = m.state.x;
    r.y = scenario_.lane_width_m;
    r.v = m.state.v;
    if (const auto leader = platoon_.currentLeader(i)) {
      // the external leader's stored state lags one step; use the AV at t
      const bool ext = platoon_.external && i == platoon_.external->insert_before && leader->first.id == kAvId;
      r.spacing = (ext ? avLongitudinal(t).x : leader->first.x) - m.state.x;
      r.headway = m.state.v > 0 ? r.spacing / m.state.v : 0.0;
    }
    recs.push_back(r);
  }

  if (phase_ == AvPhase::LaneChange) stepPlatoon(platoon_, avLongitudinal(t));
  else stepPlatoon(platoon_);

  const std::size_t offset = av_in_platoon ? 0 : 1;
  for (std::size_t i = 0; i < platoon_.members.size(); ++i) {
    recs[i + offset].a = platoon_.members[i].state.a;
    recs[i + offset].jerk = platoon_.members[i].jerk;
  }
  return recs;
}

}  // namespace lcplan
