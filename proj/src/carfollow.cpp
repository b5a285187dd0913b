#include "lcplan/carfollow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lcplan {

void LcmParams::validate() const {
  if (!(max_accel > 0) || !(own_decel > 0) || !(leader_decel > 0) || !(reaction_time >= 0) ||
      !(desired_speed > 0) || !(leader_length > 0))
    throw std::invalid_argument("LcmParams: parameters must be positive (reaction time non-negative)");
}

namespace {
std::string collisionMessage(int f, int l, double t, double s) {
  std::ostringstream os;
  os << "collision: vehicle " << f << " behind " << l << " at t=" << t << " s, spacing " << s << " m";
  return os.str();
}
}  // namespace

CollisionError::CollisionError(int f, int l, double t, double s)
    : std::runtime_error(collisionMessage(f, l, t, s)), follower_id(f), leader_id(l), time(t), spacing(s) {}

double desiredSpacing(const VehicleState& follower, const VehicleState& leader, const LcmParams& p) {
  const double vi = follower.v;
  const double vj = leader.v;
  return vi * vi / (2.0 * p.own_decel) - vj * vj / (2.0 * p.leader_decel) + vi * p.reaction_time + p.leader_length;
}

double lcmAccelerationRaw(const VehicleState& follower, const std::optional<VehicleState>& leader,
                          const LcmParams& p) {
  double field = 0.0;
  if (leader) {
    const double s = leader->x - follower.x;
    if (!(s > 0)) throw CollisionError(follower.id, leader->id, std::numeric_limits<double>::quiet_NaN(), s);
    const double s_star = desiredSpacing(follower, *leader, p);
    // s* <= 0 only when the leader pulls away fast; the field term is its s* -> 0+ limit
    if (s_star > 0) field = std::exp(1.0 - s / s_star);
  }
  return p.max_accel * (1.0 - follower.v / p.desired_speed - field);
}

double lcmAcceleration(const VehicleState& follower, const std::optional<VehicleState>& leader, const LcmParams& p,
                       const MotionLimits& limits) {
  return std::clamp(lcmAccelerationRaw(follower, leader, p), limits.a_min, limits.a_max);
}

double lcmJerk(const VehicleState& follower, const std::optional<VehicleState>& leader, const LcmParams& p) {
  double field_rate = 0.0;
  if (leader) {
    const double s = leader->x - follower.x;
    if (!(s > 0)) throw CollisionError(follower.id, leader->id, std::numeric_limits<double>::quiet_NaN(), s);
    const double s_rate = leader->v - follower.v;
    const double s_star = desiredSpacing(follower, *leader, p);
    if (!(s_star > 0)) return p.max_accel * (-follower.a / p.desired_speed);
    const double s_star_rate = follower.v * follower.a / p.own_decel - leader->v * leader->a / p.leader_decel +
                               follower.a * p.reaction_time;
    // d/dt of -exp(1 - s/s*)
    field_rate = (s_rate * s_star - s * s_star_rate) / (s_star * s_star) * std::exp(1.0 - s / s_star);
  }
  return p.max_accel * (-follower.a / p.desired_speed + field_rate);
}

void StateHistory::push(double t, double x, double v, double a) { entries_.push_back({t, x, v, a}); }

void StateHistory::seedSteady(double t0, double x0, double v0, double span, double dt) {
  entries_.clear();
  const auto n = static_cast<long>(std::ceil(span / dt - 1e-9)) + 1;
  for (long k = n; k >= 1; --k) {
    const double dtk = static_cast<double>(k) * dt;
    entries_.push_back({t0 - dtk, x0 - v0 * dtk, v0, 0.0});
  }
}

void StateHistory::setLatestAccel(double a) {
  if (!entries_.empty()) entries_.back().a = a;
}

VehicleState StateHistory::at(double t) const {
  VehicleState s;
  if (entries_.empty()) throw std::logic_error("StateHistory::at on empty history");
  const auto& first = entries_.front();
  const auto& last = entries_.back();
  if (t >= last.t) {
    s.x = last.x + last.v * (t - last.t);
    s.v = last.v;
    s.a = last.a;
    if (t == last.t) s.x = last.x;
    return s;
  }
  if (t <= first.t) {
    s.x = first.x - first.v * (first.t - t);
    s.v = first.v;
    s.a = 0.0;
    return s;
  }
  auto hi = std::lower_bound(entries_.begin(), entries_.end(), t,
                             [](const Entry& e, double tq) { return e.t < tq; });
  auto lo = std::prev(hi);
  if (hi->t == t) {
    s.x = hi->x;
    s.v = hi->v;
    s.a = hi->a;
    return s;
  }
  const double w = (t - lo->t) / (hi->t - lo->t);
  s.x = lo->x + w * (hi->x - lo->x);
  s.v = lo->v + w * (hi->v - lo->v);
  s.a = lo->a + w * (hi->a - lo->a);
  return s;
}

void StateHistory::trimBefore(double t) {
  // keep one entry at or before t so interpolation stays bracketed
  while (entries_.size() > 2 && entries_[1].t <= t) entries_.pop_front();
}

std::optional<VehicleState> PlatoonState::leaderAt(std::size_t i, double t) const {
  if (external && i == external->insert_before && t >= external->active_from) {
    VehicleState s = external->history.at(t);
    s.id = external->id;
    return s;
  }
  if (i == 0) return std::nullopt;
  VehicleState s = members[i - 1].history.at(t);
  s.id = members[i - 1].state.id;
  return s;
}

std::optional<std::pair<VehicleState, double>> PlatoonState::currentLeader(std::size_t i) const {
  if (external && i == external->insert_before && time() >= external->active_from)
    return std::make_pair(external->current, members[i].params.leader_length);
  if (i == 0) return std::nullopt;
  return std::make_pair(members[i - 1].state, members[i].params.leader_length);
}

double PlatoonState::maxReactionTime() const {
  double tau = 0.0;
  for (const auto& m : members) tau = std::max(tau, m.params.reaction_time);
  return tau;
}

PlatoonState makePlatoon(std::vector<VehicleState> vehicles, const std::vector<LcmParams>& params, double dt,
                         double t0, MotionLimits limits) {
  if (!(dt > 0)) throw std::invalid_argument("makePlatoon: dt must be > 0");
  if (params.size() != vehicles.size() && params.size() != 1)
    throw std::invalid_argument("makePlatoon: need one parameter set per vehicle or a single shared set");
  PlatoonState p;
  p.t0 = t0;
  p.dt = dt;
  p.limits = limits;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    PlatoonMember m;
    m.state = vehicles[i];
    m.params = params.size() == 1 ? params[0] : params[i];
    m.params.validate();
    if (i > 0 && !(vehicles[i - 1].x - vehicles[i].x > 0))
      throw std::invalid_argument("makePlatoon: positions must be strictly decreasing");
    m.history.seedSteady(t0, m.state.x, m.state.v, m.params.reaction_time + 2 * dt, dt);
    m.history.push(t0, m.state.x, m.state.v, m.state.a);
    p.members.push_back(std::move(m));
  }
  return p;
}

void stepPlatoon(PlatoonState& platoon, const std::optional<VehicleState>& ext_state) {
  const double t = platoon.time();
  const double dt = platoon.dt;
  const auto& lim = platoon.limits;

  if (platoon.external && ext_state) {
    auto& ext = *platoon.external;
    ext.current = *ext_state;
    ext.current.id = ext.id;
    auto& h = ext.history;
    if (h.empty() || h.latest().t < t - 1e-12) h.push(t, ext_state->x, ext_state->v, ext_state->a);
  }

  const std::size_t n = platoon.members.size();
  std::vector<double> accel(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& m = platoon.members[i];
    const double tq = t - m.params.reaction_time;
    VehicleState self = m.params.reaction_time > 0 ? m.history.at(tq) : m.state;
    self.id = m.state.id;
    if (m.params.reaction_time == 0) self.a = m.history.latest().a;
    const auto leader = platoon.leaderAt(i, tq);
    try {
      m.raw_accel = lcmAccelerationRaw(self, leader, m.params);
      accel[i] = std::clamp(m.raw_accel, lim.a_min, lim.a_max);
      m.jerk = (m.raw_accel == accel[i]) ? lcmJerk(self, leader, m.params) : 0.0;
    } catch (const CollisionError& e) {
      throw CollisionError(e.follower_id, e.leader_id, t, e.spacing);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& m = platoon.members[i];
    m.state.a = accel[i];
    m.history.setLatestAccel(accel[i]);
    m.state.v = std::clamp(m.state.v + accel[i] * dt, 0.0, lim.v_max);
    m.state.x += m.state.v * dt;
  }

  ++platoon.step_index;
  const double t_next = platoon.time();
  const double keep = platoon.maxReactionTime() + 2 * dt;
  for (auto& m : platoon.members) {
    m.history.push(t_next, m.state.x, m.state.v, m.state.a);
    m.history.trimBefore(t_next - keep);
  }
  if (platoon.external) platoon.external->history.trimBefore(t_next - keep);

  for (std::size_t i = 0; i < n; ++i) {
    const auto leader = platoon.currentLeader(i);
    if (!leader) continue;
    // the external leader's current state is still at t; extrapolate it
    double lx = leader->first.x;
    if (platoon.external && leader->first.id == platoon.external->id && i == platoon.external->insert_before)
      lx += leader->first.v * dt;
    const double spacing = lx - platoon.members[i].state.x;
    if (spacing <= leader->second)
      throw CollisionError(platoon.members[i].state.id, leader->first.id, t_next, spacing);
  }
}

double quasiSteadySpacing(double v, const LcmParams& p, double accel_tol) {
  VehicleState f{0, 0.0, v, 0.0, 0};
  const double s_star = desiredSpacing(f, f, p);
  // A (1 - v/vd) - A exp(1 - s/s*) = -accel_tol when v >= vd, = 0 otherwise
  double rhs = 1.0 - v / p.desired_speed;
  if (rhs <= 0) rhs += accel_tol / p.max_accel;
  if (!(rhs > 0)) throw std::domain_error("quasiSteadySpacing: no spacing satisfies the tolerance");
  return s_star * (1.0 - std::log(rhs));
}

}  // namespace lcplan
