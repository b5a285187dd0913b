#include "lcplan/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace lcplan {

void PlannerConfig::validate() const {
  if (!(t_min > 0) || !(t_max >= t_min) || !(t_step > 0))
    throw std::invalid_argument("planner: duration range must satisfy 0 < t_min <= t_max with t_step > 0");
  if (!(xf_factor_min > 0) || !(xf_factor_max >= xf_factor_min) || !(xf_step > 0))
    throw std::invalid_argument("planner: x_final factors must satisfy 0 < min <= max with step > 0");
  if (!(v_min < v_max) || !(a_min < a_max) || !(j_min < j_max))
    throw std::invalid_argument("planner: bounds must be ordered");
  if (clearance_margin < 0) throw std::invalid_argument("planner: clearance margin must be >= 0");
  if (!(refine_tol > 0) || refine_max_iter < 0 || refine_restarts < 0)
    throw std::invalid_argument("planner: refine settings must be positive");
  if (!(infeasible_penalty > 0)) throw std::invalid_argument("planner: penalty must be > 0");
}

LaneChangeProblem::LaneChangeProblem(const Scenario& scenario) : scenario_(scenario), snapshot_(scenario) {
  while (snapshot_.time() < scenario_.lc_start_s - 1e-9) pre_steps_.push_back(snapshot_.step());
  const auto hvs = snapshot_.hvIndices();
  std::vector<double> gaps, diffs;
  const auto& members = snapshot_.platoon().members;
  const double av_x = (hvs.empty() ? 0.0 : members[hvs.front()].state.x) + scenario_.av_gap_m;
  for (auto i : hvs) {
    gaps.push_back(av_x - members[i].state.x);
    diffs.push_back(scenario_.av_initial_speed_mps - members[i].state.v);
  }
  hv_weighting_ = hvWeights(gaps, diffs);
}

double LaneChangeProblem::nominalDistance(double duration) const {
  return duration * 0.5 * (scenario_.av_initial_speed_mps + scenario_.av_target_speed_mps);
}

Trajectory LaneChangeProblem::trajectoryFor(double duration, double x_final) const {
  BoundaryConditions bc{scenario_.av_initial_speed_mps, 0.0, scenario_.av_target_speed_mps, 0.0,
                        x_final, scenario_.lane_width_m, duration};
  return makeTrajectory(buildGeneralTrajectory(bc), duration, scenario_.step_s);
}

Rollout LaneChangeProblem::rollout(const Trajectory& traj) const {
  Rollout r;
  TrafficEngine engine = snapshot_;
  engine.beginLaneChange(traj);
  r.lc_start = engine.laneChangeStart();
  r.av_x0 = engine.avRecord().x;
  const double window_end = r.lc_start + traj.duration + scenario_.hv_loss_settle_s;
  r.series.resize(static_cast<std::size_t>(scenario_.hv_count));
  for (int i = 0; i < scenario_.hv_count; ++i) r.series[i].desired_speed = scenario_.hvParams(i).desired_speed;
  while (engine.time() <= window_end + 1e-9) {
    try {
      r.steps.push_back(engine.step());
    } catch (const CollisionError& e) {
      r.collided = true;
      r.collision_message = e.what();
      break;
    }
    for (const auto& rec : r.steps.back()) {
      if (rec.id < 1 || rec.id > scenario_.hv_count) continue;
      auto& s = r.series[static_cast<std::size_t>(rec.id - 1)];
      s.jerk.push_back(rec.jerk);
      s.speed.push_back(rec.v);
    }
  }
  return r;
}

namespace {

// Extrema of the polynomial with coefficients c (lowest first, degree <= 3)
// over [0, T]: endpoints plus stationary points.
std::pair<double, double> polyRange(const std::array<double, 4>& c, double T) {
  auto f = [&](double t) { return c[0] + t * (c[1] + t * (c[2] + t * c[3])); };
  double lo = std::min(f(0.0), f(T)), hi = std::max(f(0.0), f(T));
  auto consider = [&](double t) {
    if (t > 0 && t < T) {
      lo = std::min(lo, f(t));
      hi = std::max(hi, f(t));
    }
  };
  // derivative: c1 + 2 c2 t + 3 c3 t^2
  const double qa = 3 * c[3], qb = 2 * c[2], qc = c[1];
  if (std::abs(qa) > 1e-300) {
    const double disc = qb * qb - 4 * qa * qc;
    if (disc >= 0) {
      const double sq = std::sqrt(disc);
      consider((-qb + sq) / (2 * qa));
      consider((-qb - sq) / (2 * qa));
    }
  } else if (std::abs(qb) > 1e-300) {
    consider(-qc / qb);
  }
  return {lo, hi};
}

void checkRange(FeasibilityReport& rep, const char* what, std::pair<double, double> range, double lo, double hi) {
  auto flag = [&](double value, double bound, const char* rel) {
    std::ostringstream os;
    os << what << ' ' << value << ' ' << rel << ' ' << bound;
    rep.violations.push_back(os.str());
    rep.magnitude += std::abs(value - bound);
    rep.feasible = false;
  };
  if (range.first < lo - 1e-9) flag(range.first, lo, "<");
  if (range.second > hi + 1e-9) flag(range.second, hi, ">");
}

std::array<double, 4> accelCoeffs(const Coeffs::Vector6& c) { return {2 * c(2), 6 * c(3), 12 * c(4), 20 * c(5)}; }
std::array<double, 4> jerkCoeffs(const Coeffs::Vector6& c) { return {6 * c(3), 24 * c(4), 60 * c(5), 0.0}; }

struct Score {
  bool feasible;
  double value;  // joint_total when feasible, violation magnitude otherwise
};
bool better(const Score& a, const Score& b) {
  if (a.feasible != b.feasible) return a.feasible;
  return a.value < b.value;
}

}  // namespace

FeasibilityReport checkFeasibility(const Trajectory& traj, const Rollout& rollout, const Scenario& scenario,
                                   const PlannerConfig& config, double sample_step) {
  FeasibilityReport rep;
  const double T = traj.duration;
  checkRange(rep, "longitudinal acceleration", polyRange(accelCoeffs(traj.coeffs.lon), T), config.a_min, config.a_max);
  checkRange(rep, "lateral acceleration", polyRange(accelCoeffs(traj.coeffs.lat), T), config.a_min, config.a_max);
  checkRange(rep, "longitudinal jerk", polyRange(jerkCoeffs(traj.coeffs.lon), T), config.j_min, config.j_max);
  checkRange(rep, "lateral jerk", polyRange(jerkCoeffs(traj.coeffs.lat), T), config.j_min, config.j_max);

  const auto times = sampleTimes(T, sample_step);
  double v_lo = std::numeric_limits<double>::infinity(), v_hi = -v_lo;
  for (double t : times) {
    const auto s = evaluate(traj.coeffs, t);
    const double v = std::hypot(s.vx, s.vy);
    v_lo = std::min(v_lo, v);
    v_hi = std::max(v_hi, v);
  }
  checkRange(rep, "speed", {v_lo, v_hi}, config.v_min, config.v_max);

  if (rollout.collided) {
    rep.feasible = false;
    rep.violations.push_back("target-lane " + rollout.collision_message);
    rep.magnitude += 1e3;
  }

  const auto& cc = scenario.collision;
  const double reach = 2.0 * std::max(cc.semi_major, cc.semi_minor);
  const double dt = scenario.step_s;
  rep.min_clearance = std::numeric_limits<double>::max();
  double worst_deficit_t = -1.0;
  for (double t_local : times) {
    const double k_real = t_local / dt;
    auto k = static_cast<std::size_t>(std::floor(k_real + 1e-9));
    if (k >= rollout.steps.size()) break;
    const auto& a = rollout.steps[k];
    const auto* b = k + 1 < rollout.steps.size() ? &rollout.steps[k + 1] : nullptr;
    const double w = std::clamp(k_real - static_cast<double>(k), 0.0, 1.0);
    const auto av = evaluate(traj.coeffs, t_local);
    const Eigen::Vector2d av_c(rollout.av_x0 + av.x - cc.vehicle_length / 2.0, av.y);
    const auto av_e = boundaryOf(av_c, av.heading, cc);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto& ra = a[i];
      if (ra.id == kAvId) continue;
      double x = ra.x;
      if (b && w > 0) {
        const VehicleRecord* rb = nullptr;
        if (i < b->size() && (*b)[i].id == ra.id) rb = &(*b)[i];
        else
          for (const auto& r : *b)
            if (r.id == ra.id) rb = &r;
        if (rb) x = ra.x + w * (rb->x - ra.x);
      }
      const Eigen::Vector2d c(x - cc.vehicle_length / 2.0, ra.y);
      const double centre_gap = (c - av_c).norm() - reach;
      double d = centre_gap;  // lower bound on the boundary distance
      if (centre_gap < config.clearance_margin + 10.0) d = minDistance(av_e, boundaryOf(c, 0.0, cc)).distance;
      rep.min_clearance = std::min(rep.min_clearance, d);
      if (d <= config.clearance_margin) {
        rep.feasible = false;
        rep.magnitude += config.clearance_margin - d + 1.0;
        if (worst_deficit_t < 0) {
          std::ostringstream os;
          os << "clearance " << d << " m to vehicle " << ra.id << " at t=" << t_local << " s";
          rep.violations.push_back(os.str());
          worst_deficit_t = t_local;
        }
      }
    }
  }
  return rep;
}

CandidateEvaluation evaluateCandidate(const LaneChangeProblem& problem, double duration, double x_final,
                                      const CostWeights& weights, const PlannerConfig& config, Rollout* rollout_out) {
  CandidateEvaluation ev;
  ev.duration = duration;
  ev.x_final = x_final;
  if (!(duration > 0) || !(x_final > 0)) {
    ev.feasible = false;
    ev.violation_magnitude = 1e6;
    ev.violations.push_back("non-positive duration or x_final");
    return ev;
  }
  const auto traj = problem.trajectoryFor(duration, x_final);
  Rollout rollout = problem.rollout(traj);
  const auto rep = checkFeasibility(traj, rollout, problem.scenario(), config, problem.scenario().step_s);
  ev.feasible = rep.feasible;
  ev.violation_magnitude = rep.magnitude;
  ev.violations = rep.violations;
  ev.min_clearance = rep.min_clearance;
  const auto av = avLoss(traj, problem.scenario().av_desired_speed_mps);
  const auto hv = hvLosses(rollout.series);
  ev.loss = totalLoss(av, hv, weights, problem.hvWeighting());
  if (rollout_out) *rollout_out = std::move(rollout);
  return ev;
}

namespace {

bool gridBetter(const CandidateEvaluation& a, const CandidateEvaluation& b, double nominal_a, double nominal_b) {
  const double ja = a.loss.joint_total, jb = b.loss.joint_total;
  if (std::abs(ja - jb) > 1e-12 * std::max(1.0, std::abs(jb))) return ja < jb;
  if (a.duration != b.duration) return a.duration < b.duration;
  return std::abs(a.x_final - nominal_a) < std::abs(b.x_final - nominal_b);
}

struct NelderMead {
  std::array<Eigen::Vector2d, 3> x;
  std::array<Score, 3> f;
};

}  // namespace

PlanResult optimize(const LaneChangeProblem& problem, const CostWeights& weights, const PlannerConfig& config) {
  config.validate();
  weights.validate();
  PlanResult result;
  result.weights = weights;

  int best = -1;
  for (int i = 0;; ++i) {
    const double T = config.t_min + i * config.t_step;
    if (T > config.t_max + 1e-9) break;
    const double nom = problem.nominalDistance(T);
    const auto k_lo = static_cast<long>(std::ceil((config.xf_factor_min * nom - nom) / config.xf_step - 1e-9));
    const auto k_hi = static_cast<long>(std::floor((config.xf_factor_max * nom - nom) / config.xf_step + 1e-9));
    for (long k = k_lo; k <= k_hi; ++k) {
      result.grid.push_back(evaluateCandidate(problem, T, nom + k * config.xf_step, weights, config));
      const auto& c = result.grid.back();
      if (!c.feasible) continue;
      if (best < 0) {
        best = static_cast<int>(result.grid.size()) - 1;
        continue;
      }
      const auto& b = result.grid[best];
      if (gridBetter(c, b, nom, problem.nominalDistance(b.duration))) best = static_cast<int>(result.grid.size()) - 1;
    }
  }
  if (best < 0) throw NoFeasibleCandidate("optimize: every grid candidate is infeasible");
  result.grid_best = result.grid[best];
  result.best = result.grid_best;

  if (config.refine) {
    const Eigen::Vector2d scale(config.t_step, config.xf_step);
    auto eval = [&](const Eigen::Vector2d& u) -> std::pair<Score, CandidateEvaluation> {
      const double T = u.x() * scale.x(), xf = u.y() * scale.y();
      CandidateEvaluation ev;
      const double nom = problem.nominalDistance(T);
      const double out_of_range = std::max({0.0, config.t_min - T, T - config.t_max, config.xf_factor_min * nom - xf,
                                            xf - config.xf_factor_max * nom});
      if (out_of_range > 0) {
        ev.duration = T;
        ev.x_final = xf;
        ev.feasible = false;
        ev.violation_magnitude = 1e6 + out_of_range;
        ev.violations.push_back("outside search range");
      } else {
        ev = evaluateCandidate(problem, T, xf, weights, config);
      }
      const Score s{ev.feasible, ev.feasible ? ev.loss.joint_total : ev.violation_magnitude};
      return {s, ev};
    };

    // Restarted Nelder-Mead: each pass starts a fresh simplex at the best
    // point so far, a tenth the size of the previous one. Vertices step
    // inward where a forward step would leave the search range.
    auto inRange = [&](const Eigen::Vector2d& u) {
      const double T = u.x() * scale.x(), xf = u.y() * scale.y(), nom = problem.nominalDistance(T);
      return T >= config.t_min && T <= config.t_max && xf >= config.xf_factor_min * nom &&
             xf <= config.xf_factor_max * nom;
    };
    NelderMead nm;
    std::array<CandidateEvaluation, 3> evs;
    auto order = [&]() {
      std::array<int, 3> idx{0, 1, 2};
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return better(nm.f[a], nm.f[b]); });
      NelderMead sorted;
      std::array<CandidateEvaluation, 3> sev;
      for (int i = 0; i < 3; ++i) {
        sorted.x[i] = nm.x[idx[i]];
        sorted.f[i] = nm.f[idx[i]];
        sev[i] = std::move(evs[idx[i]]);
      }
      nm = sorted;
      evs = std::move(sev);
    };

    int it = 0;
    Eigen::Vector2d start(result.grid_best.duration / scale.x(), result.grid_best.x_final / scale.y());
    double size = 1.0;
    for (int pass = 0; pass <= config.refine_restarts; ++pass, size *= 0.1) {
      nm.x[0] = start;
      for (int d = 0; d < 2; ++d) {
        Eigen::Vector2d step = Eigen::Vector2d::Zero();
        step[d] = size;
        nm.x[d + 1] = inRange(start + step) ? Eigen::Vector2d(start + step) : Eigen::Vector2d(start - step);
      }
      for (int i = 0; i < 3; ++i) std::tie(nm.f[i], evs[i]) = eval(nm.x[i]);

      for (; it < config.refine_max_iter; ++it) {
        order();
        const double diam = std::max((nm.x[1] - nm.x[0]).norm(), (nm.x[2] - nm.x[0]).norm());
        if (diam < config.refine_tol) break;
        const Eigen::Vector2d centroid = 0.5 * (nm.x[0] + nm.x[1]);
        const Eigen::Vector2d xr = centroid + (centroid - nm.x[2]);
        auto [fr, er] = eval(xr);
        if (better(fr, nm.f[0])) {
          const Eigen::Vector2d xe = centroid + 2.0 * (centroid - nm.x[2]);
          auto [fe, ee] = eval(xe);
          if (better(fe, fr)) {
            nm.x[2] = xe, nm.f[2] = fe, evs[2] = std::move(ee);
          } else {
            nm.x[2] = xr, nm.f[2] = fr, evs[2] = std::move(er);
          }
          continue;
        }
        if (better(fr, nm.f[1])) {
          nm.x[2] = xr, nm.f[2] = fr, evs[2] = std::move(er);
          continue;
        }
        const bool outside = better(fr, nm.f[2]);
        const Eigen::Vector2d xc = outside ? centroid + 0.5 * (xr - centroid) : centroid + 0.5 * (nm.x[2] - centroid);
        auto [fc, ec] = eval(xc);
        if (better(fc, outside ? fr : nm.f[2])) {
          nm.x[2] = xc, nm.f[2] = fc, evs[2] = std::move(ec);
          continue;
        }
        for (int i = 1; i < 3; ++i) {
          nm.x[i] = nm.x[0] + 0.5 * (nm.x[i] - nm.x[0]);
          std::tie(nm.f[i], evs[i]) = eval(nm.x[i]);
        }
      }
      order();
      if (evs[0].feasible && evs[0].loss.joint_total < result.best.loss.joint_total) result.best = evs[0];
      start = Eigen::Vector2d(result.best.duration / scale.x(), result.best.x_final / scale.y());
    }
    result.refine_iterations = it;
  }

  result.trajectory = problem.trajectoryFor(result.best.duration, result.best.x_final);
  result.rollout = problem.rollout(result.trajectory);
  return result;
}

std::vector<SweepRow> sweepOmega(const LaneChangeProblem& problem, std::span<const double> omegas,
                                 const CostWeights& base_weights, const PlannerConfig& config) {
  std::vector<SweepRow> rows;
  for (double w : omegas) {
    if (!(w > 0 && w <= 1)) throw std::invalid_argument("sweepOmega: omegas must lie in (0, 1]");
    CostWeights cw = base_weights;
    cw.omega_av = w;
    rows.push_back({w, optimize(problem, cw, config).best});
  }
  return rows;
}

}  // namespace lcplan
