#include "lcplan/cost.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lcplan {

void CostWeights::validate() const {
  if (!(omega_av >= 0 && omega_av <= 1)) throw std::invalid_argument("CostWeights: omega_av must lie in [0, 1]");
  if (av_comfort < 0 || av_efficiency < 0 || hv_comfort < 0 || hv_efficiency < 0)
    throw std::invalid_argument("CostWeights: comfort/efficiency weights must be non-negative");
  if (std::abs(av_comfort + av_efficiency - 1.0) > 1e-9 || std::abs(hv_comfort + hv_efficiency - 1.0) > 1e-9)
    throw std::invalid_argument("CostWeights: comfort + efficiency weights must sum to 1 per vehicle class");
  if (!(norm_comfort > 0) || !(norm_efficiency > 0))
    throw std::invalid_argument("CostWeights: normalisers must be positive");
}

double avComfortLoss(const Trajectory& traj) {
  double sum = 0.0;
  for (const auto& s : traj.samples) sum += std::abs(s.jx) + std::abs(s.jy);
  return sum;
}

double avEfficiencyLoss(const Trajectory& traj, double v_desire) {
  double sum = 0.0;
  for (const auto& s : traj.samples) sum += std::abs(std::hypot(s.vx, s.vy) - v_desire);
  return sum;
}

VehicleLoss avLoss(const Trajectory& traj, double v_desire) {
  return {avComfortLoss(traj), avEfficiencyLoss(traj, v_desire)};
}

std::vector<VehicleLoss> hvLosses(std::span<const HvSeries> series) {
  std::vector<VehicleLoss> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    VehicleLoss l;
    for (double j : s.jerk) l.comfort += std::abs(j);
    for (double v : s.speed) l.efficiency += std::abs(v - s.desired_speed);
    out.push_back(l);
  }
  return out;
}

HvWeighting hvWeights(std::span<const double> gaps, std::span<const double> speed_diffs, double speed_diff_floor) {
  if (gaps.size() != speed_diffs.size()) throw std::invalid_argument("hvWeights: gaps and speed diffs differ in size");
  HvWeighting w;
  w.sigma.reserve(gaps.size());
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (!(gaps[i] > 0)) throw std::domain_error("hvWeights: gaps must be positive");
    const double dv = std::abs(speed_diffs[i]);
    w.sigma.push_back(dv < speed_diff_floor ? 0.0 : dv / std::sqrt(gaps[i]));
  }
  double total = std::accumulate(w.sigma.begin(), w.sigma.end(), 0.0);
  w.omega.resize(gaps.size());
  if (total > 0) {
    for (std::size_t i = 0; i < gaps.size(); ++i) w.omega[i] = w.sigma[i] / total;
    return w;
  }
  // all speed differences zero: limit of equal differences, omega ~ 1/sqrt(gap)
  total = 0.0;
  for (double g : gaps) total += 1.0 / std::sqrt(g);
  for (std::size_t i = 0; i < gaps.size(); ++i) w.omega[i] = 1.0 / std::sqrt(gaps[i]) / total;
  return w;
}

LossBreakdown totalLoss(const VehicleLoss& av, std::span<const VehicleLoss> hv, const CostWeights& weights,
                        const HvWeighting& hv_weighting) {
  if (hv.size() != hv_weighting.omega.size())
    throw std::invalid_argument("totalLoss: one HV weight per HV loss required");
  LossBreakdown b;
  b.av_comfort = av.comfort;
  b.av_efficiency = av.efficiency;
  for (std::size_t i = 0; i < hv.size(); ++i) {
    b.hv_comfort += hv_weighting.omega[i] * hv[i].comfort;
    b.hv_efficiency += hv_weighting.omega[i] * hv[i].efficiency;
  }
  b.av_total = weights.av_comfort * b.av_comfort / weights.norm_comfort +
               weights.av_efficiency * b.av_efficiency / weights.norm_efficiency;
  b.hv_total = weights.hv_comfort * b.hv_comfort / weights.norm_comfort +
               weights.hv_efficiency * b.hv_efficiency / weights.norm_efficiency;
  b.joint_total = weights.omega_av * b.av_total + weights.omegaHv() * b.hv_total;
  b.reported_av = weights.av_comfort * b.av_comfort + weights.av_efficiency * b.av_efficiency;
  b.reported_hv = weights.hv_comfort * b.hv_comfort + weights.hv_efficiency * b.hv_efficiency;
  b.reported_joint = b.reported_av + b.reported_hv;
  return b;
}

}  // namespace lcplan
