#pragma once

#include <span>
#include <vector>

#include "lcplan/trajectory.hpp"

namespace lcplan {

struct CostWeights {
  double omega_av = 0.5;
  double av_comfort = 0.5;
  double av_efficiency = 0.5;
  double hv_comfort = 0.5;
  double hv_efficiency = 0.5;
  double norm_comfort = 8.0;      // j_max
  double norm_efficiency = 25.0;  // v_desire

  double omegaHv() const { return 1.0 - omega_av; }
  void validate() const;
  bool operator==(const CostWeights&) const = default;
};

struct HvWeighting {
  std::vector<double> sigma;
  std::vector<double> omega;
};

/// Raw (unnormalised) comfort and efficiency sums of one vehicle.
struct VehicleLoss {
  double comfort = 0.0;
  double efficiency = 0.0;
};

/// Per-step jerk and speed series of one HV over the loss window.
struct HvSeries {
  std::vector<double> jerk;
  std::vector<double> speed;
  double desired_speed = 25.0;
};

/// av_* and hv_* components are raw sums (HV ones omega_i-weighted); the
/// *_total and joint_total fields are the normalised objective. The
/// reported_* fields use the same comfort/efficiency weights without
/// normalisers, with reported_joint = reported_av + reported_hv.
struct LossBreakdown {
  double av_comfort = 0.0;
  double av_efficiency = 0.0;
  double av_total = 0.0;
  double hv_comfort = 0.0;
  double hv_efficiency = 0.0;
  double hv_total = 0.0;
  double joint_total = 0.0;
  double reported_av = 0.0;
  double reported_hv = 0.0;
  double reported_joint = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

/// Sum over samples of |jx| + |jy|; no time-step factor.
double avComfortLoss(const Trajectory& traj);
/// Sum over samples of |sqrt(vx^2 + vy^2) - v_desire|.
double avEfficiencyLoss(const Trajectory& traj, double v_desire);
VehicleLoss avLoss(const Trajectory& traj, double v_desire);

std::vector<VehicleLoss> hvLosses(std::span<const HvSeries> series);

/// sigma_i = |dv_i| / sqrt(gap_i), omega_i = sigma_i / sum(sigma). Speed
/// differences below speed_diff_floor count as zero; when all of them do, the
/// weights take the equal-difference limit omega_i ~ 1 / sqrt(gap_i).
HvWeighting hvWeights(std::span<const double> gaps, std::span<const double> speed_diffs,
                      double speed_diff_floor = 0.1);

LossBreakdown totalLoss(const VehicleLoss& av, std::span<const VehicleLoss> hv, const CostWeights& weights,
                        const HvWeighting& hv_weighting);

}  // namespace lcplan
