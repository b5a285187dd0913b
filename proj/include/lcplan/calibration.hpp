#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lcplan/carfollow.hpp"

namespace lcplan {

/// Leader/follower pair sampled on a uniform time base. Positions are front
/// bumpers, so spacing is leader_x - follower_x.
struct TrajectoryRecord {
  std::string name;
  int leader_id = 0;
  int follower_id = 1;
  double t0 = 0.0;
  double step = 0.1;
  double leader_length = 5.0;
  double follower_length = 5.0;
  std::vector<double> leader_x, leader_v, follower_x, follower_v;

  std::size_t size() const { return leader_x.size(); }
  double spacing(std::size_t k) const { return leader_x[k] - follower_x[k]; }
  void validate() const;
};

struct FollowerSimulation {
  std::vector<double> x, v, a;
  bool collided = false;
};

/// Follower driven by the LCM against the recorded leader, starting from the
/// record's first follower state with steady motion assumed before it.
FollowerSimulation simulateFollower(const LcmParams& params, const TrajectoryRecord& record,
                                    const MotionLimits& limits = {});

enum class ObjectiveKind { RelativeSpacing, SpacingRmse, SpeedRmse };

/// sqrt(mean(((sim - obs) / obs)^2)).
double relativeRms(std::span<const double> sim, std::span<const double> obs);
double rmse(std::span<const double> sim, std::span<const double> obs);

constexpr double kCollisionPenalty = 1e6;

double calibrationObjective(const LcmParams& params, const TrajectoryRecord& record,
                            ObjectiveKind kind = ObjectiveKind::RelativeSpacing);

/// Gene order: desired speed, max accel, reaction time, leader length, own decel, leader decel.
using Genome = std::array<double, 6>;

Genome toGenome(const LcmParams& p);
LcmParams fromGenome(const Genome& g);

struct GeneBounds {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const GeneBounds&) const = default;
};

struct CalibrationConfig {
  std::array<GeneBounds, 6> bounds{{{5, 50}, {2, 10}, {0.1, 10}, {2, 10}, {2, 10}, {2, 10}}};
  int population = 200;
  int generations = 200;
  double crossover_prob = 0.95;
  double mutation_prob = 0.05;
  int tournament_size = 3;
  double blend_alpha = 0.5;
  int elitism = 1;
  std::uint64_t seed = 1;
  ObjectiveKind objective = ObjectiveKind::RelativeSpacing;

  void validate() const;
  bool operator==(const CalibrationConfig&) const = default;
};

struct CalibrationResult {
  LcmParams best;
  double objective = 0.0;
  std::vector<double> best_curve;  // best objective after each generation (index 0: initial population)
  std::size_t evaluations = 0;
};

/// Fits one parameter set to all records (mean objective). `on_evaluate`
/// sees every genome before it is scored.
CalibrationResult geneticCalibrate(std::span<const TrajectoryRecord> records, const CalibrationConfig& config,
                                   const std::function<void(const Genome&)>& on_evaluate = {},
                                   std::span<const Genome> initial_population = {});

struct QuantileRow {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double mean = 0.0;
};

/// Quantiles (linear interpolation) and mean of each parameter across per-record fits.
std::vector<QuantileRow> summarizeParameters(std::span<const LcmParams> fits, const CalibrationConfig& config);

extern const std::array<const char*, 6> kGeneNames;

}  // namespace lcplan
