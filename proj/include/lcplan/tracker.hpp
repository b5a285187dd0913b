#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lcplan/qp.hpp"
#include "lcplan/trajectory.hpp"

namespace lcplan {

/// Rear-axle pose.
struct KinematicState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

struct KinematicInput {
  double v = 0.0;
  double delta = 0.0;  // front steer angle
};

/// Reference pose and input at one sample.
struct ReferencePoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double v = 0.0;
  double delta = 0.0;
};

Eigen::Vector3d kinematicDerivative(const KinematicState& s, const KinematicInput& u, double wheelbase);

/// Fixed-step RK4 over dt with the input held, split into `substeps`.
KinematicState integrateKinematic(const KinematicState& s, const KinematicInput& u, double wheelbase, double dt,
                                  int substeps = 4);

/// Discrete error model psi~(k+1) = A psi~(k) + B mu~(k) about a reference point.
struct ErrorModel {
  Eigen::Matrix3d A;
  Eigen::Matrix<double, 3, 2> B;
  double step = 0.0;
  ReferencePoint reference;
};

ErrorModel linearize(const ReferencePoint& ref, double step, double wheelbase);

/// Stacked predictions Y = lambda psi~ + theta U~ over np steps, U~ holding
/// the first nc input deviations (later deviations are zero).
struct Prediction {
  Eigen::MatrixXd lambda;  // 3 np x 3
  Eigen::MatrixXd theta;   // 3 np x 2 nc
};

Prediction buildPrediction(const ErrorModel& model, int np, int nc);

struct MpcConfig {
  int np = 6;
  int nc = 4;
  Eigen::Vector3d q{100.0, 100.0, 10.0};  // x, y, heading error weights
  Eigen::Vector2d r{1.0, 10.0};           // speed and steer increment weights
  double rho = 1000.0;
  double v_min = 0.0;
  double v_max = 40.0;
  double delta_max = 0.54;
  double dv_max = 0.8;  // a_max * step
  double ddelta_max = 0.05;
  double step = 0.1;
  double wheelbase = 2.7;
  QpOptions qp;

  void validate() const;
  bool operator==(const MpcConfig&) const = default;
};

struct ControlInput {
  double v = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  Eigen::VectorXd increments;  // 2 nc: (dv, ddelta) per step
  double kkt_residual = 0.0;
  int iterations = 0;
};

class ControllerFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quadratic program of one MPC step: decision (dU, eps).
QpProblem buildMpcQp(const KinematicState& current, std::span<const ReferencePoint> window, const MpcConfig& cfg,
                     const KinematicInput& previous);

/// window holds at least np + 1 reference points starting at the current time.
ControlInput mpcStep(const KinematicState& current, std::span<const ReferencePoint> window, const MpcConfig& cfg,
                     const KinematicInput& previous);

/// Reference point at local time t of a planned trajectory placed at
/// (x0, y0); beyond the duration the reference continues straight.
ReferencePoint referenceAt(const Trajectory& traj, double t, double x0, double y0, double wheelbase);

struct TrackedSample {
  double t = 0.0;
  double x_ref = 0.0;
  double y_ref = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double v_cmd = 0.0;
  double delta_cmd = 0.0;
  double e_lat = 0.0;
  double e_lon = 0.0;
  double e_v = 0.0;
  double epsilon = 0.0;
};

struct TrackingResult {
  std::vector<TrackedSample> samples;
  double max_lateral_error = 0.0;
  double max_kkt_residual = 0.0;
  KinematicState final_state;
};

/// Closed loop over the trajectory duration on the nonlinear plant.
TrackingResult track(const Trajectory& traj, const KinematicState& initial, const MpcConfig& cfg, double x0 = 0.0,
                     double y0 = 0.0);

}  // namespace lcplan
