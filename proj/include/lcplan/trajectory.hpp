#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace lcplan {

/// Monomial coefficients of the quintic longitudinal (lon) and lateral (lat)
/// motion, lowest order first: p(t) = c0 + c1 t + ... + c5 t^5.
template <typename Scalar>
struct QuinticCoeffs {
  using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
  Vector6 lon = Vector6::Zero();
  Vector6 lat = Vector6::Zero();

  bool allFinite() const { return lon.allFinite() && lat.allFinite(); }
};

template <typename Scalar>
struct LcBoundaryConditions {
  Scalar v_start{};
  Scalar a_start{};
  Scalar v_end{};
  Scalar a_end{};
  Scalar x_final{};
  Scalar lane_width{};
  Scalar duration{};
};

template <typename Scalar>
struct TrajectorySample {
  Scalar t{}, x{}, y{}, vx{}, vy{}, ax{}, ay{}, jx{}, jy{}, heading{};
};

template <typename Scalar>
struct PlannedTrajectory {
  QuinticCoeffs<Scalar> coeffs;
  Scalar duration{};
  Scalar sample_step{};
  std::vector<TrajectorySample<Scalar>> samples;
};

namespace detail {

// Value and first three derivatives of a quintic at t.
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> evalQuintic(const Eigen::Matrix<Scalar, 6, 1>& c, Scalar t) {
  Eigen::Matrix<Scalar, 4, 1> r;
  r(0) = c(0) + t * (c(1) + t * (c(2) + t * (c(3) + t * (c(4) + t * c(5)))));
  r(1) = c(1) + t * (2 * c(2) + t * (3 * c(3) + t * (4 * c(4) + t * 5 * c(5))));
  r(2) = 2 * c(2) + t * (6 * c(3) + t * (12 * c(4) + t * 20 * c(5)));
  r(3) = 6 * c(3) + t * (24 * c(4) + t * 60 * c(5));
  return r;
}

// Rows of the boundary-condition system: position, velocity, acceleration at t.
template <typename Scalar>
void boundaryRows(Eigen::Matrix<Scalar, 6, 6>& m, int row, Scalar t) {
  for (int i = 0; i < 6; ++i) {
    const Scalar p = std::pow(t, i);
    m(row, i) = p;
    m(row + 1, i) = i >= 1 ? i * std::pow(t, i - 1) : Scalar(0);
    m(row + 2, i) = i >= 2 ? i * (i - 1) * std::pow(t, i - 2) : Scalar(0);
  }
}

}  // namespace detail

/// Minimum-jerk blend z(t) = 6s^5 - 15s^4 + 10s^3 with s = t / T.
template <typename Scalar>
Scalar shapeFunction(Scalar t, Scalar T) {
  if (!(T > 0) || t < 0 || t > T) throw std::domain_error("shapeFunction: t outside [0, T] or T <= 0");
  const Scalar s = t / T;
  return s * s * s * (10 + s * (-15 + 6 * s));
}

/// Solves the two 6x6 endpoint systems. Start longitudinal position, lateral
/// position, lateral speed and lateral acceleration are zero; the lateral end
/// state is (lane_width, 0, 0).
template <typename Scalar>
QuinticCoeffs<Scalar> buildGeneralTrajectory(const LcBoundaryConditions<Scalar>& bc) {
  if (!(bc.duration > 0)) throw std::domain_error("buildGeneralTrajectory: singular system, duration must be > 0");
  Eigen::Matrix<Scalar, 6, 6> m;
  detail::boundaryRows<Scalar>(m, 0, Scalar(0));
  detail::boundaryRows<Scalar>(m, 3, bc.duration);
  Eigen::Matrix<Scalar, 6, 1> lon_rhs, lat_rhs;
  lon_rhs << Scalar(0), bc.v_start, bc.a_start, bc.x_final, bc.v_end, bc.a_end;
  lat_rhs << Scalar(0), Scalar(0), Scalar(0), bc.lane_width, Scalar(0), Scalar(0);
  const auto lu = m.fullPivLu();
  QuinticCoeffs<Scalar> c;
  c.lon = lu.solve(lon_rhs);
  c.lat = lu.solve(lat_rhs);
  return c;
}

/// Coefficients of x(t) = v t - (v T - x_final) z(t), y(t) = D z(t).
template <typename Scalar>
QuinticCoeffs<Scalar> symmetricCoeffs(Scalar v_start, Scalar T, Scalar x_final, Scalar lane_width) {
  Eigen::Matrix<Scalar, 6, 1> z = Eigen::Matrix<Scalar, 6, 1>::Zero();
  z(3) = 10 / std::pow(T, 3);
  z(4) = -15 / std::pow(T, 4);
  z(5) = 6 / std::pow(T, 5);
  QuinticCoeffs<Scalar> c;
  c.lon = -(v_start * T - x_final) * z;
  c.lon(1) += v_start;
  c.lat = lane_width * z;
  return c;
}

template <typename Scalar>
TrajectorySample<Scalar> evaluate(const QuinticCoeffs<Scalar>& c, Scalar t) {
  const auto px = detail::evalQuintic<Scalar>(c.lon, t);
  const auto py = detail::evalQuintic<Scalar>(c.lat, t);
  TrajectorySample<Scalar> s;
  s.t = t;
  s.x = px(0);
  s.vx = px(1);
  s.ax = px(2);
  s.jx = px(3);
  s.y = py(0);
  s.vy = py(1);
  s.ay = py(2);
  s.jy = py(3);
  s.heading = std::atan2(s.vy, s.vx);
  return s;
}

template <typename Scalar>
TrajectorySample<Scalar> sampleAt(const PlannedTrajectory<Scalar>& traj, Scalar t) {
  if (t < 0 || t > traj.duration) throw std::domain_error("sampleAt: t outside [0, duration]");
  return evaluate(traj.coeffs, t);
}

/// Sample times k * step for k = 0, 1, ...; the final sample sits exactly at
/// the duration even when it is not a multiple of the step.
template <typename Scalar>
std::vector<Scalar> sampleTimes(Scalar duration, Scalar step) {
  std::vector<Scalar> ts;
  const auto n = static_cast<long>(std::floor(duration / step + Scalar(1e-9)));
  ts.reserve(n + 2);
  for (long k = 0; k <= n; ++k) ts.push_back(std::min(duration, k * step));
  if (duration - ts.back() > Scalar(1e-9) * std::max(Scalar(1), duration)) ts.push_back(duration);
  return ts;
}

template <typename Scalar>
PlannedTrajectory<Scalar> makeTrajectory(const QuinticCoeffs<Scalar>& c, Scalar duration, Scalar step) {
  if (!(duration > 0) || !(step > 0)) throw std::domain_error("makeTrajectory: duration and step must be > 0");
  PlannedTrajectory<Scalar> traj{c, duration, step, {}};
  for (Scalar t : sampleTimes(duration, step)) traj.samples.push_back(evaluate(c, t));
  return traj;
}

template <typename Scalar>
PlannedTrajectory<Scalar> buildSymmetricTrajectory(Scalar v_start, Scalar T, Scalar x_final, Scalar lane_width,
                                                   Scalar step = Scalar(0.1)) {
  if (!(v_start > 0) || !(T > 0) || !(x_final > 0))
    throw std::domain_error("buildSymmetricTrajectory: v_start, T and x_final must be > 0");
  return makeTrajectory(symmetricCoeffs(v_start, T, x_final, lane_width), T, step);
}

using Coeffs = QuinticCoeffs<double>;
using BoundaryConditions = LcBoundaryConditions<double>;
using Sample = TrajectorySample<double>;
using Trajectory = PlannedTrajectory<double>;

}  // namespace lcplan
