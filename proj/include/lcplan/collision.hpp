#pragma once

#include <Eigen/Core>

namespace lcplan {

struct CollisionConfig {
  double vehicle_length = 5.0;  // l_a
  double vehicle_width = 2.0;   // l_b
  double semi_major = 2.5;      // C_a
  double semi_minor = 1.0;      // C_b

  void validate() const;
  bool operator==(const CollisionConfig&) const = default;
};

/// Rotated ellipse {p : M^2/Ca^2 + N^2/Cb^2 = 1} with
/// M = dx cos(h) - dy sin(h), N = dx sin(h) + dy cos(h), d = p - center.
struct EllipseBoundary {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double heading = 0.0;
  double semi_major = 1.0;
  double semi_minor = 1.0;

  /// Implicit value; < 1 inside, 1 on the boundary.
  double implicit(const Eigen::Vector2d& p) const;
  /// Boundary point at parameter angle u: local (M, N) = (Ca cos u, Cb sin u).
  Eigen::Vector2d point(double u) const;
  Eigen::Vector2d tangent(double u) const;
  Eigen::Vector2d toLocal(const Eigen::Vector2d& p) const;
  Eigen::Vector2d toWorld(const Eigen::Vector2d& local) const;
};

EllipseBoundary boundaryOf(const Eigen::Vector2d& center, double heading, const CollisionConfig& cfg);

/// Closest boundary point of e to p (p may lie inside or outside).
Eigen::Vector2d projectOntoBoundary(const EllipseBoundary& e, const Eigen::Vector2d& p);

struct EllipseDistance {
  double distance = 0.0;
  bool overlap = false;
  Eigen::Vector2d on_first = Eigen::Vector2d::Zero();
  Eigen::Vector2d on_second = Eigen::Vector2d::Zero();
  int iterations = 0;
  bool used_fallback = false;
};

/// Minimum distance between two ellipse boundaries. Overlapping (or nested)
/// ellipses return distance 0 with the overlap flag set.
EllipseDistance minDistance(const EllipseBoundary& e1, const EllipseBoundary& e2);

/// (l_a/2)^2/C_a^2 + (l_b/2)^2/C_b^2; the vehicle rectangle fits when <= 1.
struct ContainmentCheck {
  bool contained = false;
  double value = 0.0;
};
ContainmentCheck rectangleContainmentCheck(const CollisionConfig& cfg);

}  // namespace lcplan
