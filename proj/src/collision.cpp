#include "lcplan/collision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace lcplan {

void CollisionConfig::validate() const {
  if (!(vehicle_length > 0) || !(vehicle_width >= 0) || !(semi_major > 0) || !(semi_minor > 0))
    throw std::invalid_argument("CollisionConfig: dimensions must be positive");
}

double EllipseBoundary::implicit(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d l = toLocal(p);
  return l.x() * l.x() / (semi_major * semi_major) + l.y() * l.y() / (semi_minor * semi_minor);
}

Eigen::Vector2d EllipseBoundary::toLocal(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d d = p - center;
  const double c = std::cos(heading), s = std::sin(heading);
  return {d.x() * c - d.y() * s, d.x() * s + d.y() * c};
}

Eigen::Vector2d EllipseBoundary::toWorld(const Eigen::Vector2d& l) const {
  const double c = std::cos(heading), s = std::sin(heading);
  return center + Eigen::Vector2d(l.x() * c + l.y() * s, -l.x() * s + l.y() * c);
}

Eigen::Vector2d EllipseBoundary::point(double u) const {
  return toWorld({semi_major * std::cos(u), semi_minor * std::sin(u)});
}

Eigen::Vector2d EllipseBoundary::tangent(double u) const {
  const double c = std::cos(heading), s = std::sin(heading);
  const Eigen::Vector2d dl(-semi_major * std::sin(u), semi_minor * std::cos(u));
  return {dl.x() * c + dl.y() * s, -dl.x() * s + dl.y() * c};
}

EllipseBoundary boundaryOf(const Eigen::Vector2d& center, double heading, const CollisionConfig& cfg) {
  return {center, heading, cfg.semi_major, cfg.semi_minor};
}

namespace {

// Closest point on the axis-aligned ellipse (e0 >= e1) to (y0, y1) in the
// first quadrant; bisection on the Lagrange multiplier.
Eigen::Vector2d closestFirstQuadrant(double e0, double e1, double y0, double y1) {
  if (y1 > 0) {
    if (y0 > 0) {
      const double z0 = y0 / e0, z1 = y1 / e1;
      const double g = z0 * z0 + z1 * z1 - 1.0;
      if (g == 0.0) return {y0, y1};
      const double r0 = (e0 / e1) * (e0 / e1);
      double lo = z1 - 1.0;
      double hi = g < 0 ? 0.0 : std::hypot(r0 * z0, z1) - 1.0;
      double s = 0.0;
      for (int i = 0; i < 200; ++i) {
        s = 0.5 * (lo + hi);
        if (s == lo || s == hi) break;
        const double n0 = r0 * z0 / (s + r0), n1 = z1 / (s + 1.0);
        const double gs = n0 * n0 + n1 * n1 - 1.0;
        if (gs > 0) lo = s;
        else if (gs < 0) hi = s;
        else break;
      }
      return {r0 * y0 / (s + r0), y1 / (s + 1.0)};
    }
    return {0.0, e1};
  }
  const double num = e0 * y0, den = e0 * e0 - e1 * e1;
  if (num < den) {
    const double xr = num / den;
    return {e0 * xr, e1 * std::sqrt(std::max(0.0, 1.0 - xr * xr))};
  }
  return {e0, 0.0};
}

Eigen::Vector2d closestLocal(double a, double b, const Eigen::Vector2d& q) {
  const bool swap = a < b;
  const double e0 = swap ? b : a, e1 = swap ? a : b;
  const double y0 = std::abs(swap ? q.y() : q.x()), y1 = std::abs(swap ? q.x() : q.y());
  Eigen::Vector2d r = closestFirstQuadrant(e0, e1, y0, y1);
  if (swap) std::swap(r.x(), r.y());
  r.x() = std::copysign(r.x(), q.x());
  r.y() = std::copysign(r.y(), q.y());
  return r;
}

double paramOf(const EllipseBoundary& e, const Eigen::Vector2d& p) {
  const Eigen::Vector2d l = e.toLocal(p);
  return std::atan2(l.y() / e.semi_minor, l.x() / e.semi_major);
}

bool boundariesOverlap(const EllipseBoundary& e1, const EllipseBoundary& e2) {
  constexpr int kSamples = 721;
  for (int k = 0; k < kSamples; ++k) {
    const double u = 2.0 * std::numbers::pi * k / (kSamples - 1);
    if (e1.implicit(e2.point(u)) <= 1.0) return true;
    if (e2.implicit(e1.point(u)) <= 1.0) return true;
  }
  return false;
}

EllipseDistance sampledDistance(const EllipseBoundary& e1, const EllipseBoundary& e2, int n) {
  EllipseDistance best;
  best.distance = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Vector2d> q(n);
  for (int k = 0; k < n; ++k) q[k] = e2.point(2.0 * std::numbers::pi * k / n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d p = e1.point(2.0 * std::numbers::pi * i / n);
    for (int k = 0; k < n; ++k) {
      const double d = (p - q[k]).norm();
      if (d < best.distance) {
        best.distance = d;
        best.on_first = p;
        best.on_second = q[k];
      }
    }
  }
  best.used_fallback = true;
  return best;
}

// Newton iterations on |P1(u) - P2(w)|^2 from the alternating-projection pair.
void polish(const EllipseBoundary& e1, const EllipseBoundary& e2, EllipseDistance& r) {
  double u = paramOf(e1, r.on_first), w = paramOf(e2, r.on_second);
  auto f = [&](double uu, double ww) { return (e1.point(uu) - e2.point(ww)).squaredNorm(); };
  double fc = f(u, w);
  for (int it = 0; it < 20; ++it) {
    const Eigen::Vector2d d = e1.point(u) - e2.point(w);
    const Eigen::Vector2d t1 = e1.tangent(u), t2 = e2.tangent(w);
    // second derivatives of the parameterisation: P'' = -(P - center)
    const Eigen::Vector2d s1 = -(e1.point(u) - e1.center), s2 = -(e2.point(w) - e2.center);
    Eigen::Vector2d g(2 * d.dot(t1), -2 * d.dot(t2));
    Eigen::Matrix2d h;
    h(0, 0) = 2 * (t1.dot(t1) + d.dot(s1));
    h(1, 1) = 2 * (t2.dot(t2) - d.dot(s2));
    h(0, 1) = h(1, 0) = -2 * t1.dot(t2);
    if (g.norm() < 1e-14) break;
    Eigen::Vector2d step = -h.ldlt().solve(g);
    if (!step.allFinite() || g.dot(step) >= 0) step = -g / std::max(1.0, h.norm());
    double alpha = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const double fn = f(u + alpha * step.x(), w + alpha * step.y());
      if (fn <= fc) {
        u += alpha * step.x();
        w += alpha * step.y();
        improved = fn < fc;
        fc = fn;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
  }
  r.on_first = e1.point(u);
  r.on_second = e2.point(w);
  r.distance = std::sqrt(fc);
}

}  // namespace

Eigen::Vector2d projectOntoBoundary(const EllipseBoundary& e, const Eigen::Vector2d& p) {
  return e.toWorld(closestLocal(e.semi_major, e.semi_minor, e.toLocal(p)));
}

EllipseDistance minDistance(const EllipseBoundary& e1, const EllipseBoundary& e2) {
  EllipseDistance r;
  if (boundariesOverlap(e1, e2)) {
    r.overlap = true;
    r.distance = 0.0;
    return r;
  }
  constexpr double kTol = 1e-6;
  constexpr int kMaxIter = 200;
  Eigen::Vector2d p = projectOntoBoundary(e1, e2.center);
  Eigen::Vector2d q = projectOntoBoundary(e2, p);
  bool converged = false;
  int it = 0;
  for (; it < kMaxIter; ++it) {
    const Eigen::Vector2d p_next = projectOntoBoundary(e1, q);
    const Eigen::Vector2d q_next = projectOntoBoundary(e2, p_next);
    const double delta = std::max((p_next - p).norm(), (q_next - q).norm());
    p = p_next;
    q = q_next;
    if (delta < kTol) {
      converged = true;
      break;
    }
  }
  r.iterations = it;
  r.on_first = p;
  r.on_second = q;
  r.distance = (p - q).norm();
  if (!converged) {
    // dense sampling, then polished from the best sampled pair
    const auto s = sampledDistance(e1, e2, 720);
    if (s.distance < r.distance) {
      r.on_first = s.on_first;
      r.on_second = s.on_second;
      r.distance = s.distance;
    }
    r.used_fallback = true;
  }
  polish(e1, e2, r);
  return r;
}

ContainmentCheck rectangleContainmentCheck(const CollisionConfig& cfg) {
  const double hx = cfg.vehicle_length / 2.0, hy = cfg.vehicle_width / 2.0;
  const double v = hx * hx / (cfg.semi_major * cfg.semi_major) + hy * hy / (cfg.semi_minor * cfg.semi_minor);
  return {v <= 1.0 + 1e-12, v};
}

}  // namespace lcplan
