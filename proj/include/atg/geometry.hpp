#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>

#include "atg/core_model.hpp"

namespace atg::geom {

inline Point operator+(Point a, Point b) noexcept { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) noexcept { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) noexcept { return {s * a.x, s * a.y}; }

inline double dot(Point a, Point b) noexcept { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) noexcept { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) noexcept { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) noexcept { return norm(b - a); }

inline Point lerp(Point a, Point b, double t) noexcept { return a + t * (b - a); }

/// Unsigned angle in degrees between two direction vectors; 0 if either is
/// degenerate.
inline double angle_deg(Point u, Point v) noexcept {
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  const double c = std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

inline double polyline_length(std::span<const Point> pts) noexcept {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += distance(pts[i - 1], pts[i]);
  return len;
}

/// Perpendicular distance from p to the infinite line through a, b.
inline double line_distance(Point p, Point a, Point b) noexcept {
  const double len = distance(a, b);
  if (len == 0.0) return distance(p, a);
  return std::fabs(cross(b - a, p - a)) / len;
}

/// Parameter of the projection of p onto segment a->b (unclamped).
inline double project_param(Point p, Point a, Point b) noexcept {
  const Point d = b - a;
  const double dd = dot(d, d);
  if (dd == 0.0) return 0.0;
  return dot(p - a, d) / dd;
}

struct SegmentHit {
  double t = 0.0;  // parameter on first segment
  double u = 0.0;  // parameter on second segment
  Point point;
};

/// Intersection of non-parallel segments a0->a1 and b0->b1, including
/// touching at endpoints (within `eps` in parameter space). Parallel segments
/// return nullopt; collinear overlap is handled separately by the caller.
inline std::optional<SegmentHit> intersect_segments(Point a0, Point a1, Point b0, Point b1,
                                                    double eps = 1e-9) noexcept {
  const Point r = a1 - a0;
  const Point s = b1 - b0;
  const double denom = cross(r, s);
  const double scale = norm(r) * norm(s);
  if (scale == 0.0 || std::fabs(denom) <= 1e-12 * scale) return std::nullopt;
  const double t = cross(b0 - a0, s) / denom;
  const double u = cross(b0 - a0, r) / denom;
  if (t < -eps || t > 1.0 + eps || u < -eps || u > 1.0 + eps) return std::nullopt;
  SegmentHit hit;
  hit.t = std::clamp(t, 0.0, 1.0);
  hit.u = std::clamp(u, 0.0, 1.0);
  hit.point = lerp(a0, a1, hit.t);
  return hit;
}

/// True when segments cross (or touch) at a point that is not within `tol`
/// of a shared endpoint. Used by the planarity scan.
inline bool crosses_off_node(Point a0, Point a1, Point b0, Point b1, double tol = 1e-6) noexcept {
  const double len_a = distance(a0, a1);
  const double len_b = distance(b0, b1);
  auto near = [tol](Point p, Point q) { return distance(p, q) <= tol; };
  if (auto hit = intersect_segments(a0, a1, b0, b1)) {
    const Point p = hit->point;
    const bool at_a_end = near(p, a0) || near(p, a1);
    const bool at_b_end = near(p, b0) || near(p, b1);
    return !(at_a_end && at_b_end);
  }
  // Parallel: overlapping collinear segments count as crossing unless they
  // are the same edge.
  if (len_a == 0.0 || len_b == 0.0) return false;
  if (line_distance(b0, a0, a1) > tol || line_distance(b1, a0, a1) > tol) return false;
  const double t0 = project_param(b0, a0, a1);
  const double t1 = project_param(b1, a0, a1);
  const double lo = std::max(0.0, std::min(t0, t1));
  const double hi = std::min(1.0, std::max(t0, t1));
  if ((hi - lo) * len_a <= tol) return false;  // touch at a point (shared endpoint)
  const bool same_edge = (near(a0, b0) && near(a1, b1)) || (near(a0, b1) && near(a1, b0));
  return !same_edge;
}

}  // namespace atg::geom
