#pragma once

#include "reorient/geometry.hpp"

#include <span>
#include <vector>

namespace reorient {

using Vec2 = Eigen::Vector2d;

/// Convex hull of XY projections, counter-clockwise, no collinear points.
/// One- and two-point hulls are kept as degenerate polygons.
class SupportPolygon {
 public:
  static constexpr double kTolerance = 1e-6;

  SupportPolygon() = default;
  explicit SupportPolygon(std::span<const Vec3> points);
  explicit SupportPolygon(std::vector<Vec2> points);

  const std::vector<Vec2>& vertices() const { return hull_; }
  bool empty() const { return hull_.empty(); }
  bool degenerate() const { return hull_.size() < 3; }
  double area() const;

  /// Inside or within `tol` of the boundary.
  bool contains(const Vec2& p, double tol = kTolerance) const;
  /// Signed distance to the boundary, positive inside. Degenerate hulls have
  /// no interior, so the value is minus the distance to the point/segment.
  double signed_distance(const Vec2& p) const;

 private:
  std::vector<Vec2> hull_;
};

inline SupportPolygon support_polygon(std::span<const Vec3> contact_points) { return SupportPolygon(contact_points); }

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace reorient
