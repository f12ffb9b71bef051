#include "reorient/hull2d.hpp"

#include <algorithm>
#include <cmath>

namespace reorient {

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

std::vector<Vec2> monotone_chain(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return (a - b).norm() < 1e-12; }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> h(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 1e-14) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 1e-14) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

}  // namespace

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

SupportPolygon::SupportPolygon(std::span<const Vec3> points) {
  std::vector<Vec2> xy;
  xy.reserve(points.size());
  for (const Vec3& p : points) xy.emplace_back(p.x(), p.y());
  hull_ = monotone_chain(std::move(xy));
}

SupportPolygon::SupportPolygon(std::vector<Vec2> points) : hull_(monotone_chain(std::move(points))) {}

double SupportPolygon::area() const {
  double a = 0.0;
  for (std::size_t i = 0; i < hull_.size(); ++i) {
    const Vec2& p = hull_[i];
    const Vec2& q = hull_[(i + 1) % hull_.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

double SupportPolygon::signed_distance(const Vec2& p) const {
  if (hull_.empty()) return -std::numeric_limits<double>::infinity();
  if (hull_.size() == 1) return -(p - hull_[0]).norm();
  if (hull_.size() == 2) return -point_segment_distance(p, hull_[0], hull_[1]);
  bool inside = true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull_.size(); ++i) {
    const Vec2& a = hull_[i];
    const Vec2& b = hull_[(i + 1) % hull_.size()];
    if (cross(a, b, p) < 0.0) inside = false;
    best = std::min(best, point_segment_distance(p, a, b));
  }
  return inside ? best : -best;
}

bool SupportPolygon::contains(const Vec2& p, double tol) const {
  return !hull_.empty() && signed_distance(p) >= -tol;
}

}  // namespace reorient
