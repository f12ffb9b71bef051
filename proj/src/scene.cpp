#include "reorient/scene.hpp"

#include "reorient/error.hpp"

#include <algorithm>
#include <cmath>

namespace reorient {

Heightmap Heightmap::empty(const Vec2& center, double size, int cells) {
  Heightmap hm;
  hm.resolution = size / cells;
  hm.width = hm.height = cells;
  hm.origin = center - Vec2(0.5 * size, 0.5 * size);
  hm.data.assign(static_cast<std::size_t>(cells) * cells, 0.0);
  return hm;
}

double Heightmap::height_at(double x, double y) const {
  const double fx = (x - origin.x()) / resolution;
  const double fy = (y - origin.y()) / resolution;
  if (fx < 0.0 || fy < 0.0) return 0.0;
  const int ix = static_cast<int>(fx);
  const int iy = static_cast<int>(fy);
  if (ix >= width || iy >= height) return 0.0;
  return at(ix, iy);
}

double Heightmap::max_in_rect(const Vec2& lo, const Vec2& hi) const {
  // Cells whose half-open extent intersects the open rectangle (lo, hi).
  const int x0 = std::max(0, static_cast<int>(std::floor((lo.x() - origin.x()) / resolution)));
  const int y0 = std::max(0, static_cast<int>(std::floor((lo.y() - origin.y()) / resolution)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil((hi.x() - origin.x()) / resolution)) - 1);
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil((hi.y() - origin.y()) / resolution)) - 1);
  double m = 0.0;
  for (int iy = y0; iy <= y1; ++iy)
    for (int ix = x0; ix <= x1; ++ix) m = std::max(m, at(ix, iy));
  return m;
}

double Heightmap::max_height() const {
  return data.empty() ? 0.0 : *std::max_element(data.begin(), data.end());
}

void rasterize_into(Heightmap& hm, const TriMesh& mesh, const Pose& pose) {
  std::vector<Vec3> w;
  w.reserve(mesh.vertices().size());
  for (const Vec3& v : mesh.vertices()) w.push_back(transform_point(pose, v));
  for (const auto& f : mesh.faces()) {
    const Vec3& a = w[f[0]];
    const Vec3& b = w[f[1]];
    const Vec3& c = w[f[2]];
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    if (std::abs(det) < 1e-14) continue;
    const double lo_x = std::min({a.x(), b.x(), c.x()}), hi_x = std::max({a.x(), b.x(), c.x()});
    const double lo_y = std::min({a.y(), b.y(), c.y()}), hi_y = std::max({a.y(), b.y(), c.y()});
    const int x0 = std::max(0, static_cast<int>(std::floor((lo_x - hm.origin.x()) / hm.resolution - 0.5)));
    const int x1 = std::min(hm.width - 1, static_cast<int>(std::ceil((hi_x - hm.origin.x()) / hm.resolution - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor((lo_y - hm.origin.y()) / hm.resolution - 0.5)));
    const int y1 = std::min(hm.height - 1, static_cast<int>(std::ceil((hi_y - hm.origin.y()) / hm.resolution - 0.5)));
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix) {
        const Vec2 p = hm.cell_center(ix, iy);
        const double l1 = ((b.x() - p.x()) * (c.y() - p.y()) - (c.x() - p.x()) * (b.y() - p.y())) / det;
        const double l2 = ((c.x() - p.x()) * (a.y() - p.y()) - (a.x() - p.x()) * (c.y() - p.y())) / det;
        const double l3 = 1.0 - l1 - l2;
        constexpr double e = -1e-12;
        if (l1 < e || l2 < e || l3 < e) continue;
        const double z = std::max(0.0, l1 * a.z() + l2 * b.z() + l3 * c.z());
        double& cell = hm.at(ix, iy);
        cell = std::max(cell, z);
      }
  }
}

Heightmap build_heightmap(std::span<const MeshInstance> distractors, const Vec2& center, double size, int cells) {
  if (!(size > 0.0) || cells < 1) throw Error(ErrorCode::InvalidInput, "heightmap resolution must be > 0");
  Heightmap hm = Heightmap::empty(center, size, cells);
  for (const MeshInstance& d : distractors) rasterize_into(hm, *d.mesh, d.pose);
  return hm;
}

bool heightmap_collide_points(const Heightmap& hm, const TriMesh& mesh, std::span<const Vec3> samples,
                              const Pose& pose, double clearance) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& v : mesh.vertices()) {
    const Vec3 w = transform_point(pose, v);
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }
  if (lo.z() < -kGroundTolerance) return true;
  const double top = hm.max_in_rect(lo.head<2>() - Vec2::Constant(1e-9), hi.head<2>() + Vec2::Constant(1e-9));
  if (top <= 0.0 || lo.z() >= top + clearance) return false;
  for (const Vec3& s : samples) {
    const Vec3 w = transform_point(pose, s);
    const double h = hm.height_at(w.x(), w.y());
    if (h > 0.0 && w.z() < h + clearance) return true;
  }
  return false;
}

bool heightmap_collide(const Heightmap& hm, const TriMesh& mesh, const Pose& pose, double clearance) {
  const auto samples = mesh.surface_samples(0.5 * hm.resolution);
  return heightmap_collide_points(hm, mesh, samples, pose, clearance);
}

bool cube_collide(const Heightmap& hm, const Vec2& xy, double cube_edge, double clearance) {
  if (!(cube_edge > 0.0)) throw Error(ErrorCode::InvalidInput, "cube edge must be > 0");
  const Vec2 half = Vec2::Constant(0.5 * cube_edge);
  return hm.max_in_rect(xy - half, xy + half) > clearance;
}

std::vector<SurfacePoint> render_visible_surface(const TriMesh& mesh, const Pose& pose, const Vec3& view_dir,
                                                 int n_rays) {
  const double vn = view_dir.norm();
  if (vn < 1e-12) throw Error(ErrorCode::ZeroVector, "view direction");
  const Vec3 d = view_dir / vn;
  const Vec3 u = any_perpendicular(d);
  const Vec3 v = d.cross(u);
  // Work in the mesh frame.
  const Pose inv = pose_inverse(pose);
  const Vec3 dm = inv.orientation.rotate(d);
  const Vec3 um = inv.orientation.rotate(u);
  const Vec3 vm = inv.orientation.rotate(v);
  double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300, d0 = 1e300;
  for (const Vec3& p : mesh.vertices()) {
    u0 = std::min(u0, p.dot(um));
    u1 = std::max(u1, p.dot(um));
    v0 = std::min(v0, p.dot(vm));
    v1 = std::max(v1, p.dot(vm));
    d0 = std::min(d0, p.dot(dm));
  }
  const int side = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(std::max(1, n_rays))))));
  std::vector<SurfacePoint> out;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      const double a = u0 + (u1 - u0) * (i + 0.5) / side;
      const double b = v0 + (v1 - v0) * (j + 0.5) / side;
      const Vec3 origin = a * um + b * vm + (d0 - 1.0) * dm;
      const auto hit = mesh.raycast(origin, dm);
      if (!hit) continue;
      const Vec3 n = mesh.face_normal(hit->face);
      if (n.dot(dm) >= 0.0) continue;
      out.push_back({transform_point(pose, hit->point), pose.orientation.rotate(n)});
    }
  if (out.empty()) throw Error(ErrorCode::NoHits, "no visible surface along the view direction");
  return out;
}

double place_z_with_margin(const TriMesh& mesh, const UnitQuat& orientation) {
  return mesh_bottom_offset(mesh, orientation) + kReleaseMargin;
}

ContainerKind parse_container_kind(const std::string& s) {
  if (s == "shelf") return ContainerKind::Shelf;
  if (s == "box") return ContainerKind::Box;
  throw Error(ErrorCode::InvalidInput, "unknown container kind '" + s + "'");
}

const char* to_string(ContainerKind k) { return k == ContainerKind::Shelf ? "shelf" : "box"; }

std::vector<Vec2> Region::grid() const {
  std::vector<Vec2> out;
  const Vec2 step((max.x() - min.x()) / nx, (max.y() - min.y()) / ny);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) out.emplace_back(min.x() + (i + 0.5) * step.x(), min.y() + (j + 0.5) * step.y());
  return out;
}

bool Region::contains(const Vec2& p, double tol) const {
  return p.x() >= min.x() - tol && p.x() <= max.x() + tol && p.y() >= min.y() - tol && p.y() <= max.y() + tol;
}

Heightmap SceneState::rasterize() const {
  Heightmap hm = heightmap;
  std::fill(hm.data.begin(), hm.data.end(), 0.0);
  for (const PlacedObject& d : distractors) rasterize_into(hm, (*catalog)[d.mesh].mesh, d.pose);
  return hm;
}

bool sphere_hits_slab(const Vec3& c, double r, const Slab& s) {
  const Vec3 closest = c.cwiseMax(s.min).cwiseMin(s.max);
  return (c - closest).squaredNorm() < r * r || ((c.array() >= s.min.array()).all() && (c.array() <= s.max.array()).all());
}

}  // namespace reorient
