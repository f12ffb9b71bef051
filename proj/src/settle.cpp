#include "reorient/settle.hpp"

#include "reorient/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reorient {

namespace {

struct Pivot {
  Vec2 point;
  Vec2 dir;  // unit, horizontal, from the pivot toward the COM projection
};

Vec2 tie_break(const Vec2& normal) {
  // Deterministic tipping side when the COM sits exactly over the support.
  const Vec2 pref(0.6, 0.8);
  return normal.dot(pref) >= 0.0 ? normal : Vec2(-normal);
}

Pivot find_pivot(const SupportPolygon& hull, const Vec2& c) {
  const auto& h = hull.vertices();
  if (h.size() == 1) {
    const Vec2 d = c - h[0];
    return {h[0], d.norm() > 1e-9 ? Vec2(d.normalized()) : Vec2(1.0, 0.0)};
  }
  double best = std::numeric_limits<double>::infinity();
  Vec2 q = h[0];
  Vec2 edge_normal(1.0, 0.0);
  const std::size_t edges = h.size() == 2 ? 1 : h.size();
  for (std::size_t i = 0; i < edges; ++i) {
    const Vec2& a = h[i];
    const Vec2& b = h[(i + 1) % h.size()];
    const Vec2 ab = b - a;
    const double t = std::clamp((c - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const Vec2 p = a + t * ab;
    const double d = (c - p).norm();
    if (d < best - 1e-15) {
      best = d;
      q = p;
      edge_normal = Vec2(ab.y(), -ab.x()).normalized();  // outward for CCW hulls
    }
  }
  const Vec2 d = c - q;
  if (d.norm() > 1e-9) return {q, d.normalized()};
  return {q, h.size() == 2 ? tie_break(edge_normal) : edge_normal};
}

Pose drop(const TriMesh& mesh, Pose pose) {
  pose.position.z() -= mesh_min_z(mesh, pose);
  return pose;
}

}  // namespace

std::vector<Vec3> contact_points(const TriMesh& mesh, const Pose& pose, double tolerance) {
  std::vector<Vec3> out;
  for (const Vec3& v : mesh.vertices()) {
    const Vec3 w = transform_point(pose, v);
    if (w.z() < tolerance) out.push_back(w);
  }
  return out;
}

bool is_stable(const TriMesh& mesh, const Pose& pose, double tolerance) {
  const auto contacts = contact_points(mesh, pose, tolerance);
  if (contacts.empty()) throw Error(ErrorCode::NoContact, "no vertex within tolerance of the plane");
  const SupportPolygon hull(contacts);
  const Vec3 com = transform_point(pose, mesh.center_of_mass());
  return !hull.degenerate() && hull.signed_distance(com.head<2>()) > 1e-9;
}

SettleResult settle_on_plane(const TriMesh& mesh, const Pose& start, const SettleOptions& opts) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "settle_on_plane");
  const double z0 = mesh_min_z(mesh, start);
  if (z0 < -0.001 - 1e-12 || z0 > 0.1 + 1e-12)
    throw Error(ErrorCode::InvalidInput, "release height outside [-1 mm, 0.1 m] of the plane");

  SettleResult r;
  Pose pose = drop(mesh, start);
  r.com_heights.push_back(transform_point(pose, mesh.center_of_mass()).z());
  for (int it = 0; it < opts.max_iterations; ++it) {
    const auto contacts = contact_points(mesh, pose, opts.contact_tolerance);
    const SupportPolygon hull(contacts);
    const Vec3 com = transform_point(pose, mesh.center_of_mass());
    const Vec2 c = com.head<2>();
    if (!hull.degenerate() && hull.signed_distance(c) > 1e-9) {
      r.stable = true;
      break;
    }
    const Pivot pv = find_pivot(hull, c);
    const Vec3 pivot(pv.point.x(), pv.point.y(), 0.0);
    const Vec3 dir(pv.dir.x(), pv.dir.y(), 0.0);

    // (s, h): offset along dir and height above the pivot. A positive turn maps
    // (s, h) -> (s cos + h sin, h cos - s sin); a vertex ahead of the pivot
    // (s > 0) reaches the plane at atan2(h, s). A step that would leave a vertex
    // inside the contact band is extended to the exact landing angle instead.
    double landing = std::numeric_limits<double>::infinity();
    bool lands_in_band = false;
    const double cs = std::cos(opts.step), sn = std::sin(opts.step);
    for (const Vec3& v : mesh.vertices()) {
      const Vec3 rel = transform_point(pose, v) - pivot;
      const double s = rel.dot(dir);
      if (s <= 1e-12) continue;
      const double h = std::max(0.0, rel.z());
      landing = std::min(landing, std::atan2(h, s));
      lands_in_band = lands_in_band || h * cs - s * sn < opts.contact_tolerance;
    }
    const double theta = landing <= opts.step || lands_in_band ? landing : opts.step;
    const Vec3 axis = Vec3::UnitZ().cross(dir);
    const UnitQuat turn = UnitQuat::from_axis_angle(axis, theta);
    Pose next;
    next.orientation = turn * pose.orientation;
    next.position = pivot + turn.rotate(pose.position - pivot);
    pose = drop(mesh, next);
    r.total_rotation += theta;
    r.iterations = it + 1;
    r.com_heights.push_back(transform_point(pose, mesh.center_of_mass()).z());
  }
  r.final_pose = pose;
  return r;
}

UnitQuat random_orientation(Rng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  return {a * std::sin(2 * M_PI * u2), a * std::cos(2 * M_PI * u2), b * std::sin(2 * M_PI * u3),
          b * std::cos(2 * M_PI * u3)};
}

SceneState generate_pile(const MeshCatalog& catalog, int n_objects, std::uint64_t seed, const PileOptions& opts) {
  if (n_objects < 1) throw Error(ErrorCode::InvalidInput, "generate_pile needs n_objects >= 1");
  if (catalog.size() == 0) throw Error(ErrorCode::InvalidInput, "empty mesh catalog");
  Rng rng(seed);
  Heightmap all = Heightmap::empty(opts.center, opts.heightmap_size, opts.heightmap_cells);
  const Vec2 win_lo = all.origin, win_hi = all.origin + Vec2::Constant(opts.heightmap_size);
  std::vector<PlacedObject> placed;
  for (int k = 0; k < n_objects; ++k) {
    bool ok = false;
    int rejections = 0, redraws = 0;
    // Draws that settle outside the heightmap window are redrawn without
    // counting as collision rejections.
    while (!ok && rejections <= opts.max_rejections && redraws <= 10 * opts.max_rejections) {
      const std::size_t id = rng.index(catalog.size());
      const CatalogEntry& e = catalog[id];
      const Vec2 xy = opts.center + Vec2(rng.uniform(-opts.spread, opts.spread), rng.uniform(-opts.spread, opts.spread));
      const UnitQuat q = random_orientation(rng);
      const Pose start{Vec3(xy.x(), xy.y(), place_z_with_margin(e.mesh, q)), q};
      const SettleResult s = settle_on_plane(e.mesh, start);
      if (!s.stable) {
        ++rejections;
        continue;
      }
      const Pose& pose = s.final_pose;

      Vec2 lo = Vec2::Constant(1e300), hi = Vec2::Constant(-1e300);
      for (const Vec3& v : e.mesh.vertices()) {
        const Vec3 w = transform_point(pose, v);
        lo = lo.cwiseMin(w.head<2>());
        hi = hi.cwiseMax(w.head<2>());
      }
      if ((lo.array() < win_lo.array()).any() || (hi.array() > win_hi.array()).any()) {
        ++redraws;
        continue;
      }
      if (heightmap_collide_points(all, e.mesh, e.collision_points, pose)) {
        ++rejections;
        continue;
      }

      Heightmap mine = Heightmap::empty(opts.center, opts.heightmap_size, opts.heightmap_cells);
      rasterize_into(mine, e.mesh, pose);
      bool clash = false;
      for (const PlacedObject& p : placed) {
        const CatalogEntry& pe = catalog[p.mesh];
        if (heightmap_collide_points(mine, pe.mesh, pe.collision_points, p.pose)) {
          clash = true;
          break;
        }
      }
      if (clash) {
        ++rejections;
        continue;
      }
      rasterize_into(all, e.mesh, pose);
      placed.push_back({id, pose});
      ok = true;
    }
    if (!ok) throw Error(ErrorCode::PlacementFailure, "object " + std::to_string(k) + " rejected too many times");
  }

  SceneState scene;
  scene.catalog = &catalog;
  const std::size_t t = rng.index(placed.size());
  scene.target = placed[t];
  for (std::size_t i = 0; i < placed.size(); ++i)
    if (i != t) scene.distractors.push_back(placed[i]);
  scene.heightmap = Heightmap::empty(opts.center, opts.heightmap_size, opts.heightmap_cells);
  scene.heightmap = scene.rasterize();
  scene.region = opts.region;
  return scene;
}

}  // namespace reorient
