#include "reorient/sampling.hpp"

#include "reorient/error.hpp"
#include "reorient/settle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace reorient {

namespace {

std::vector<GraspCandidate> draw_grasps(const std::vector<SurfacePoint>& hits, const Pose& object_pose,
                                        const GripperModel& gripper, int n, std::uint64_t seed) {
  std::vector<std::size_t> idx(hits.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  const std::size_t k = std::min(idx.size(), static_cast<std::size_t>(std::max(0, n)));
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  std::vector<GraspCandidate> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(grasp_from_surface(hits[idx[i]].point, hits[idx[i]].normal, object_pose, gripper));
  return out;
}

std::vector<SurfacePoint> render_or_empty(const TriMesh& mesh, const Pose& pose, const Vec3& view) {
  try {
    return render_visible_surface(mesh, pose, view);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoHits) return {};
    throw;
  }
}

void rotated_bounds(const TriMesh& mesh, const UnitQuat& q, Vec3& lo, Vec3& hi) {
  lo = Vec3::Constant(1e300);
  hi = Vec3::Constant(-1e300);
  for (const Vec3& v : mesh.vertices()) {
    const Vec3 w = q.rotate(v);
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }
}

}  // namespace

std::vector<GraspCandidate> sample_grasps_initial(const SceneState& scene, const Pose& object_pose,
                                                  const GripperModel& gripper, int n, std::uint64_t seed) {
  const TriMesh& mesh = scene.target_entry().mesh;
  std::vector<SurfacePoint> hits;
  for (const SurfacePoint& s : render_or_empty(mesh, object_pose, Vec3(0, 0, -1)))
    if (s.point.z() >= scene.heightmap.height_at(s.point.x(), s.point.y())) hits.push_back(s);
  if (hits.empty()) throw Error(ErrorCode::NoVisibleSurface, "target has no surface visible from above");
  return draw_grasps(hits, object_pose, gripper, n, seed);
}

std::vector<Vec2> sample_reorient_xy(const SceneState& scene, const TriMesh& target) {
  const double edge = 2.0 * target.bounding_radius();
  std::vector<Vec2> out;
  for (const Vec2& xy : scene.region.grid())
    if (!cube_collide(scene.heightmap, xy, edge)) out.push_back(xy);
  if (out.empty()) throw Error(ErrorCode::NoFreePositions, "no region cell is clear of the pile");
  return out;
}

std::vector<Pose> enumerate_reorient_poses(const std::vector<Vec2>& xys, const TriMesh& target) {
  const std::vector<UnitQuat> qs = euler_grid(8);
  std::vector<double> zs;
  zs.reserve(qs.size());
  for (const UnitQuat& q : qs) zs.push_back(place_z_with_margin(target, q));
  std::vector<Pose> out;
  out.reserve(xys.size() * qs.size());
  for (const Vec2& xy : xys)
    for (std::size_t i = 0; i < qs.size(); ++i) out.push_back({Vec3(xy.x(), xy.y(), zs[i]), qs[i]});
  return out;
}

std::vector<Pose> enumerate_reorient_poses(const SceneState& scene, const TriMesh& target) {
  return enumerate_reorient_poses(sample_reorient_xy(scene, target), target);
}

std::vector<GraspCandidate> sample_grasps_goal(const TaskSpec& task, const TriMesh& target,
                                               const GripperModel& gripper, int n, std::uint64_t seed) {
  const auto hits = render_or_empty(target, task.goal, -task.container.opening());
  if (hits.empty()) throw Error(ErrorCode::NoVisibleSurface, "goal pose has no surface visible from the opening");
  return draw_grasps(hits, task.goal, gripper, n, seed);
}

double face_minus_x_angle(const Vec3& normal) {
  const Vec2 h(normal.x(), normal.y());
  if (h.norm() < 1e-6) return 0.0;
  return M_PI - std::atan2(h.y(), h.x());
}

std::vector<Pose> heuristic_reorient_poses(const SceneState& scene, const TaskSpec& task,
                                           const std::vector<GraspCandidate>& goal_grasps) {
  const CatalogEntry& e = (*scene.catalog)[task.target_mesh];
  Vec3 mean = Vec3::Zero();
  for (const GraspCandidate& g : goal_grasps) mean += g.local_normal;
  const Vec3 n_up = e.upright.rotate(mean);
  const double theta = face_minus_x_angle(n_up);
  std::vector<UnitQuat> qs;
  for (double d : {0.0, -M_PI / 4, M_PI / 4}) qs.push_back(UnitQuat::from_axis_angle(Vec3::UnitZ(), theta + d) * e.upright);
  const auto xys = sample_reorient_xy(scene, e.mesh);
  std::vector<Pose> out;
  for (const Vec2& xy : xys)
    for (const UnitQuat& q : qs) out.push_back({Vec3(xy.x(), xy.y(), place_z_with_margin(e.mesh, q)), q});
  return out;
}

std::vector<Slab> shelf_slabs(const ShelfLayout& s) {
  const double top = s.ceiling_z + s.wall;
  return {
      {{s.front_x, s.min_y, 0.0}, {s.back_x, s.max_y, s.board_z}},
      {{s.front_x, s.min_y, s.ceiling_z}, {s.back_x, s.max_y, top}},
      {{s.back_x, s.min_y - s.wall, 0.0}, {s.back_x + s.wall, s.max_y + s.wall, top}},
      {{s.front_x, s.min_y - s.wall, 0.0}, {s.back_x, s.min_y, top}},
      {{s.front_x, s.max_y, 0.0}, {s.back_x, s.max_y + s.wall, top}},
  };
}

std::vector<Slab> box_slabs(const BoxLayout& b) {
  const double x0 = b.center.x() - 0.5 * b.inner_x, x1 = b.center.x() + 0.5 * b.inner_x;
  const double y0 = b.center.y() - 0.5 * b.inner_y, y1 = b.center.y() + 0.5 * b.inner_y;
  const double w = b.wall, h = b.wall_height;
  return {
      {{x0 - w, y0 - w, 0.0}, {x0, y1 + w, h}},
      {{x1, y0 - w, 0.0}, {x1 + w, y1 + w, h}},
      {{x0, y0 - w, 0.0}, {x1, y0, h}},
      {{x0, y1, 0.0}, {x1, y1 + w, h}},
  };
}

TaskSpec random_task(const MeshCatalog& catalog, std::size_t target_mesh, ContainerKind kind, std::uint64_t seed,
                     const ShelfLayout& shelf, const BoxLayout& box) {
  const TriMesh& mesh = catalog[target_mesh].mesh;
  Rng rng(seed);
  for (int attempt = 0; attempt < 200; ++attempt) {
    const UnitQuat q0 = random_orientation(rng);
    const SettleResult s = settle_on_plane(mesh, {Vec3(0, 0, mesh_bottom_offset(mesh, q0)), q0});
    if (!s.stable) continue;
    const UnitQuat q = s.final_pose.orientation;
    Vec3 lo, hi;
    rotated_bounds(mesh, q, lo, hi);
    const Vec3 ext = hi - lo;
    TaskSpec t;
    t.target_mesh = target_mesh;
    t.container.kind = kind;
    if (kind == ContainerKind::Shelf) {
      const double room_y = shelf.max_y - shelf.min_y;
      if (ext.z() > shelf.ceiling_z - shelf.board_z - 0.06 || ext.x() > shelf.back_x - shelf.front_x - 0.04 ||
          ext.y() > room_y - 0.04)
        continue;
      const double front = shelf.front_x + rng.uniform(0.01, 0.05);
      const double y_lo = shelf.min_y + 0.02 - lo.y(), y_hi = std::min(shelf.max_y - 0.02 - hi.y(), 0.7);
      if (y_hi < y_lo) continue;
      const double y = rng.uniform(y_lo, y_hi);
      t.goal = {Vec3(front - lo.x(), y, shelf.board_z - lo.z() + kGoalLift), q};
      t.container.slabs = shelf_slabs(shelf);
      const double x0 = t.goal.position.x() + lo.x(), x1 = t.goal.position.x() + hi.x();
      const double z0 = shelf.board_z, z1 = shelf.board_z + ext.z();
      for (double side : {-1.0, 1.0}) {
        const double off = side * (ext.y() + shelf.neighbor_gap);
        const double ya = y + lo.y() + off, yb = y + hi.y() + off;
        if (ya >= shelf.min_y && yb <= shelf.max_y) t.container.slabs.push_back({{x0, ya, z0}, {x1, yb, z1}});
      }
    } else {
      if (ext.x() > box.inner_x - 0.04 || ext.y() > box.inner_y - 0.04) continue;
      const double hx = 0.5 * (box.inner_x - ext.x()) - 0.02, hy = 0.5 * (box.inner_y - ext.y()) - 0.02;
      const Vec2 c = box.center + Vec2(rng.uniform(-hx, hx), rng.uniform(-hy, hy));
      const Vec3 mid = 0.5 * (lo + hi);
      t.goal = {Vec3(c.x() - mid.x(), c.y() - mid.y(), -lo.z() + kGoalLift), q};
      t.container.slabs = box_slabs(box);
    }
    return t;
  }
  throw Error(ErrorCode::PlacementFailure, "no resting orientation fits the container");
}

}  // namespace reorient
