#include "doctest.h"

#include "reorient/error.hpp"
#include "reorient/sampling.hpp"
#include "reorient/settle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace reorient;

namespace {

SceneState lone_target(const std::string& id, const UnitQuat& q, const Vec2& xy = Vec2(0.5, 0.15)) {
  SceneState s;
  s.target.mesh = s.catalog->index_of(id);
  const TriMesh& m = s.target_entry().mesh;
  s.target.pose = {Vec3(xy.x(), xy.y(), mesh_bottom_offset(m, q)), q};
  s.heightmap = Heightmap::empty(Vec2(0.5, 0.15));
  return s;
}

SceneState seeded_pile(std::uint64_t seed) { return generate_pile(MeshCatalog::standard(), 5, seed, PileOptions{}); }

void check_grasp_geometry(const GraspCandidate& g, const GripperModel& gripper, const Pose& object_pose) {
  const Vec3 axis = g.tcp.orientation.rotate(gripper.approach_axis);
  CHECK(axis.dot(g.normal) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK((g.tcp.position - (g.point + kSuctionStandoff * g.normal)).norm() < 1e-12);
  const Pose w = object_pose * g.relative;
  CHECK((w.position - g.tcp.position).norm() < 1e-12);
  CHECK(angular_distance(w.orientation, g.tcp.orientation) < 1e-9);
}

TaskSpec box_task(std::size_t mesh, const UnitQuat& q) {
  TaskSpec t;
  t.target_mesh = mesh;
  t.container.kind = ContainerKind::Box;
  t.container.slabs = box_slabs();
  const TriMesh& m = MeshCatalog::standard()[mesh].mesh;
  t.goal = {Vec3(0.5, 0.6, mesh_bottom_offset(m, q) + kGoalLift), q};
  return t;
}

}  // namespace

TEST_CASE("initial grasps: count, top faces and rotation oracle") {
  const GripperModel gripper = GripperModel::builtin(GripperShape::L);
  const SceneState s = lone_target("cracker_box", UnitQuat::identity());
  const auto grasps = sample_grasps_initial(s, s.target.pose, gripper);
  CHECK(grasps.size() == 30);
  for (const auto& g : grasps) check_grasp_geometry(g, gripper, s.target.pose);

  // A flat cube seen from above exposes only its top face.
  MeshCatalog cat;
  cat.add("cube", make_box(0.1, 0.1, 0.1));
  SceneState c;
  c.catalog = &cat;
  c.target.pose = {Vec3(0.5, 0.15, 0.05), UnitQuat::identity()};
  c.heightmap = Heightmap::empty(Vec2(0.5, 0.15));
  for (const auto& g : sample_grasps_initial(c, c.target.pose, gripper, 30, 3))
    CHECK((g.normal - Vec3::UnitZ()).norm() < 1e-9);
}

TEST_CASE("initial grasps are deterministic and distinct draws") {
  const GripperModel gripper = GripperModel::builtin(GripperShape::I);
  const SceneState s = seeded_pile(4);
  const auto a = sample_grasps_initial(s, s.target.pose, gripper, 30, 9);
  const auto b = sample_grasps_initial(s, s.target.pose, gripper, 30, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i].point - b[i].point).norm() == 0.0);
  const auto few = sample_grasps_initial(s, s.target.pose, gripper, 3, 9);
  CHECK(few.size() == 3);
  std::set<std::tuple<double, double, double>> pts;
  for (const auto& g : a) pts.insert({g.point.x(), g.point.y(), g.point.z()});
  CHECK(pts.size() == a.size());
}

TEST_CASE("target buried under a slab of distractor height has no visible surface") {
  SceneState s = lone_target("sugar_box", UnitQuat::identity());
  for (double& h : s.heightmap.data) h = 1.0;
  CHECK_THROWS_AS(sample_grasps_initial(s, s.target.pose, GripperModel::builtin(GripperShape::I)), Error);
}

TEST_CASE("empty region gives the full 10 x 8 grid and 40,960 poses") {
  const SceneState s = lone_target("cracker_box", UnitQuat::identity());
  const auto xys = sample_reorient_xy(s, s.target_entry().mesh);
  CHECK(xys.size() == 80);
  const auto poses = enumerate_reorient_poses(s, s.target_entry().mesh);
  CHECK(poses.size() == 40960);
  CHECK(enumerate_reorient_poses(std::vector<Vec2>{Vec2(0.5, -0.2)}, s.target_entry().mesh).size() == 512);
  for (const Pose& p : poses) {
    CHECK(s.region.contains(p.position.head<2>()));
    CHECK(p.position.z() == doctest::Approx(place_z_with_margin(s.target_entry().mesh, p.orientation)).epsilon(1e-12));
  }
  // The z and orientation set repeats at every position.
  for (std::size_t i = 0; i < 512; ++i) {
    CHECK(poses[i].position.z() == poses[512 + i].position.z());
    CHECK(poses[i].orientation == poses[512 * 7 + i].orientation);
  }
}

TEST_CASE("a pile covering the region leaves no free position") {
  SceneState s = lone_target("sugar_box", UnitQuat::identity());
  s.heightmap = Heightmap::empty(Vec2(0.5, -0.2), 0.8, 64);
  for (double& h : s.heightmap.data) h = 0.2;
  try {
    sample_reorient_xy(s, s.target_entry().mesh);
    FAIL("expected NoFreePositions");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoFreePositions);
  }
}

TEST_CASE("raising the pile never frees a position") {
  SceneState s = lone_target("bottle", UnitQuat::identity());
  s.heightmap = Heightmap::empty(Vec2(0.5, -0.2), 0.8, 64);
  Rng rng(12);
  const auto grid = s.region.grid();
  auto free_set = [&]() {
    std::set<std::pair<double, double>> out;
    try {
      for (const Vec2& p : sample_reorient_xy(s, s.target_entry().mesh)) out.insert({p.x(), p.y()});
    } catch (const Error&) {
    }
    return out;
  };
  auto prev = free_set();
  for (const auto& p : prev) CHECK(std::any_of(grid.begin(), grid.end(), [&](const Vec2& g) { return g.x() == p.first && g.y() == p.second; }));
  for (int step = 0; step < 30; ++step) {
    const int ix = static_cast<int>(rng.index(64)), iy = static_cast<int>(rng.index(64));
    s.heightmap.at(ix, iy) += rng.uniform(0.0, 0.1);
    const auto now = free_set();
    CHECK(std::includes(prev.begin(), prev.end(), now.begin(), now.end()));
    prev = now;
  }
}

TEST_CASE("enumerated poses clear the pile") {
  for (std::uint64_t seed : {3u, 6u}) {
    const SceneState s = seeded_pile(seed);
    const CatalogEntry& e = s.target_entry();
    for (const Pose& p : enumerate_reorient_poses(s, e.mesh)) {
      CHECK_FALSE(heightmap_collide_points(s.heightmap, e.mesh, e.collision_points, p));
      CHECK(mesh_bottom_offset(e.mesh, p.orientation) + kReleaseMargin == doctest::Approx(p.position.z()));
    }
  }
}

TEST_CASE("goal grasps in a box face up and reanchor exactly") {
  const GripperModel gripper = GripperModel::builtin(GripperShape::L);
  const auto& cat = MeshCatalog::standard();
  for (std::size_t m = 0; m < cat.size(); ++m) {
    const TaskSpec t = box_task(m, cat[m].upright);
    const auto grasps = sample_grasps_goal(t, cat[m].mesh, gripper, 30, m);
    CHECK(grasps.size() == 30);
    for (const auto& g : grasps) {
      CHECK(g.normal.z() > 0.0);
      check_grasp_geometry(g, gripper, t.goal);
      const GraspCandidate back = reanchor(g, t.goal);
      CHECK((back.point - g.point).norm() < 1e-9);
      CHECK((back.tcp.position - g.tcp.position).norm() < 1e-9);
    }
  }
}

TEST_CASE("shelf goal grasps face the opening") {
  const auto& cat = MeshCatalog::standard();
  const GripperModel gripper = GripperModel::builtin(GripperShape::L);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t m = seed % cat.size();
    const TaskSpec t = random_task(cat, m, ContainerKind::Shelf, seed);
    for (const auto& g : sample_grasps_goal(t, cat[m].mesh, gripper, 30, seed)) CHECK(g.normal.x() < 0.0);
  }
}

TEST_CASE("random tasks rest inside their container") {
  const auto& cat = MeshCatalog::standard();
  const ShelfLayout shelf;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    const std::size_t m = seed % cat.size();
    const ContainerKind kind = seed % 2 ? ContainerKind::Box : ContainerKind::Shelf;
    const TaskSpec a = random_task(cat, m, kind, seed), b = random_task(cat, m, kind, seed);
    CHECK((a.goal.position - b.goal.position).norm() == 0.0);
    const TriMesh& mesh = cat[m].mesh;
    Pose on_plane = a.goal;
    on_plane.position.z() = mesh_bottom_offset(mesh, a.goal.orientation);
    CHECK(is_stable(mesh, on_plane));
    const double floor = kind == ContainerKind::Shelf ? shelf.board_z : 0.0;
    CHECK(a.goal.position.z() - mesh_bottom_offset(mesh, a.goal.orientation) == doctest::Approx(floor + kGoalLift));
    for (const Vec3& v : mesh.vertices()) {
      const Vec3 w = transform_point(a.goal, v);
      for (const Slab& sl : a.container.slabs) {
        const bool inside = (w.array() > sl.min.array() + 1e-6).all() && (w.array() < sl.max.array() - 1e-6).all();
        CHECK_FALSE(inside);
      }
    }
  }
}

TEST_CASE("face_minus_x_angle turns the normal onto -X") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 n = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const double a = face_minus_x_angle(n);
    const Vec3 r = UnitQuat::from_axis_angle(Vec3::UnitZ(), a).rotate(n);
    const double h = std::hypot(n.x(), n.y());
    CHECK(r.x() == doctest::Approx(-h).epsilon(1e-9));
    CHECK(std::abs(r.y()) < 1e-9);
  }
  CHECK(face_minus_x_angle(Vec3::UnitZ()) == 0.0);
}

TEST_CASE("heuristic poses: upright, facing -X, stable and bounded") {
  const auto& cat = MeshCatalog::standard();
  const GripperModel gripper = GripperModel::builtin(GripperShape::L);
  const SceneState s = seeded_pile(21);
  const CatalogEntry& e = s.target_entry();
  TaskSpec t = random_task(cat, s.target.mesh, ContainerKind::Shelf, 5);
  const auto goal_grasps = sample_grasps_goal(t, e.mesh, gripper, 30, 5);
  const auto poses = heuristic_reorient_poses(s, t, goal_grasps);
  const auto xys = sample_reorient_xy(s, e.mesh);
  CHECK(poses.size() <= 3 * xys.size());
  CHECK(poses.size() == 3 * xys.size());

  Vec3 mean = Vec3::Zero();
  for (const auto& g : goal_grasps) mean += g.local_normal;
  const Vec3 n = poses[0].orientation.rotate(mean).normalized();
  const double h = std::hypot(n.x(), n.y());
  if (h > 1e-6) CHECK(-n.x() == doctest::Approx(h).epsilon(1e-9));

  for (std::size_t i = 0; i < 3; ++i) {
    Pose p = poses[i];
    // Each orientation is the upright one turned about Z.
    const Vec3 z = p.orientation.rotate(e.upright.inverse().rotate(Vec3::UnitZ()));
    CHECK((z - Vec3::UnitZ()).norm() < 1e-9);
    const SettleResult r = settle_on_plane(e.mesh, p);
    CHECK(r.stable);
    CHECK(angular_distance(r.final_pose.orientation, p.orientation) < 1e-6);
  }
}

TEST_CASE("heuristic for a cracker box with a side grasp stands it up with the grasp face to -X") {
  const auto& cat = MeshCatalog::standard();
  const std::size_t m = cat.index_of("cracker_box");
  const SceneState s = lone_target("cracker_box", UnitQuat::identity());
  TaskSpec t;
  t.target_mesh = m;
  t.goal = {Vec3(0.5, 0.6, 0.3), cat[m].upright};
  const GripperModel gripper = GripperModel::builtin(GripperShape::I);
  // Side face with outward normal +Y in the object frame.
  const std::vector<GraspCandidate> g{grasp_from_surface(Vec3(0.5, 0.63, 0.3), Vec3::UnitY(), t.goal, gripper)};
  const auto poses = heuristic_reorient_poses(s, t, g);
  const Vec3 n = poses[0].orientation.rotate(g[0].local_normal);
  CHECK((n - Vec3(-1, 0, 0)).norm() < 1e-9);
  CHECK((poses[0].orientation.rotate(Vec3::UnitZ()) - Vec3::UnitZ()).norm() < 1e-9);
}
