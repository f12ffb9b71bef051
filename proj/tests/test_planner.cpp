#include "doctest.h"

#include "reorient/error.hpp"
#include "reorient/planner.hpp"
#include "reorient/sampling.hpp"

#include <cmath>

using namespace reorient;

namespace {

const Robot& robot() {
  static const Robot r;
  return r;
}

CollisionWorld empty_world() { return CollisionWorld(Heightmap::empty(Vec2(0.5, 0.0)), {}); }

// A few raised blocks in front of the robot.
CollisionWorld cluttered_world(std::uint64_t seed) {
  Heightmap hm = Heightmap::empty(Vec2(0.45, 0.0), 0.8, 64);
  Rng rng(seed);
  for (int b = 0; b < 4; ++b) {
    const int x0 = static_cast<int>(rng.index(52)), y0 = static_cast<int>(rng.index(52));
    const int w = 4 + static_cast<int>(rng.index(8)), h = 4 + static_cast<int>(rng.index(8));
    const double z = rng.uniform(0.05, 0.35);
    for (int iy = y0; iy < std::min(64, y0 + h); ++iy)
      for (int ix = x0; ix < std::min(64, x0 + w); ++ix) hm.at(ix, iy) = std::max(hm.at(ix, iy), z);
  }
  return CollisionWorld(std::move(hm), {});
}

// Brute-force sphere test: the inflated sphere's lower cap is sampled on an XY
// grid ten times finer than the raster.
bool oracle_free(const CollisionWorld& w, const JointConfig& q) {
  const Heightmap& hm = w.heightmap;
  const double step = hm.resolution / 10.0;
  for (const Sphere& s : link_spheres_at(robot().chain, robot().gripper, q)) {
    if (s.center.z() < s.radius) return false;
    const double r = s.radius + w.clearance;
    if (s.center.z() - r >= w.heightmap_max()) continue;
    const int n = static_cast<int>(std::ceil(r / step));
    for (int i = -n; i <= n; ++i)
      for (int j = -n; j <= n; ++j) {
        const double dx = i * step, dy = j * step, d2 = dx * dx + dy * dy;
        if (d2 > r * r) continue;
        const double x = s.center.x() + dx, y = s.center.y() + dy;
        if (s.center.z() - std::sqrt(r * r - d2) < hm.height_at(x, y)) return false;
      }
  }
  return true;
}

bool densified_free(const CollisionWorld& w, const Trajectory& t) {
  for (std::size_t i = 0; i + 1 < t.configs.size(); ++i)
    if (!segment_collision_free(w, robot(), t.configs[i], t.configs[i + 1], 0.02)) return false;
  return !t.configs.empty() && config_collision_free(w, robot(), t.configs.front());
}

JointConfig random_free_config(const CollisionWorld& w, Rng& rng) {
  for (;;) {
    const JointConfig q = robot().chain.random_config(rng);
    if (config_collision_free(w, robot(), q)) return q;
  }
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("empty world admits the home config") {
  CHECK(config_collision_free(empty_world(), robot(), robot().chain.home()));
}

TEST_CASE("a 2 m column at the base blocks the zero config") {
  CollisionWorld w = empty_world();
  w.heightmap = Heightmap::empty(Vec2(0, 0), 0.4, 40);
  for (int iy = 17; iy < 23; ++iy)
    for (int ix = 17; ix < 23; ++ix) w.heightmap.at(ix, iy) = 2.0;
  w.refresh();
  const JointConfig zero = robot().chain.clamp(JointConfig::Zero(robot().chain.dof()));
  CHECK_FALSE(config_collision_free(w, robot(), zero));
}

TEST_CASE("collision query agrees with a dense sampling oracle") {
  Rng rng(2024);
  int agree = 0, total = 0, hits = 0;
  for (int scene = 0; scene < 10; ++scene) {
    const CollisionWorld w = cluttered_world(mix_seed(99, scene));
    for (int i = 0; i < 100; ++i) {
      const JointConfig q = robot().chain.random_config(rng);
      const bool fast = config_collision_free(w, robot(), q);
      agree += fast == oracle_free(w, q);
      hits += !fast;
      ++total;
    }
  }
  CHECK(total == 1000);
  CHECK(agree >= 990);
  CHECK(hits > 50);  // the sweep must exercise collisions
}

TEST_CASE("a slab enclosing the arm blocks it") {
  CollisionWorld w = empty_world();
  w.slabs.push_back({Vec3(-2, -2, 0), Vec3(2, 2, 3)});
  CHECK_FALSE(config_collision_free(w, robot(), robot().chain.home()));
}

TEST_CASE("start equal to goal gives a single config") {
  const CollisionWorld w = empty_world();
  PlanRequest req{robot().chain.home(), robot().chain.home(), 10.0, 1};
  const Trajectory t = rrt_connect(w, robot(), req);
  CHECK(t.configs.size() == 1);
  CHECK(t.length() == 0.0);
}

TEST_CASE("free straight segment is kept nearly straight") {
  const CollisionWorld w = empty_world();
  Rng rng(5);
  int tested = 0;
  for (int i = 0; i < 40 && tested < 20; ++i) {
    const JointConfig a = random_free_config(w, rng), b = random_free_config(w, rng);
    if (!segment_collision_free(w, robot(), a, b)) continue;
    ++tested;
    const Trajectory t = rrt_connect(w, robot(), {a, b, 10.0, static_cast<std::uint64_t>(i)});
    CHECK(t.length() <= 1.05 * joint_distance(a, b));
    CHECK(joint_distance(t.configs.front(), a) == 0.0);
    CHECK(joint_distance(t.configs.back(), b) == 0.0);
  }
  CHECK(tested >= 10);
}

TEST_CASE("goal or start in collision is rejected") {
  const CollisionWorld w = empty_world();
  Rng rng(8);
  JointConfig bad;
  do bad = robot().chain.random_config(rng);
  while (config_collision_free(w, robot(), bad));
  const JointConfig home = robot().chain.home();
  try {
    rrt_connect(w, robot(), {home, bad, 10.0, 0});
    FAIL("expected InvalidGoal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidGoal);
  }
  try {
    rrt_connect(w, robot(), {bad, home, 10.0, 0});
    FAIL("expected InvalidStart");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidStart);
  }
}

TEST_CASE("unreachable TCP pose goal is InvalidGoal") {
  const CollisionWorld w = empty_world();
  const Pose far{Vec3(3.0, 0, 0.5), UnitQuat::identity()};
  try {
    rrt_connect(w, robot(), {robot().chain.home(), far, 10.0, 0});
    FAIL("expected InvalidGoal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidGoal);
  }
}

TEST_CASE("plans in clutter are valid, deterministic and end on the TCP goal") {
  int planned = 0;
  for (int s = 0; s < 6; ++s) {
    const CollisionWorld w = cluttered_world(mix_seed(7, s));
    Rng rng(mix_seed(8, s));
    const JointConfig start = robot().chain.home();
    if (!config_collision_free(w, robot(), start)) continue;
    const JointConfig goal_q = random_free_config(w, rng);
    const Pose goal = forward_kinematics(robot().chain, goal_q, robot().gripper.tcp_offset).tcp;
    PlanRequest req{start, goal, 10.0, static_cast<std::uint64_t>(s)};
    Trajectory a, b;
    try {
      a = rrt_connect(w, robot(), req);
      b = rrt_connect(w, robot(), req);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Timeout);
      continue;
    }
    ++planned;
    REQUIRE(a.configs.size() == b.configs.size());
    for (std::size_t i = 0; i < a.configs.size(); ++i) CHECK(joint_distance(a.configs[i], b.configs[i]) == 0.0);
    CHECK(densified_free(w, a));
    for (std::size_t i = 0; i + 1 < a.configs.size(); ++i)
      CHECK((a.configs[i + 1] - a.configs[i]).cwiseAbs().maxCoeff() <= 0.1 + 1e-12);
    const auto [ep, er] = pose_error(forward_kinematics(robot().chain, a.configs.back(), robot().gripper.tcp_offset).tcp, goal);
    CHECK(ep <= IkOptions{}.tol_pos);
    CHECK(er <= IkOptions{}.tol_rot);
    CHECK(a.length() <= a.raw_length + 1e-9);
  }
  CHECK(planned >= 3);
}

TEST_CASE("smoothing a straight path keeps its length") {
  const CollisionWorld w = empty_world();
  const JointConfig a = robot().chain.home();
  JointConfig b = a;
  b[0] += 0.8;
  Trajectory t;
  t.configs = densify({a, b}, 0.1);
  const Trajectory s = shortcut_smooth(w, robot(), t, 100, 3);
  CHECK(s.length() == doctest::Approx(t.length()).epsilon(1e-12));
}

TEST_CASE("smoothing a zig-zag shortens it and keeps the endpoints") {
  const CollisionWorld w = empty_world();
  const JointConfig a = robot().chain.home();
  Trajectory t;
  t.configs.push_back(a);
  for (int k = 1; k <= 6; ++k) {
    JointConfig q = a;
    q[0] += 0.15 * k;
    q[1] += (k % 2 ? 0.2 : -0.2);
    t.configs.push_back(q);
  }
  const Trajectory s = shortcut_smooth(w, robot(), t, 100, 4);
  CHECK(s.length() < t.length());
  CHECK(joint_distance(s.configs.front(), t.configs.front()) == 0.0);
  CHECK(joint_distance(s.configs.back(), t.configs.back()) == 0.0);
}

TEST_CASE("repeated smoothing never lengthens a path") {
  const CollisionWorld w = cluttered_world(31);
  Rng rng(32);
  JointConfig start = robot().chain.home();
  REQUIRE(config_collision_free(w, robot(), start));
  // A valid random walk.
  Trajectory t;
  t.configs.push_back(start);
  while (t.configs.size() < 12) {
    JointConfig q = t.configs.back();
    for (int j = 0; j < q.size(); ++j) q[j] += rng.uniform(-0.3, 0.3);
    q = robot().chain.clamp(q);
    if (segment_collision_free(w, robot(), t.configs.back(), q)) t.configs.push_back(q);
  }
  double prev = t.length();
  for (int i = 0; i < 100; ++i) {
    t = shortcut_smooth(w, robot(), t, 5, static_cast<std::uint64_t>(i));
    CHECK(t.length() <= prev + 1e-12);
    prev = t.length();
  }
  CHECK(densified_free(w, t));
  CHECK(joint_distance(t.configs.front(), start) == 0.0);
}

TEST_CASE("densify bounds the per-joint step") {
  JointConfig a = JointConfig::Zero(7), b = JointConfig::Zero(7);
  b[2] = 0.95;
  b[5] = -0.3;
  const auto d = densify({a, b}, 0.1);
  CHECK(d.size() == 11);
  for (std::size_t i = 0; i + 1 < d.size(); ++i) CHECK((d[i + 1] - d[i]).cwiseAbs().maxCoeff() <= 0.1 + 1e-12);
  CHECK(path_length(d) == doctest::Approx(joint_distance(a, b)).epsilon(1e-12));
}

TEST_CASE("kinematic execution timing") {
  Trajectory empty;
  empty.configs.push_back(robot().chain.home());
  CHECK(execute_kinematic(empty, robot()).time_s == 0.0);

  Trajectory one;
  JointConfig b = robot().chain.home();
  b[3] += 1.2;
  b[1] -= 0.5;
  one.configs = {robot().chain.home(), b};
  CHECK(execute_kinematic(one, robot()).time_s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("execution time correlates with length") {
  Rng rng(77);
  std::vector<double> len, time;
  for (int i = 0; i < 200; ++i) {
    Trajectory t;
    t.configs.push_back(robot().chain.random_config(rng));
    const int n = 2 + static_cast<int>(rng.index(10));
    for (int k = 0; k < n; ++k) t.configs.push_back(robot().chain.random_config(rng));
    t.configs = densify(t.configs, 0.1);
    len.push_back(t.length());
    time.push_back(execute_kinematic(t, robot()).time_s);
  }
  CHECK(pearson(len, time) > 0.9);
}

TEST_CASE("a held object follows the TCP rigidly") {
  Trajectory t;
  JointConfig b = robot().chain.home();
  b[0] += 0.7;
  b[5] -= 0.4;
  t.configs = {robot().chain.home(), b};
  const Pose grasp{Vec3(0.01, -0.02, 0.05), UnitQuat::from_axis_angle(Vec3(1, 2, 0).normalized(), 0.3)};
  const Execution e = execute_kinematic(t, robot(), &grasp);
  REQUIRE(e.object_pose.has_value());
  const Pose tcp = forward_kinematics(robot().chain, b, robot().gripper.tcp_offset).tcp;
  const Pose back = *e.object_pose * grasp;
  CHECK((back.position - tcp.position).norm() < 1e-12);
  CHECK(angular_distance(back.orientation, tcp.orientation) < 1e-9);
}

TEST_CASE("object already at its goal gives a short plan") {
  const MeshCatalog& cat = MeshCatalog::standard();
  SceneState scene;
  scene.target.mesh = cat.index_of("cracker_box");
  const TriMesh& mesh = scene.target_entry().mesh;
  const UnitQuat flat = UnitQuat::from_axis_angle(Vec3::UnitX(), M_PI / 2);
  scene.target.pose = {Vec3(0.5, 0.25, mesh_bottom_offset(mesh, flat)), flat};
  scene.heightmap = Heightmap::empty(Vec2(0.5, 0.15));
  TaskSpec task;
  task.target_mesh = scene.target.mesh;
  task.goal = scene.target.pose;
  task.container.kind = ContainerKind::Box;
  const Robot r;
  const auto grasps = sample_grasps_goal(task, mesh, r.gripper, 30, 1);
  WorkCounter work;
  const PickPlacePlan plan = plan_pick_and_place({&scene, scene.target.pose, &task, r.chain.home()}, grasps, r, {}, 1,
                                                 work, Budget::begin(work, 10.0));
  const double d = (plan.placed_object.position - task.goal.position).norm();
  CHECK(d < 0.005);
  CHECK(angular_distance(plan.placed_object.orientation, task.goal.orientation) < 0.02);
  CHECK(plan.length() - plan.approach.length() < 3.0);
}

TEST_CASE("a grasp on the face resting on the ground fails direct placement") {
  const MeshCatalog& cat = MeshCatalog::standard();
  SceneState scene;
  scene.target.mesh = cat.index_of("cracker_box");
  const TriMesh& mesh = scene.target_entry().mesh;
  const UnitQuat flat = UnitQuat::from_axis_angle(Vec3::UnitX(), M_PI / 2);
  scene.target.pose = {Vec3(0.5, 0.25, mesh_bottom_offset(mesh, flat)), flat};
  scene.heightmap = Heightmap::empty(Vec2(0.5, 0.15));
  TaskSpec task;
  task.target_mesh = scene.target.mesh;
  task.goal = scene.target.pose;
  task.container.kind = ContainerKind::Box;
  const Robot r;
  // Bottom centre of the resting box, normal pointing into the ground.
  const Vec3 bottom(0.5, 0.25, 0.0);
  const std::vector<GraspCandidate> grasps{grasp_from_surface(bottom, Vec3(0, 0, -1), scene.target.pose, r.gripper)};
  WorkCounter work;
  try {
    plan_pick_and_place({&scene, scene.target.pose, &task, r.chain.home()}, grasps, r, {}, 1, work,
                        Budget::begin(work, 10.0));
    FAIL("expected AllCandidatesFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AllCandidatesFailed);
  }
}

TEST_CASE("trajectory JSON carries configs, lengths and timing") {
  Trajectory t;
  JointConfig b = robot().chain.home();
  b[0] += 0.3;
  t.configs = {robot().chain.home(), b};
  t.raw_length = 0.4;
  t.planning_time_s = 0.25;
  const std::string js = trajectory_to_json(t);
  CHECK(js.find("\"configs\"") != std::string::npos);
  CHECK(js.find("\"length_rad\"") != std::string::npos);
  CHECK(js.find("\"raw_length_rad\"") != std::string::npos);
  CHECK(js.find("\"planning_time_s\"") != std::string::npos);
}

TEST_CASE("work clock budgets") {
  WorkCounter w;
  const Budget b = Budget::begin(w, 1.0);
  CHECK_FALSE(b.expired());
  w.collision_checks += static_cast<std::uint64_t>(2.0 / WorkClock::kCollisionCheckS);
  CHECK(b.expired());
  CHECK(b.elapsed() == doctest::Approx(2.0).epsilon(1e-6));
}
