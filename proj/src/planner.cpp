#include "reorient/planner.hpp"

#include "reorient/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reorient {

CollisionWorld::CollisionWorld(Heightmap hm, std::vector<Slab> s, double c)
    : heightmap(std::move(hm)), slabs(std::move(s)), clearance(c) {
  refresh();
}

void CollisionWorld::refresh() { hm_max_ = heightmap.max_height(); }

bool sphere_hits_heightmap(const Heightmap& hm, double hm_max, const Vec3& c, double r) {
  if (c.z() - r >= hm_max) return false;
  const double res = hm.resolution;
  const int x0 = std::max(0, static_cast<int>(std::floor((c.x() - r - hm.origin.x()) / res)));
  const int y0 = std::max(0, static_cast<int>(std::floor((c.y() - r - hm.origin.y()) / res)));
  const int x1 = std::min(hm.width - 1, static_cast<int>(std::floor((c.x() + r - hm.origin.x()) / res)));
  const int y1 = std::min(hm.height - 1, static_cast<int>(std::floor((c.y() + r - hm.origin.y()) / res)));
  const double r2 = r * r;
  for (int iy = y0; iy <= y1; ++iy) {
    const double ly = hm.origin.y() + iy * res;
    const double dy = std::max({ly - c.y(), 0.0, c.y() - (ly + res)});
    for (int ix = x0; ix <= x1; ++ix) {
      const double h = hm.at(ix, iy);
      if (h <= 0.0 || h <= c.z() - r) continue;
      const double lx = hm.origin.x() + ix * res;
      const double dx = std::max({lx - c.x(), 0.0, c.x() - (lx + res)});
      const double dz = std::max(0.0, c.z() - h);
      if (dx * dx + dy * dy + dz * dz < r2) return true;
    }
  }
  return false;
}

namespace {

bool point_inside_slab(const Vec3& p, const Slab& s, double depth) {
  return (p.array() > s.min.array() + depth).all() && (p.array() < s.max.array() - depth).all();
}

bool spheres_free(const CollisionWorld& world, const std::vector<Sphere>& spheres, std::size_t n_body) {
  const Heightmap& hm = world.heightmap;
  const double hm_max = world.heightmap_max();
  for (std::size_t i = 0; i < n_body; ++i) {
    const Sphere& s = spheres[i];
    if (s.center.z() < s.radius) return false;
    const double r = s.radius + world.clearance;
    if (sphere_hits_heightmap(hm, hm_max, s.center, r)) return false;
    for (const Slab& slab : world.slabs)
      if (sphere_hits_slab(s.center, r, slab)) return false;
  }
  if (spheres.size() > n_body) {
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    for (std::size_t i = n_body; i < spheres.size(); ++i) {
      lo = lo.cwiseMin(spheres[i].center);
      hi = hi.cwiseMax(spheres[i].center);
    }
    if (lo.z() < -kGroundTolerance) return false;
    // Only slabs overlapping the attached points' bounding box can contain one.
    const Slab* near[16];
    std::size_t n_near = 0;
    bool overflow = false;
    for (const Slab& slab : world.slabs) {
      if ((hi.array() <= slab.min.array() + kSlabPointTolerance).any() ||
          (lo.array() >= slab.max.array() - kSlabPointTolerance).any())
        continue;
      if (n_near < 16) near[n_near++] = &slab;
      else overflow = true;
    }
    const bool check_hm = lo.z() < hm_max;
    if (check_hm || n_near > 0) {
      for (std::size_t i = n_body; i < spheres.size(); ++i) {
        const Vec3& p = spheres[i].center;
        if (check_hm && p.z() < hm_max) {
          const double h = hm.height_at(p.x(), p.y());
          if (h > 0.0 && p.z() < h) return false;
        }
        for (std::size_t k = 0; k < n_near; ++k)
          if (point_inside_slab(p, *near[k], kSlabPointTolerance)) return false;
        if (overflow)
          for (const Slab& slab : world.slabs)
            if (point_inside_slab(p, slab, kSlabPointTolerance)) return false;
      }
    }
  }
  if (world.touch_mesh) {
    const TriMesh& m = *world.touch_mesh;
    const Pose inv = pose_inverse(world.touch_pose);
    const double br = m.bounding_radius();
    for (std::size_t i = 0; i < n_body; ++i) {
      const Sphere& s = spheres[i];
      const Vec3 local = transform_point(inv, s.center);
      if (local.norm() > br + s.radius) continue;
      if (m.contains(local) || m.surface_distance(local) < s.radius) return false;
    }
  }
  return true;
}

double linf(const JointConfig& a, const JointConfig& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Bisection order over the interior samples 1..n-1 so blocked segments fail early.
std::vector<int> bisection_order(int n) {
  std::vector<int> out;
  if (n < 2) return out;
  out.reserve(n - 1);
  std::vector<std::pair<int, int>> queue{{0, n}};
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto [lo, hi] = queue[head];
    if (hi - lo < 2) continue;
    const int mid = (lo + hi) / 2;
    out.push_back(mid);
    queue.push_back({lo, mid});
    queue.push_back({mid, hi});
  }
  return out;
}

bool segment_free(const CollisionWorld& world, const Robot& robot, const JointConfig& a, const JointConfig& b,
                  double step, WorkCounter* work, bool check_a, bool check_b) {
  if (check_b && !config_collision_free(world, robot, b, work)) return false;
  if (check_a && !config_collision_free(world, robot, a, work)) return false;
  const int n = std::max(1, static_cast<int>(std::ceil(linf(a, b) / step - 1e-12)));
  for (int i : bisection_order(n)) {
    const double t = static_cast<double>(i) / n;
    if (!config_collision_free(world, robot, a + t * (b - a), work)) return false;
  }
  return true;
}

JointConfig step_toward(const JointConfig& from, const JointConfig& to, double step) {
  const double d = linf(from, to);
  if (d <= step) return to;
  return from + (step / d) * (to - from);
}

struct Tree {
  std::vector<JointConfig> nodes;
  std::vector<int> parent;

  int add(const JointConfig& q, int p) {
    nodes.push_back(q);
    parent.push_back(p);
    return static_cast<int>(nodes.size()) - 1;
  }

  int nearest(const JointConfig& q) const {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d = (nodes[i] - q).squaredNorm();
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  std::vector<JointConfig> path_to_root(int i) const {
    std::vector<JointConfig> out;
    for (; i >= 0; i = parent[i]) out.push_back(nodes[i]);
    return out;
  }
};

enum class Extend { Trapped, Advanced, Reached };

struct Rrt {
  const CollisionWorld& world;
  const Robot& robot;
  const PlanOptions& opts;
  WorkCounter* work;

  Extend extend(Tree& t, const JointConfig& target, int& out) const {
    const int near = t.nearest(target);
    const JointConfig q = step_toward(t.nodes[near], target, opts.extend_step);
    if (!segment_free(world, robot, t.nodes[near], q, opts.validate_step, work, false, true)) return Extend::Trapped;
    out = t.add(q, near);
    return (q - target).cwiseAbs().maxCoeff() < 1e-12 ? Extend::Reached : Extend::Advanced;
  }

  Extend connect(Tree& t, const JointConfig& target, int& out, const Budget& budget) const {
    Extend e;
    do {
      e = extend(t, target, out);
    } while (e == Extend::Advanced && !budget.expired());
    return e;
  }
};

std::vector<JointConfig> goal_configs(const CollisionWorld& world, const Robot& robot, const PlanRequest& req,
                                      const PlanOptions& opts, WorkCounter* work) {
  if (const auto* q = std::get_if<JointConfig>(&req.goal)) {
    if (q->size() != robot.chain.dof()) throw Error(ErrorCode::DofMismatch, "goal config");
    if (!robot.chain.in_limits(*q, 1e-9) || !config_collision_free(world, robot, *q, work))
      throw Error(ErrorCode::InvalidGoal, "goal config in collision or out of limits");
    return {*q};
  }
  const Pose& target = std::get<Pose>(req.goal);
  std::vector<JointConfig> out;
  Rng rng(mix_seed(req.seed, 0x6f61));
  for (int k = 0; k < opts.goal_ik_solutions; ++k) {
    IkOptions ik = opts.ik;
    ik.seed = mix_seed(req.seed, static_cast<std::uint64_t>(k));
    if (k > 0) ik.restarts = std::min(ik.restarts, 3);
    const JointConfig seed = k == 0 ? req.start : robot.chain.random_config(rng);
    auto q = collision_free_ik(world, robot, target, seed, ik, work);
    if (!q) {
      if (k == 0) break;
      continue;
    }
    const bool dup = std::any_of(out.begin(), out.end(), [&](const JointConfig& o) { return linf(o, *q) < 1e-3; });
    if (!dup) out.push_back(*q);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidGoal, "no collision-free IK solution for the goal pose");
  return out;
}

}  // namespace

bool config_collision_free(const CollisionWorld& world, const Robot& robot, const JointConfig& q, WorkCounter* work) {
  if (work) ++work->collision_checks;
  const auto spheres = link_spheres_at(robot.chain, robot.gripper, q, world.attached ? &*world.attached : nullptr);
  const std::size_t n_attached = world.attached ? world.attached->points_tcp.size() : 0;
  return spheres_free(world, spheres, spheres.size() - n_attached);
}

bool segment_collision_free(const CollisionWorld& world, const Robot& robot, const JointConfig& a,
                            const JointConfig& b, double step, WorkCounter* work) {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidInput, "validation step must be > 0");
  return segment_free(world, robot, a, b, step, work, true, true);
}

double path_length(const std::vector<JointConfig>& configs) {
  double s = 0.0;
  for (std::size_t i = 1; i < configs.size(); ++i) s += joint_distance(configs[i - 1], configs[i]);
  return s;
}

double Trajectory::length() const { return path_length(configs); }

std::vector<JointConfig> densify(const std::vector<JointConfig>& configs, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidInput, "densify step must be > 0");
  std::vector<JointConfig> out;
  if (configs.empty()) return out;
  out.push_back(configs.front());
  for (std::size_t i = 1; i < configs.size(); ++i) {
    const JointConfig& a = configs[i - 1];
    const JointConfig& b = configs[i];
    const int n = std::max(1, static_cast<int>(std::ceil(linf(a, b) / step - 1e-12)));
    for (int k = 1; k < n; ++k) out.push_back(a + (static_cast<double>(k) / n) * (b - a));
    out.push_back(b);
  }
  return out;
}

Trajectory shortcut_smooth(const CollisionWorld& world, const Robot& robot, const Trajectory& traj, int iterations,
                           std::uint64_t seed, double validate_step, WorkCounter* work) {
  Trajectory out = traj;
  auto& path = out.configs;
  if (path.size() < 3) return out;
  Rng rng(seed);
  for (int it = 0; it < iterations && path.size() >= 3; ++it) {
    std::vector<double> cum(path.size(), 0.0);
    for (std::size_t i = 1; i < path.size(); ++i) cum[i] = cum[i - 1] + joint_distance(path[i - 1], path[i]);
    const double total = cum.back();
    if (total <= 0.0) break;
    double t1 = rng.uniform(0.0, total), t2 = rng.uniform(0.0, total);
    if (t1 > t2) std::swap(t1, t2);
    auto locate = [&](double t) {
      const auto it2 = std::upper_bound(cum.begin(), cum.end(), t);
      std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it2 - cum.begin()));
      i = std::min(i, path.size() - 1);
      const double seg = cum[i] - cum[i - 1];
      const double u = seg > 0.0 ? (t - cum[i - 1]) / seg : 0.0;
      return std::pair<std::size_t, JointConfig>(i, path[i - 1] + u * (path[i] - path[i - 1]));
    };
    const auto [i1, q1] = locate(t1);
    const auto [i2, q2] = locate(t2);
    if (i1 == i2) continue;  // same segment: already straight
    const double old_len = (t2 - t1);
    if (joint_distance(q1, q2) >= old_len - 1e-12) continue;
    if (!segment_free(world, robot, q1, q2, validate_step, work, false, false)) continue;
    std::vector<JointConfig> next(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(i1));
    next.push_back(q1);
    next.push_back(q2);
    next.insert(next.end(), path.begin() + static_cast<std::ptrdiff_t>(i2), path.end());
    // Drop zero-length pieces created when a shortcut lands on a vertex.
    std::vector<JointConfig> clean{next.front()};
    for (std::size_t k = 1; k < next.size(); ++k)
      if (linf(clean.back(), next[k]) > 1e-12 || k + 1 == next.size()) clean.push_back(next[k]);
    if (clean.size() >= 2 && linf(clean[clean.size() - 2], clean.back()) <= 1e-12) clean.erase(clean.end() - 2);
    path = std::move(clean);
  }
  return out;
}

Trajectory rrt_connect(const CollisionWorld& world, const Robot& robot, const PlanRequest& req,
                       const PlanOptions& opts, WorkCounter* work, const Budget* budget) {
  if (!(req.budget_s > 0.0)) throw Error(ErrorCode::InvalidInput, "planning budget must be > 0");
  if (req.start.size() != robot.chain.dof()) throw Error(ErrorCode::DofMismatch, "start config");
  WorkCounter local;
  if (!work) work = &local;
  const Budget own = Budget::begin(*work, req.budget_s);
  const Budget& b = budget ? *budget : own;
  const double t0 = WorkClock::seconds(*work);

  if (!robot.chain.in_limits(req.start, 1e-9) || !config_collision_free(world, robot, req.start, work))
    throw Error(ErrorCode::InvalidStart, "start config in collision or out of limits");
  const std::vector<JointConfig> goals = goal_configs(world, robot, req, opts, work);

  std::vector<JointConfig> raw;
  for (const JointConfig& g : goals) {
    if (segment_free(world, robot, req.start, g, opts.validate_step, work, false, false)) {
      raw = {req.start, g};
      break;
    }
  }

  if (raw.empty()) {
    Rng rng(req.seed);
    Tree a, c;
    a.add(req.start, -1);
    for (const JointConfig& g : goals) c.add(g, -1);
    Tree* from = &a;
    Tree* to = &c;
    const Rrt rrt{world, robot, opts, work};
    while (raw.empty()) {
      if (b.expired()) throw Error(ErrorCode::Timeout, "RRT-Connect exceeded its planning budget");
      const JointConfig q = robot.chain.random_config(rng);
      int added = -1;
      if (rrt.extend(*from, q, added) != Extend::Trapped) {
        int reached = -1;
        if (rrt.connect(*to, from->nodes[added], reached, b) == Extend::Reached) {
          auto p1 = from->path_to_root(added);
          auto p2 = to->path_to_root(reached);
          std::reverse(p1.begin(), p1.end());
          p1.insert(p1.end(), p2.begin() + 1, p2.end());
          if (from != &a) std::reverse(p1.begin(), p1.end());
          raw = std::move(p1);
        }
      }
      std::swap(from, to);
    }
  }

  Trajectory t;
  t.configs = raw;
  if (raw.size() == 2 && linf(raw[0], raw[1]) <= 1e-12) t.configs = {raw[0]};
  t.raw_length = t.length();
  t = shortcut_smooth(world, robot, t, opts.smoothing_attempts, mix_seed(req.seed, 0x5c), opts.validate_step, work);
  t.configs = densify(t.configs, opts.output_step);
  t.planning_time_s = WorkClock::seconds(*work) - t0;
  return t;
}

Execution execute_kinematic(const Trajectory& traj, const Robot& robot, const Pose* grasp) {
  Execution e;
  for (std::size_t i = 1; i < traj.configs.size(); ++i) e.time_s += linf(traj.configs[i - 1], traj.configs[i]) / kJointSpeed;
  if (traj.configs.empty()) return e;
  e.end = traj.configs.back();
  if (grasp) {
    const Pose tcp = forward_kinematics(robot.chain, e.end, robot.gripper.tcp_offset).tcp;
    e.object_pose = tcp * pose_inverse(*grasp);
  }
  return e;
}

std::optional<JointConfig> collision_free_ik(const CollisionWorld& world, const Robot& robot, const Pose& tcp,
                                             const JointConfig& seed, const IkOptions& ik, WorkCounter* work) {
  return try_ik(
      robot.chain, tcp, seed, ik, robot.gripper.tcp_offset,
      [&](const JointConfig& q) { return config_collision_free(world, robot, q, work); }, work);
}

namespace {

UnitQuat slerp(const UnitQuat& a, const UnitQuat& b, double t) {
  const UnitQuat rel = a.inverse() * b;
  const double ang = rel.angle();
  if (ang < 1e-12) return b;
  const Vec3 axis = Vec3(rel.x(), rel.y(), rel.z()) / std::sin(0.5 * ang);
  return a * UnitQuat::from_axis_angle(axis, t * ang);
}

}  // namespace

std::optional<std::vector<JointConfig>> cartesian_path(const CollisionWorld& world, const Robot& robot,
                                                       const JointConfig& start, const Pose& target, double spacing,
                                                       const IkOptions& ik, WorkCounter* work) {
  if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidInput, "cartesian spacing must be > 0");
  const Pose from = forward_kinematics(robot.chain, start, robot.gripper.tcp_offset).tcp;
  const double dist = (target.position - from.position).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(dist / spacing - 1e-12)));
  IkOptions local = ik;
  local.restarts = 1;
  std::vector<JointConfig> out{start};
  for (int i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const Pose p{from.position + t * (target.position - from.position), slerp(from.orientation, target.orientation, t)};
    auto q = try_ik(robot.chain, p, out.back(), local, robot.gripper.tcp_offset, {}, work);
    if (!q) return std::nullopt;
    if (linf(out.back(), *q) > 0.5) return std::nullopt;
    if (!segment_free(world, robot, out.back(), *q, 0.02, work, false, true)) return std::nullopt;
    out.push_back(*q);
  }
  return out;
}

CollisionWorld pick_world(const SceneState& scene, const Pose& object_pose, const std::vector<Slab>& slabs) {
  CollisionWorld w(scene.heightmap, slabs);
  w.touch_mesh = &scene.target_entry().mesh;
  w.touch_pose = object_pose;
  return w;
}

CollisionWorld carry_world(const SceneState& scene, const std::vector<Slab>& slabs, const Pose& grasp_relative) {
  CollisionWorld w(scene.heightmap, slabs);
  const Pose inv = pose_inverse(grasp_relative);
  AttachedObject a;
  for (const Vec3& p : scene.target_entry().proxy_points) a.points_tcp.push_back(transform_point(inv, p));
  w.attached = std::move(a);
  return w;
}

namespace {

Trajectory as_trajectory(std::vector<JointConfig> configs, double output_step) {
  Trajectory t;
  t.configs = densify(configs, output_step);
  t.raw_length = t.length();
  return t;
}

}  // namespace

PickPlacePlan plan_pick_and_place(const PickPlaceInput& in, const std::vector<GraspCandidate>& grasps,
                                  const Robot& robot, const PlanOptions& opts, std::uint64_t seed, WorkCounter& work,
                                  const Budget& budget) {
  if (!in.scene || !in.task) throw Error(ErrorCode::InvalidInput, "plan_pick_and_place needs a scene and a task");
  if (grasps.empty()) throw Error(ErrorCode::InvalidInput, "plan_pick_and_place needs at least one grasp");
  const double t0 = WorkClock::seconds(work);
  const std::vector<Slab>& slabs = in.task->container.slabs;
  const CollisionWorld pick = pick_world(*in.scene, in.object_pose, slabs);
  const Vec3 out_dir = in.task->container.opening();

  for (std::size_t i = 0; i < grasps.size(); ++i) {
    if (budget.expired()) throw Error(ErrorCode::Timeout, "pick-and-place planning budget exhausted");
    const GraspCandidate g0 = reanchor(grasps[i], in.object_pose);
    if (g0.normal.z() < -0.2) continue;
    const GraspCandidate g1 = reanchor(grasps[i], in.task->goal);
    IkOptions ik = opts.ik;
    ik.seed = mix_seed(seed, i);

    const auto q_grasp = collision_free_ik(pick, robot, g0.tcp, robot.chain.home(), ik, &work);
    if (!q_grasp) continue;
    const CollisionWorld carry = carry_world(*in.scene, slabs, grasps[i].relative);
    if (!config_collision_free(carry, robot, *q_grasp, &work)) continue;
    const auto q_goal = collision_free_ik(carry, robot, g1.tcp, robot.chain.home(), ik, &work);
    if (!q_goal) continue;

    Pose pre = g1.tcp;
    pre.position += kPrePlaceOffset * out_dir;
    auto retreat = cartesian_path(carry, robot, *q_goal, pre, 0.01, ik, &work);
    if (!retreat) continue;
    std::reverse(retreat->begin(), retreat->end());

    std::optional<std::vector<JointConfig>> lift;
    for (double h : {0.1, 0.2, 0.3}) {
      Pose up = g0.tcp;
      up.position.z() += h;
      lift = cartesian_path(carry, robot, *q_grasp, up, 0.01, ik, &work);
      if (lift) break;
    }
    if (!lift) continue;

    PickPlacePlan plan;
    try {
      PlanRequest a{in.start, *q_grasp, budget.limit_s, mix_seed(seed, 1000 + i)};
      plan.approach = rrt_connect(pick, robot, a, opts, &work, &budget);
      PlanRequest t{lift->back(), retreat->front(), budget.limit_s, mix_seed(seed, 2000 + i)};
      plan.transfer = rrt_connect(carry, robot, t, opts, &work, &budget);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Timeout) throw;
      continue;
    }
    plan.grasp_index = i;
    plan.lift = as_trajectory(*lift, opts.output_step);
    plan.insert = as_trajectory(*retreat, opts.output_step);
    const Pose tcp = forward_kinematics(robot.chain, *q_goal, robot.gripper.tcp_offset).tcp;
    plan.placed_object = tcp * pose_inverse(grasps[i].relative);
    plan.planning_time_s = WorkClock::seconds(work) - t0;
    return plan;
  }
  throw Error(ErrorCode::AllCandidatesFailed, "no grasp candidate admits a full pick-and-place plan");
}

std::string trajectory_to_json(const Trajectory& t) {
  nlohmann::json j;
  j["configs"] = nlohmann::json::array();
  for (const JointConfig& q : t.configs) j["configs"].push_back(std::vector<double>(q.data(), q.data() + q.size()));
  j["length_rad"] = t.length();
  j["raw_length_rad"] = t.raw_length;
  j["planning_time_s"] = t.planning_time_s;
  return j.dump();
}

}  // namespace reorient
