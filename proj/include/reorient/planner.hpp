#pragma once

#include "reorient/grasp.hpp"
#include "reorient/kinematics.hpp"
#include "reorient/scene.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace reorient {

/// Arm plus mounted gripper.
struct Robot {
  KinematicChain chain = KinematicChain::default_arm();
  GripperModel gripper = GripperModel::builtin(GripperShape::I);
};

/// Sphere-vs-raster collision world. Arm and gripper spheres keep `clearance`
/// from heightmap columns and slabs and may not dip below the ground. Attached
/// object points may touch: they collide only below an occupied cell's height,
/// below z = -1 mm, or deeper than 1 mm inside a slab.
struct CollisionWorld {
  Heightmap heightmap;
  std::vector<Slab> slabs;
  double clearance = kDefaultClearance;
  std::optional<AttachedObject> attached;
  /// Mesh the empty gripper must not intersect (the target it is about to grasp).
  const TriMesh* touch_mesh = nullptr;
  Pose touch_pose;

  CollisionWorld() = default;
  CollisionWorld(Heightmap hm, std::vector<Slab> slabs, double clearance = kDefaultClearance);

  double heightmap_max() const { return hm_max_; }
  /// Call after editing `heightmap`.
  void refresh();

 private:
  double hm_max_ = 0.0;
};

inline constexpr double kSlabPointTolerance = 0.001;

bool sphere_hits_heightmap(const Heightmap& hm, double hm_max, const Vec3& c, double r);

/// Counts one collision check when `work` is given.
bool config_collision_free(const CollisionWorld& world, const Robot& robot, const JointConfig& q,
                           WorkCounter* work = nullptr);

/// Every config on the straight segment at L-infinity spacing <= `step` (both
/// endpoints included) is collision-free.
bool segment_collision_free(const CollisionWorld& world, const Robot& robot, const JointConfig& a,
                            const JointConfig& b, double step = 0.02, WorkCounter* work = nullptr);

/// Converts work counts into a deterministic planning clock. The per-unit
/// costs were measured once on a reference machine and are frozen so budgets
/// and reports reproduce exactly.
struct WorkClock {
  static constexpr double kCollisionCheckS = 6.0e-6;
  static constexpr double kIkIterationS = 2.0e-6;
  static constexpr double kNnEvaluationS = 5.0e-6;

  static double seconds(const WorkCounter& w) {
    return kCollisionCheckS * static_cast<double>(w.collision_checks) +
           kIkIterationS * static_cast<double>(w.ik_iterations) + kNnEvaluationS * static_cast<double>(w.nn_evaluations);
  }
};

/// Shared time budget measured on the work clock.
struct Budget {
  WorkCounter* work = nullptr;
  double start_s = 0.0;
  double limit_s = 10.0;

  static Budget begin(WorkCounter& w, double limit_s) { return {&w, WorkClock::seconds(w), limit_s}; }
  double elapsed() const { return work ? WorkClock::seconds(*work) - start_s : 0.0; }
  bool expired() const { return elapsed() > limit_s; }
};

struct Trajectory {
  std::vector<JointConfig> configs;
  double raw_length = 0.0;       // before smoothing
  double planning_time_s = 0.0;  // work clock

  double length() const;
  bool empty() const { return configs.empty(); }
};

double path_length(const std::vector<JointConfig>& configs);

struct PlanOptions {
  double extend_step = 0.2;     // RRT step, L-infinity (rad)
  double validate_step = 0.02;  // collision validation spacing (rad)
  double output_step = 0.1;     // max spacing of returned configs (rad)
  int goal_ik_solutions = 5;
  int smoothing_attempts = 100;
  IkOptions ik;
};

struct PlanRequest {
  JointConfig start;
  std::variant<JointConfig, Pose> goal;
  double budget_s = 10.0;
  std::uint64_t seed = 0;
};

/// Bidirectional RRT. A direct start-goal connection is tried first; TCP-pose
/// goals grow the goal tree from up to `goal_ik_solutions` collision-free IK
/// solutions. The result is shortcut-smoothed and resampled to `output_step`.
/// Throws InvalidStart, InvalidGoal, Timeout. `budget` (when given) is shared
/// with the caller and replaces `req.budget_s`.
Trajectory rrt_connect(const CollisionWorld& world, const Robot& robot, const PlanRequest& req,
                       const PlanOptions& opts = {}, WorkCounter* work = nullptr, const Budget* budget = nullptr);

/// Random shortcutting: `iterations` attempts to replace the path between two
/// random arc-length positions by a straight, collision-free segment.
Trajectory shortcut_smooth(const CollisionWorld& world, const Robot& robot, const Trajectory& traj, int iterations,
                           std::uint64_t seed, double validate_step = 0.02, WorkCounter* work = nullptr);

/// Inserts configs so consecutive ones differ by at most `step` in every joint.
std::vector<JointConfig> densify(const std::vector<JointConfig>& configs, double step);

inline constexpr double kJointSpeed = 1.2;  // rad/s

struct Execution {
  double time_s = 0.0;
  JointConfig end;
  std::optional<Pose> object_pose;  // end pose of a held object
};

/// Constant-speed playback: each segment takes max |delta q| / 1.2 s. A held
/// object (`grasp` = TCP pose in the object frame) follows the TCP rigidly.
Execution execute_kinematic(const Trajectory& traj, const Robot& robot, const Pose* grasp = nullptr);

/// Straight-line TCP motion by chained IK at `spacing` intervals, validated
/// segment by segment. Returns nullopt when any step fails.
std::optional<std::vector<JointConfig>> cartesian_path(const CollisionWorld& world, const Robot& robot,
                                                       const JointConfig& start, const Pose& target, double spacing,
                                                       const IkOptions& ik, WorkCounter* work);

/// IK whose solution must pass `world`. nullopt when every restart fails.
std::optional<JointConfig> collision_free_ik(const CollisionWorld& world, const Robot& robot, const Pose& tcp,
                                             const JointConfig& seed, const IkOptions& ik, WorkCounter* work);

struct PickPlacePlan {
  std::size_t grasp_index = 0;
  Trajectory approach;   // current config -> grasp
  Trajectory lift;       // grasp -> lifted
  Trajectory transfer;   // lifted -> pre-place
  Trajectory insert;     // pre-place -> place
  Pose placed_object;    // object pose at release
  double planning_time_s = 0.0;

  double length() const { return approach.length() + lift.length() + transfer.length() + insert.length(); }
  std::vector<const Trajectory*> stages() const { return {&approach, &lift, &transfer, &insert}; }
};

struct PickPlaceInput {
  const SceneState* scene = nullptr;
  Pose object_pose;            // current target pose
  const TaskSpec* task = nullptr;
  JointConfig start;           // arm config before the approach
};

inline constexpr double kPrePlaceOffset = 0.1;

/// Tries each grasp (object-relative) in order: collision-free IK on the
/// current object pose and at the goal, then approach, lift, transfer and
/// straight insertion from the pre-place pose. Returns the first full plan.
/// Throws AllCandidatesFailed (or Timeout when the budget runs out).
PickPlacePlan plan_pick_and_place(const PickPlaceInput& in, const std::vector<GraspCandidate>& grasps,
                                  const Robot& robot, const PlanOptions& opts, std::uint64_t seed, WorkCounter& work,
                                  const Budget& budget);

/// World for the empty-handed arm around a scene: heightmap only, with the
/// target mesh as touch mesh.
CollisionWorld pick_world(const SceneState& scene, const Pose& object_pose, const std::vector<Slab>& slabs = {});
/// World while holding the target: heightmap, slabs, attached proxy points.
CollisionWorld carry_world(const SceneState& scene, const std::vector<Slab>& slabs, const Pose& grasp_relative);

/// {configs: [[rad,...]], length_rad, raw_length_rad, planning_time_s}
std::string trajectory_to_json(const Trajectory& t);

}  // namespace reorient
