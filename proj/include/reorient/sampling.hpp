#pragma once

#include "reorient/grasp.hpp"
#include "reorient/kinematics.hpp"
#include "reorient/scene.hpp"

#include <cstdint>
#include <vector>

namespace reorient {

/// Up to `n` grasps drawn without replacement from the top-down render of the
/// target at its current pose. Hits hidden under the distractor heightmap are
/// dropped. Throws NoVisibleSurface.
std::vector<GraspCandidate> sample_grasps_initial(const SceneState& scene, const Pose& object_pose,
                                                  const GripperModel& gripper, int n = 30, std::uint64_t seed = 0);

/// Region cell centers whose cube of edge 2 x bounding radius is clear of the
/// heightmap. Throws NoFreePositions.
std::vector<Vec2> sample_reorient_xy(const SceneState& scene, const TriMesh& target);

/// Free XYs x euler_grid(8), z from place_z_with_margin. XY-major order.
std::vector<Pose> enumerate_reorient_poses(const SceneState& scene, const TriMesh& target);
std::vector<Pose> enumerate_reorient_poses(const std::vector<Vec2>& xys, const TriMesh& target);

/// Grasps on the goal pose visible through the container opening. Throws
/// NoVisibleSurface.
std::vector<GraspCandidate> sample_grasps_goal(const TaskSpec& task, const TriMesh& target,
                                               const GripperModel& gripper, int n = 30, std::uint64_t seed = 0);

/// Upright orientations turned about Z so the mean goal-grasp normal faces -X,
/// plus the two 45 degree neighbors, at every free XY (pose-major per XY).
/// Throws NoFreePositions.
std::vector<Pose> heuristic_reorient_poses(const SceneState& scene, const TaskSpec& task,
                                           const std::vector<GraspCandidate>& goal_grasps);

/// Z rotation bringing the horizontal part of `normal` onto -X; 0 when the
/// normal is vertical.
double face_minus_x_angle(const Vec3& normal);

struct ShelfLayout {
  double front_x = 0.45;
  double back_x = 0.75;
  double min_y = 0.45;
  double max_y = 0.85;
  double board_z = 0.20;
  double ceiling_z = 0.55;
  double wall = 0.02;
  double neighbor_gap = 0.05;
};

struct BoxLayout {
  Vec2 center{0.5, 0.6};
  double inner_x = 0.3;
  double inner_y = 0.3;
  double wall_height = 0.12;
  double wall = 0.01;
};

inline constexpr double kGoalLift = 0.002;

std::vector<Slab> shelf_slabs(const ShelfLayout& s = {});
std::vector<Slab> box_slabs(const BoxLayout& b = {});

/// Random resting goal inside the container. Shelf goals get copies of the
/// target's footprint as neighbor slabs on both sides when they fit. Throws
/// PlacementFailure when no orientation fits.
TaskSpec random_task(const MeshCatalog& catalog, std::size_t target_mesh, ContainerKind kind, std::uint64_t seed,
                     const ShelfLayout& shelf = {}, const BoxLayout& box = {});

}  // namespace reorient
