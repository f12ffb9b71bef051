#pragma once

#include "reorient/geometry.hpp"
#include "reorient/kinematics.hpp"

namespace reorient {

inline constexpr double kSuctionStandoff = 0.005;

/// Suction grasp: the TCP sits `kSuctionStandoff` off the surface along the
/// outward normal, with the approach axis pointing into the surface.
struct GraspCandidate {
  Pose tcp;                 // world
  Pose relative;            // object frame -> TCP, so tcp = object_pose * relative
  Vec3 point;               // world surface point
  Vec3 normal;              // world outward normal
  Vec3 local_point;         // object frame
  Vec3 local_normal;        // object frame
};

GraspCandidate grasp_from_surface(const Vec3& point, const Vec3& normal, const Pose& object_pose,
                                  const GripperModel& gripper);

/// Same object-relative grasp on a different object pose.
GraspCandidate reanchor(const GraspCandidate& g, const Pose& object_pose);

}  // namespace reorient
