#include "reorient/grasp.hpp"

namespace reorient {

GraspCandidate grasp_from_surface(const Vec3& point, const Vec3& normal, const Pose& object_pose,
                                  const GripperModel& gripper) {
  GraspCandidate g;
  g.normal = normal.normalized();
  g.point = point;
  g.tcp.position = point + kSuctionStandoff * g.normal;
  g.tcp.orientation = quat_from_two_vectors(gripper.approach_axis, -g.normal);
  const Pose inv = pose_inverse(object_pose);
  g.relative = inv * g.tcp;
  g.local_point = transform_point(inv, point);
  g.local_normal = inv.orientation.rotate(g.normal);
  return g;
}

GraspCandidate reanchor(const GraspCandidate& g, const Pose& object_pose) {
  GraspCandidate out = g;
  out.tcp = object_pose * g.relative;
  out.point = transform_point(object_pose, g.local_point);
  out.normal = object_pose.orientation.rotate(g.local_normal);
  return out;
}

}  // namespace reorient
