#pragma once

#include "reorient/geometry.hpp"
#include "reorient/random.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace reorient {

using JointConfig = Eigen::VectorXd;

struct Sphere {
  Vec3 center;
  double radius = 0.0;
};

struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius = 0.0;
};

struct Joint {
  std::string name;
  Pose origin;  // parent link frame -> joint frame, before the joint rotation
  Vec3 axis = Vec3::UnitZ();
  double limit_lo = 0.0;
  double limit_hi = 0.0;
  std::vector<Sphere> spheres;    // collision proxy, link frame
  std::vector<Capsule> capsules;  // nominal link volume, link frame
};

/// Serial revolute chain. Link i is the frame after joint i rotates; the tool
/// transform maps the last link to the flange.
class KinematicChain {
 public:
  KinematicChain() = default;
  /// Throws InvalidInput when a limit pair is not strictly increasing or an axis is zero.
  KinematicChain(std::vector<Joint> joints, Pose tool, JointConfig home);

  static KinematicChain from_json(const std::string& text);
  static KinematicChain default_arm();

  int dof() const { return static_cast<int>(joints_.size()); }
  const std::vector<Joint>& joints() const { return joints_; }
  const Pose& tool() const { return tool_; }
  const JointConfig& home() const { return home_; }

  bool in_limits(const JointConfig& q, double tol = 1e-12) const;
  JointConfig clamp(const JointConfig& q) const;
  JointConfig random_config(Rng& rng) const;
  double reach_upper_bound() const;

 private:
  std::vector<Joint> joints_;
  Pose tool_;
  JointConfig home_;
};

enum class GripperShape { I, L };

/// Suction gripper mounted on the flange. The approach axis (suction axis) is
/// expressed in the TCP frame; spheres and capsules in the flange frame.
struct GripperModel {
  GripperShape shape = GripperShape::I;
  Pose tcp_offset;
  Vec3 approach_axis = Vec3::UnitZ();
  std::vector<Sphere> spheres;
  std::vector<Capsule> capsules;

  static GripperModel from_json(const std::string& text, const std::string& key);
  static GripperModel builtin(GripperShape shape);
};

GripperShape parse_gripper_shape(const std::string& s);
const char* to_string(GripperShape s);

struct FkResult {
  std::vector<Pose> links;  // world pose of each link frame
  Pose flange;
  Pose tcp;
};

/// Throws DofMismatch.
FkResult forward_kinematics(const KinematicChain& chain, const JointConfig& q,
                            const Pose& tcp_offset = Pose::identity());

/// 6 x dof geometric Jacobian of the TCP (linear rows first).
Eigen::MatrixXd tcp_jacobian(const KinematicChain& chain, const JointConfig& q, const Pose& tcp_offset);

/// Position error and rotation error (angle of the relative rotation).
std::pair<double, double> pose_error(const Pose& a, const Pose& b);

struct IkOptions {
  double tol_pos = 1e-3;
  double tol_rot = 8.7e-3;
  int restarts = 20;
  int iterations = 200;
  double damping = 0.1;
  double max_step = 0.3;
  /// A restart ends early after this many iterations without progress (0: never).
  int stall_iterations = 20;
  std::uint64_t seed = 0;
};

/// Counters charged by IK and collision queries; the planner converts them to
/// a deterministic planning clock.
struct WorkCounter {
  std::uint64_t collision_checks = 0;
  std::uint64_t ik_iterations = 0;
  std::uint64_t nn_evaluations = 0;
};

using ConfigPredicate = std::function<bool(const JointConfig&)>;

/// Damped-least-squares IK with random restarts. The first attempt starts at
/// `seed`; later ones start at random in-limit configurations drawn from an
/// RNG seeded with `opts.seed`. A restart that stops improving is abandoned
/// early. A converged solution rejected by `accept` counts
/// as a failed restart. Returns nullopt when every restart fails.
std::optional<JointConfig> try_ik(const KinematicChain& chain, const Pose& target, const JointConfig& seed,
                                  const IkOptions& opts, const Pose& tcp_offset = Pose::identity(),
                                  const ConfigPredicate& accept = {}, WorkCounter* work = nullptr);

/// Same as try_ik but throws NoSolution.
JointConfig ik_solve(const KinematicChain& chain, const Pose& target, const JointConfig& seed,
                     const IkOptions& opts = {}, const Pose& tcp_offset = Pose::identity());

/// Euclidean norm of the angle differences. Throws DofMismatch.
double joint_distance(const JointConfig& a, const JointConfig& b);

/// Proxy geometry of a grasped object: points in the TCP frame.
struct AttachedObject {
  std::vector<Vec3> points_tcp;
};

/// World-frame proxy spheres: every link sphere, then gripper spheres, then one
/// zero-radius sphere per attached-object point.
std::vector<Sphere> link_spheres_at(const KinematicChain& chain, const GripperModel& gripper, const JointConfig& q,
                                    const AttachedObject* attached = nullptr);

}  // namespace reorient
