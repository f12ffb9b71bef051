#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <span>
#include <vector>

namespace reorient {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Unit quaternion stored as (x, y, z, w), always normalized with w >= 0.
///
/// The sign convention removes the double cover so two rotations compare equal
/// component-wise; it is reapplied after every product.
class UnitQuat {
 public:
  UnitQuat() = default;
  /// Normalizes and canonicalizes. Throws ZeroVector on a zero quaternion.
  UnitQuat(double x, double y, double z, double w);

  static UnitQuat identity() { return {}; }
  static UnitQuat from_axis_angle(const Vec3& axis, double angle);
  /// Extrinsic X-Y-Z: rotate about world X by `rx`, then world Y, then world Z.
  static UnitQuat from_euler_xyz(double rx, double ry, double rz);
  static UnitQuat from_matrix(const Mat3& m);

  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }
  double w() const { return w_; }

  UnitQuat operator*(const UnitQuat& rhs) const;
  UnitQuat inverse() const;
  Vec3 rotate(const Vec3& v) const;
  Mat3 matrix() const;
  /// Rotation angle in [0, pi].
  double angle() const;

  std::array<double, 4> xyzw() const { return {x_, y_, z_, w_}; }
  bool operator==(const UnitQuat&) const = default;

 private:
  double x_ = 0.0, y_ = 0.0, z_ = 0.0, w_ = 1.0;
};

/// Angle of the relative rotation between two orientations, in [0, pi].
double angular_distance(const UnitQuat& a, const UnitQuat& b);

/// Shortest-arc rotation taking `v_g` onto `v_s` (both normalized internally).
///
/// Vector part is v_g x v_s and scalar part |v_g||v_s| + v_g . v_s, followed by
/// normalization. Antiparallel inputs get a half-turn about an axis
/// perpendicular to `v_g`. Throws ZeroVector when either input has norm < 1e-12.
UnitQuat quat_from_two_vectors(const Vec3& v_g, const Vec3& v_s);

inline Vec3 quat_rotate(const UnitQuat& q, const Vec3& v) { return q.rotate(v); }

struct Pose {
  Vec3 position = Vec3::Zero();
  UnitQuat orientation;

  static Pose identity() { return {}; }
  Mat4 matrix() const;
  /// [x, y, z, qx, qy, qz, qw]
  std::array<double, 7> to_array() const;
  static Pose from_array(std::span<const double> a);
};

Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& a);
Vec3 transform_point(const Pose& a, const Vec3& p);
inline Vec3 transform_vector(const Pose& a, const Vec3& v) { return a.orientation.rotate(v); }

inline Pose operator*(const Pose& a, const Pose& b) { return pose_compose(a, b); }

/// n^3 orientations from the Euler grid {2 pi k / n} on each axis (extrinsic
/// XYZ), one per angle triple. Distinct triples can name the same rotation
/// (e.g. (pi, pi, pi) is the identity); those are kept.
std::vector<UnitQuat> euler_grid(int n);

/// Any unit vector perpendicular to `v`.
Vec3 any_perpendicular(const Vec3& v);

}  // namespace reorient
