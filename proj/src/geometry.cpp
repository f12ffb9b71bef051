#include "reorient/geometry.hpp"

#include "reorient/error.hpp"

#include <algorithm>
#include <cmath>

namespace reorient {

namespace {

void canonicalize(double& x, double& y, double& z, double& w) {
  bool flip = w < 0.0;
  if (w == 0.0) {
    // Half-turn: pick the sign that makes the first nonzero vector component positive.
    if (x != 0.0) flip = x < 0.0;
    else if (y != 0.0) flip = y < 0.0;
    else flip = z < 0.0;
  }
  if (flip) {
    x = -x;
    y = -y;
    z = -z;
    w = -w;
  }
  if (w == 0.0) w = 0.0;  // drop -0.0
}

}  // namespace

UnitQuat::UnitQuat(double x, double y, double z, double w) {
  const double n = std::sqrt(x * x + y * y + z * z + w * w);
  if (!(n > 1e-300) || !std::isfinite(n)) throw Error(ErrorCode::ZeroVector, "quaternion has zero or non-finite norm");
  x_ = x / n;
  y_ = y / n;
  z_ = z / n;
  w_ = w / n;
  canonicalize(x_, y_, z_, w_);
}

UnitQuat UnitQuat::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n < 1e-12) throw Error(ErrorCode::ZeroVector, "rotation axis");
  const Vec3 a = axis / n;
  const double s = std::sin(0.5 * angle);
  return {a.x() * s, a.y() * s, a.z() * s, std::cos(0.5 * angle)};
}

UnitQuat UnitQuat::from_euler_xyz(double rx, double ry, double rz) {
  const UnitQuat qx = from_axis_angle(Vec3::UnitX(), rx);
  const UnitQuat qy = from_axis_angle(Vec3::UnitY(), ry);
  const UnitQuat qz = from_axis_angle(Vec3::UnitZ(), rz);
  return qz * (qy * qx);
}

UnitQuat UnitQuat::from_matrix(const Mat3& m) {
  const Eigen::Quaterniond q(m);
  return {q.x(), q.y(), q.z(), q.w()};
}

UnitQuat UnitQuat::operator*(const UnitQuat& r) const {
  return {w_ * r.x_ + x_ * r.w_ + y_ * r.z_ - z_ * r.y_,
          w_ * r.y_ - x_ * r.z_ + y_ * r.w_ + z_ * r.x_,
          w_ * r.z_ + x_ * r.y_ - y_ * r.x_ + z_ * r.w_,
          w_ * r.w_ - x_ * r.x_ - y_ * r.y_ - z_ * r.z_};
}

UnitQuat UnitQuat::inverse() const { return {-x_, -y_, -z_, w_}; }

Vec3 UnitQuat::rotate(const Vec3& v) const {
  // v' = v + 2w (u x v) + 2 u x (u x v)
  const Vec3 u(x_, y_, z_);
  const Vec3 t = 2.0 * u.cross(v);
  return v + w_ * t + u.cross(t);
}

Mat3 UnitQuat::matrix() const {
  return Eigen::Quaterniond(w_, x_, y_, z_).toRotationMatrix();
}

double UnitQuat::angle() const {
  const double vn = std::sqrt(x_ * x_ + y_ * y_ + z_ * z_);
  return 2.0 * std::atan2(vn, std::abs(w_));
}

double angular_distance(const UnitQuat& a, const UnitQuat& b) { return (a.inverse() * b).angle(); }

Vec3 any_perpendicular(const Vec3& v) {
  const Vec3 a = v.cwiseAbs();
  Vec3 basis = Vec3::UnitX();
  if (a.y() <= a.x() && a.y() <= a.z()) basis = Vec3::UnitY();
  else if (a.z() <= a.x() && a.z() <= a.y()) basis = Vec3::UnitZ();
  return v.cross(basis).normalized();
}

UnitQuat quat_from_two_vectors(const Vec3& v_g, const Vec3& v_s) {
  const double ng = v_g.norm();
  const double ns = v_s.norm();
  if (ng < 1e-12 || ns < 1e-12) throw Error(ErrorCode::ZeroVector, "quat_from_two_vectors input");
  const Vec3 g = v_g / ng;
  const Vec3 s = v_s / ns;
  const Vec3 c = g.cross(s);
  const double w = 1.0 + g.dot(s);
  if (w < 1e-12) {
    const Vec3 axis = any_perpendicular(g);
    return {axis.x(), axis.y(), axis.z(), 0.0};
  }
  return {c.x(), c.y(), c.z(), w};
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = orientation.matrix();
  m.topRightCorner<3, 1>() = position;
  return m;
}

std::array<double, 7> Pose::to_array() const {
  return {position.x(), position.y(), position.z(), orientation.x(), orientation.y(), orientation.z(),
          orientation.w()};
}

Pose Pose::from_array(std::span<const double> a) {
  if (a.size() != 7) throw Error(ErrorCode::InvalidInput, "pose needs 7 values [x,y,z,qx,qy,qz,qw]");
  return {Vec3(a[0], a[1], a[2]), UnitQuat(a[3], a[4], a[5], a[6])};
}

Pose pose_compose(const Pose& a, const Pose& b) {
  return {a.position + a.orientation.rotate(b.position), a.orientation * b.orientation};
}

Pose pose_inverse(const Pose& a) {
  const UnitQuat inv = a.orientation.inverse();
  return {-inv.rotate(a.position), inv};
}

Vec3 transform_point(const Pose& a, const Vec3& p) { return a.position + a.orientation.rotate(p); }

std::vector<UnitQuat> euler_grid(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidInput, "euler_grid needs n >= 1");
  std::vector<UnitQuat> out;
  out.reserve(static_cast<std::size_t>(n) * n * n);
  const double step = 2.0 * M_PI / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out.push_back(UnitQuat::from_euler_xyz(step * i, step * j, step * k));
  return out;
}

}  // namespace reorient
