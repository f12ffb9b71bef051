#include "doctest.h"

#include "reorient/error.hpp"
#include "reorient/geometry.hpp"
#include "reorient/hull2d.hpp"
#include "reorient/mesh.hpp"
#include "reorient/random.hpp"

#include <cmath>
#include <set>

using namespace reorient;

namespace {

Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

UnitQuat random_quat(Rng& rng) { return {rng.normal(), rng.normal(), rng.normal(), rng.normal()}; }

// Rodrigues' formula from the axis-angle form of q, independent of the quaternion sandwich.
Vec3 rodrigues(const UnitQuat& q, const Vec3& v) {
  const Vec3 u(q.x(), q.y(), q.z());
  const double s = u.norm();
  if (s < 1e-15) return v;
  const Vec3 k = u / s;
  const double th = 2.0 * std::atan2(s, q.w());
  return v * std::cos(th) + k.cross(v) * std::sin(th) + k * k.dot(v) * (1 - std::cos(th));
}

void check_unit(const UnitQuat& q) {
  const double n = std::sqrt(q.x() * q.x() + q.y() * q.y() + q.z() * q.z() + q.w() * q.w());
  CHECK(std::abs(n - 1.0) < 1e-9);
  CHECK(q.w() >= 0.0);
}

}  // namespace

TEST_CASE("quat_from_two_vectors identity and quarter turn") {
  const UnitQuat a = quat_from_two_vectors({0, 0, 1}, {0, 0, 1});
  CHECK(a.x() == doctest::Approx(0.0));
  CHECK(a.y() == doctest::Approx(0.0));
  CHECK(a.z() == doctest::Approx(0.0));
  CHECK(a.w() == doctest::Approx(1.0));

  const UnitQuat b = quat_from_two_vectors({1, 0, 0}, {0, 1, 0});
  CHECK(b.x() == doctest::Approx(0.0));
  CHECK(b.y() == doctest::Approx(0.0));
  CHECK(b.z() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(b.w() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("quat_from_two_vectors antiparallel gives a half turn about a perpendicular axis") {
  const Vec3 vg(0, 0, 1), vs(0, 0, -1);
  const UnitQuat q = quat_from_two_vectors(vg, vs);
  CHECK(std::abs(q.w()) < 1e-12);
  CHECK(std::abs(Vec3(q.x(), q.y(), q.z()).dot(vg)) < 1e-12);
  CHECK((rodrigues(q, vg) - vs).norm() < 1e-9);
  check_unit(q);
}

TEST_CASE("quat_from_two_vectors rejects zero vectors") {
  CHECK_THROWS_AS(quat_from_two_vectors({0, 0, 0}, {1, 0, 0}), Error);
  CHECK_THROWS_AS(quat_from_two_vectors({1, 0, 0}, {1e-13, 0, 0}), Error);
  try {
    quat_from_two_vectors({0, 0, 0}, {1, 0, 0});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroVector);
  }
}

TEST_CASE("quat_from_two_vectors maps v_g onto v_s along the shortest arc") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 u = random_unit(rng), v = random_unit(rng);
    const double scale_u = rng.uniform(0.1, 5.0), scale_v = rng.uniform(0.1, 5.0);
    const UnitQuat q = quat_from_two_vectors(u * scale_u, v * scale_v);
    check_unit(q);
    const Vec3 r = rodrigues(q, u);
    CHECK(std::acos(std::clamp(r.dot(v), -1.0, 1.0)) < 1e-6);
    CHECK(std::abs(q.angle() - std::acos(std::clamp(u.dot(v), -1.0, 1.0))) < 1e-6);
    // Shortest arc: the rotation axis is perpendicular to both inputs.
    const Vec3 axis(q.x(), q.y(), q.z());
    if (axis.norm() > 1e-6) {
      CHECK(std::abs(axis.normalized().dot(u)) < 1e-6);
      CHECK(std::abs(axis.normalized().dot(v)) < 1e-6);
    }
    const UnitQuat id = quat_from_two_vectors(u, u);
    CHECK(id.angle() < 1e-7);
  }
}

TEST_CASE("quat_rotate") {
  const Vec3 v(1, 2, 3);
  CHECK((quat_rotate(UnitQuat::identity(), v) - v).norm() < 1e-15);
  const UnitQuat z90 = UnitQuat::from_axis_angle(Vec3::UnitZ(), M_PI / 2);
  CHECK((quat_rotate(z90, {1, 0, 0}) - Vec3(0, 1, 0)).norm() < 1e-12);

  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const UnitQuat a = random_quat(rng), b = random_quat(rng);
    const Vec3 p(rng.normal(), rng.normal(), rng.normal());
    CHECK(std::abs(quat_rotate(a, p).norm() - p.norm()) < 1e-9);
    CHECK((quat_rotate(a, p) - rodrigues(a, p)).norm() < 1e-9);
    CHECK((quat_rotate(a * b, p) - quat_rotate(a, quat_rotate(b, p))).norm() < 1e-9);
    CHECK((a.matrix() * p - quat_rotate(a, p)).norm() < 1e-9);
    check_unit(a * b);
    check_unit(a.inverse());
  }
}

TEST_CASE("canonical sign removes the double cover") {
  const UnitQuat a(0.1, -0.2, 0.3, -0.9);
  const UnitQuat b(-0.1, 0.2, -0.3, 0.9);
  CHECK(a == b);
  const UnitQuat half(0.0, -1.0, 0.0, 0.0);
  CHECK(half.y() == 1.0);
  CHECK_THROWS_AS(UnitQuat(0, 0, 0, 0), Error);
}

TEST_CASE("pose algebra") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const Pose a{Vec3(rng.normal(), rng.normal(), rng.normal()), random_quat(rng)};
    const Pose b{Vec3(rng.normal(), rng.normal(), rng.normal()), random_quat(rng)};
    const Vec3 p(rng.normal(), rng.normal(), rng.normal());

    const Pose ib = pose_compose(Pose::identity(), b);
    CHECK((ib.position - b.position).norm() < 1e-12);
    CHECK(angular_distance(ib.orientation, b.orientation) < 1e-9);

    const Pose e = pose_compose(a, pose_inverse(a));
    CHECK(e.position.norm() < 1e-9);
    CHECK(e.orientation.angle() < 1e-7);

    const Pose aa = pose_inverse(pose_inverse(a));
    CHECK((aa.position - a.position).norm() < 1e-9);
    CHECK(angular_distance(aa.orientation, a.orientation) < 1e-7);

    CHECK((transform_point(pose_compose(a, b), p) - transform_point(a, transform_point(b, p))).norm() < 1e-9);

    // 4x4 matrix oracle.
    const Eigen::Vector4d ph(p.x(), p.y(), p.z(), 1.0);
    const Eigen::Vector4d m = a.matrix() * b.matrix() * ph;
    CHECK((m.head<3>() - transform_point(a * b, p)).norm() < 1e-9);
    CHECK((a.matrix() * b.matrix() - (a * b).matrix()).norm() < 1e-9);

    const auto arr = a.to_array();
    const Pose back = Pose::from_array(arr);
    CHECK((back.position - a.position).norm() < 1e-15);
    CHECK(angular_distance(back.orientation, a.orientation) < 1e-12);
  }
}

TEST_CASE("euler_grid") {
  CHECK(euler_grid(8).size() == 512);
  const auto one = euler_grid(1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].angle() < 1e-15);

  const auto two = euler_grid(2);
  CHECK(two.size() == 8);
  for (const Vec3& axis : {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()}) {
    const UnitQuat half = UnitQuat::from_axis_angle(axis, M_PI);
    bool found = false;
    for (const UnitQuat& q : two) found = found || angular_distance(q, half) < 1e-9;
    CHECK(found);
  }
  for (const UnitQuat& q : euler_grid(8)) check_unit(q);

  // Extrinsic XYZ: the grid entry for (i, j, k) rotates about X first.
  const auto g4 = euler_grid(4);
  const UnitQuat expect = UnitQuat::from_axis_angle(Vec3::UnitZ(), M_PI / 2) *
                          UnitQuat::from_axis_angle(Vec3::UnitY(), 0.0) *
                          UnitQuat::from_axis_angle(Vec3::UnitX(), M_PI / 2);
  bool found = false;
  for (const UnitQuat& q : g4) found = found || angular_distance(q, expect) < 1e-12;
  CHECK(found);
}

TEST_CASE("mesh_bottom_offset") {
  const TriMesh cube = make_box(1, 1, 1);
  CHECK(mesh_bottom_offset(cube, UnitQuat::identity()) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mesh_bottom_offset(cube, UnitQuat::from_axis_angle(Vec3::UnitX(), M_PI / 4)) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK_THROWS_AS(mesh_bottom_offset(TriMesh(), UnitQuat::identity()), Error);

  Rng rng(5);
  const TriMesh prism = make_prism(7, 0.1, 0.3);
  for (int i = 0; i < 200; ++i) {
    const UnitQuat q = random_quat(rng);
    const double off = mesh_bottom_offset(prism, q);
    CHECK(off >= 0.0);
    const Pose placed{Vec3(rng.normal(), rng.normal(), off), q};
    CHECK(std::abs(mesh_min_z(prism, placed)) < 1e-12);
  }
}

TEST_CASE("support polygon") {
  const std::vector<Vec3> square{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  const SupportPolygon h(square);
  REQUIRE(h.vertices().size() == 4);
  CHECK(h.area() == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2& a = h.vertices()[i];
    const Vec2& b = h.vertices()[(i + 1) % 4];
    const Vec2& c = h.vertices()[(i + 2) % 4];
    const double cross = (b - a).x() * (c - b).y() - (b - a).y() * (c - b).x();
    CHECK(cross > 0.0);
  }
  for (const Vec3& p : square) {
    bool found = false;
    for (const Vec2& v : h.vertices()) found = found || (v - p.head<2>()).norm() < 1e-15;
    CHECK(found);
  }

  auto with_center = square;
  with_center.emplace_back(0.5, 0.5, 0.0);
  const SupportPolygon hc(with_center);
  CHECK(hc.vertices().size() == 4);
  for (const Vec2& v : hc.vertices()) CHECK((v - Vec2(0.5, 0.5)).norm() > 0.1);
  CHECK(hc.signed_distance({0.5, 0.5}) == doctest::Approx(0.5));
  CHECK(hc.contains({1.0 + 5e-7, 0.5}));
  CHECK_FALSE(hc.contains({1.0 + 5e-6, 0.5}));

  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 100; ++i) pts.emplace_back(rng.normal(), rng.normal(), rng.normal());
    const SupportPolygon p(pts);
    for (const Vec3& q : pts) CHECK(p.contains(q.head<2>()));
    // Idempotence.
    const SupportPolygon pp(p.vertices());
    REQUIRE(pp.vertices().size() == p.vertices().size());
    for (std::size_t i = 0; i < p.vertices().size(); ++i) CHECK((pp.vertices()[i] - p.vertices()[i]).norm() < 1e-15);
  }

  const SupportPolygon single(std::vector<Vec2>{{0.2, 0.3}});
  CHECK(single.degenerate());
  CHECK(single.contains({0.2, 0.3 + 1e-7}));
  const SupportPolygon seg(std::vector<Vec2>{{0, 0}, {1, 0}, {0.5, 0}});
  CHECK(seg.vertices().size() == 2);
  CHECK(seg.signed_distance({0.5, 0.1}) == doctest::Approx(-0.1));
}
