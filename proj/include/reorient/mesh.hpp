#pragma once

#include "reorient/geometry.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace reorient {

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
};

struct RayHit {
  double t = 0.0;
  Vec3 point;
  std::size_t face = 0;
};

/// Triangle mesh with cached bounds, uniform-density center of mass and the
/// longest axis-aligned extent. Faces are wound counter-clockwise seen from
/// outside, so face normals point outward.
class TriMesh {
 public:
  using Face = std::array<int, 3>;

  TriMesh() = default;
  /// Throws InvalidMesh on out-of-range indices, EmptyMesh on no faces.
  TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  bool empty() const { return faces_.empty(); }

  const Aabb& bounds() const { return bounds_; }
  const Vec3& center_of_mass() const { return com_; }
  double longest_extent() const { return longest_extent_; }
  /// Largest vertex distance from the mesh origin.
  double bounding_radius() const { return bounding_radius_; }
  double volume() const { return volume_; }

  Vec3 face_normal(std::size_t f) const;
  double face_area(std::size_t f) const;
  double surface_area() const;

  /// Every undirected edge shared by exactly two faces and V - E + F = 2 on
  /// every connected component.
  bool is_watertight() const;

  /// Deterministic surface points: all vertices plus a barycentric lattice on
  /// every face whose spacing is at most `spacing`.
  std::vector<Vec3> surface_samples(double spacing) const;

  /// Nearest front or back hit of the ray `origin + t dir`, t > 0.
  std::optional<RayHit> raycast(const Vec3& origin, const Vec3& dir) const;

  /// Parity test with a fixed skew ray.
  bool contains(const Vec3& p) const;
  /// Unsigned distance from `p` to the surface.
  double surface_distance(const Vec3& p) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  Aabb bounds_;
  Vec3 com_ = Vec3::Zero();
  double longest_extent_ = 0.0;
  double bounding_radius_ = 0.0;
  double volume_ = 0.0;
};

/// -min_z over the vertices rotated by `orientation`: placing the mesh origin
/// at that height puts the lowest vertex on z = 0. Throws EmptyMesh.
double mesh_bottom_offset(const TriMesh& mesh, const UnitQuat& orientation);

/// Lowest world z of the posed mesh.
double mesh_min_z(const TriMesh& mesh, const Pose& pose);

/// Axis-aligned box centered at the origin.
TriMesh make_box(double dx, double dy, double dz);

/// Extrudes a simple counter-clockwise polygon in the XY plane along Z by
/// `height`, centered on the origin in Z. Concave outlines are ear-clipped.
TriMesh make_extrusion(const std::vector<Eigen::Vector2d>& outline, double height);

/// Regular n-gon prism with circumradius `radius`, axis along Z.
TriMesh make_prism(int sides, double radius, double height);

/// Translates vertices so the axis-aligned bounds are centered at the origin.
TriMesh recenter_bounds(const TriMesh& mesh);

/// OBJ subset: `v` and `f` records only; polygons are fan-triangulated and
/// `f` entries may carry `/vt/vn` suffixes. Throws Io / InvalidMesh.
TriMesh load_obj(const std::string& path);
TriMesh parse_obj(const std::string& text);
std::string to_obj(const TriMesh& mesh, const Pose& pose = Pose::identity(), int index_offset = 0);

/// Ray/triangle intersection (Moller-Trumbore). Returns t > eps on hit.
std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                                   const Vec3& c);

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace reorient
