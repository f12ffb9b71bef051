#pragma once

#include "reorient/catalog.hpp"
#include "reorient/geometry.hpp"
#include "reorient/hull2d.hpp"
#include "reorient/mesh.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace reorient {

inline constexpr double kGroundTolerance = 0.001;
inline constexpr double kDefaultClearance = 0.005;
inline constexpr double kReleaseMargin = 0.02;

/// Top-surface raster of non-target geometry. Cell (ix, iy) covers
/// [origin.x + ix res, origin.x + (ix+1) res) x [origin.y + iy res, ...).
/// Storage is row-major with y as the row index.
struct Heightmap {
  Vec2 origin = Vec2::Zero();
  double resolution = 0.56 / 64;
  int width = 64;
  int height = 64;
  std::vector<double> data = std::vector<double>(64 * 64, 0.0);

  /// Zero heightmap of `cells` x `cells` over a `size` x `size` window centered on `center`.
  static Heightmap empty(const Vec2& center, double size = 0.56, int cells = 64);

  Vec2 center() const { return origin + 0.5 * resolution * Vec2(width, height); }
  double at(int ix, int iy) const { return data[static_cast<std::size_t>(iy) * width + ix]; }
  double& at(int ix, int iy) { return data[static_cast<std::size_t>(iy) * width + ix]; }
  Vec2 cell_center(int ix, int iy) const { return origin + resolution * Vec2(ix + 0.5, iy + 0.5); }
  /// Height of the cell under (x, y); 0 outside the window.
  double height_at(double x, double y) const;
  /// Max height over cells intersecting the rectangle (0 outside the window).
  double max_in_rect(const Vec2& lo, const Vec2& hi) const;
  double max_height() const;
};

struct MeshInstance {
  const TriMesh* mesh = nullptr;
  Pose pose;
};

/// Rasterizes each mesh's upward-facing triangles at cell centers and keeps
/// the pointwise maximum; empty cells are 0.
Heightmap build_heightmap(std::span<const MeshInstance> distractors, const Vec2& center, double size = 0.56,
                          int cells = 64);
/// Same, writing into a prepared heightmap.
void rasterize_into(Heightmap& hm, const TriMesh& mesh, const Pose& pose);

/// True iff a surface sample of the posed mesh lies below `clearance` above an
/// occupied cell or below the ground tolerance.
bool heightmap_collide(const Heightmap& hm, const TriMesh& mesh, const Pose& pose, double clearance = kDefaultClearance);
/// Variant reusing precomputed surface samples of `mesh`.
bool heightmap_collide_points(const Heightmap& hm, const TriMesh& mesh, std::span<const Vec3> samples,
                              const Pose& pose, double clearance = kDefaultClearance);

/// True iff any cell intersecting the axis-aligned square of side `cube_edge`
/// centered on `xy` is higher than `clearance`.
bool cube_collide(const Heightmap& hm, const Vec2& xy, double cube_edge, double clearance = kDefaultClearance);

struct SurfacePoint {
  Vec3 point;
  Vec3 normal;
};

/// Orthographic ray casting along `view_dir` over the posed mesh bounds on a
/// ceil(sqrt(n_rays))^2 grid. Keeps first hits whose outward normal faces the
/// viewer. Throws ZeroVector, NoHits.
std::vector<SurfacePoint> render_visible_surface(const TriMesh& mesh, const Pose& pose, const Vec3& view_dir,
                                                 int n_rays = 4096);

/// mesh_bottom_offset + the 2 cm release margin.
double place_z_with_margin(const TriMesh& mesh, const UnitQuat& orientation);

/// Axis-aligned obstacle.
struct Slab {
  Vec3 min;
  Vec3 max;
};

enum class ContainerKind { Shelf, Box };

ContainerKind parse_container_kind(const std::string& s);
const char* to_string(ContainerKind k);

struct Container {
  ContainerKind kind = ContainerKind::Shelf;
  std::vector<Slab> slabs;

  /// Direction from the stored object out through the opening.
  Vec3 opening() const { return kind == ContainerKind::Shelf ? Vec3(-1, 0, 0) : Vec3(0, 0, 1); }
};

/// Defaults to the 0.5 m x 0.3 m area beside the robot, clear of the pile.
struct Region {
  Vec2 min = Vec2(0.25, -0.35);
  Vec2 max = Vec2(0.75, -0.05);
  int nx = 10;
  int ny = 8;

  /// Cell centers, x-major.
  std::vector<Vec2> grid() const;
  bool contains(const Vec2& p, double tol = 1e-9) const;
};

struct PlacedObject {
  std::size_t mesh = 0;
  Pose pose;
};

struct SceneState {
  const MeshCatalog* catalog = &MeshCatalog::standard();
  PlacedObject target;
  std::vector<PlacedObject> distractors;
  Heightmap heightmap;
  Region region;

  const CatalogEntry& target_entry() const { return (*catalog)[target.mesh]; }
  /// Re-rasterizes the distractors over the current heightmap window.
  Heightmap rasterize() const;
};

struct TaskSpec {
  std::size_t target_mesh = 0;
  Pose goal;
  Container container;
};

bool sphere_hits_slab(const Vec3& c, double r, const Slab& s);

}  // namespace reorient
