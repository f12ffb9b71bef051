#pragma once

#include "reorient/catalog.hpp"
#include "reorient/hull2d.hpp"
#include "reorient/mesh.hpp"
#include "reorient/random.hpp"
#include "reorient/scene.hpp"

#include <cstdint>
#include <vector>

namespace reorient {

struct SettleOptions {
  double contact_tolerance = 0.001;
  double step = 0.5 * M_PI / 180.0;
  int max_iterations = 10000;
};

struct SettleResult {
  Pose final_pose;
  bool stable = false;
  int iterations = 0;
  double total_rotation = 0.0;
  /// COM height after every step, starting with the dropped pose.
  std::vector<double> com_heights;
};

/// World-frame vertices within the contact tolerance of the plane.
std::vector<Vec3> contact_points(const TriMesh& mesh, const Pose& pose, double tolerance = 0.001);

/// COM projection strictly inside the support polygon of the contact set.
/// Throws NoContact when no vertex is within the tolerance of the plane.
bool is_stable(const TriMesh& mesh, const Pose& pose, double tolerance = 0.001);

/// Quasi-static release on the plane z = 0: drop, then tip about the support
/// feature nearest the COM projection in small steps (clipped to the first new
/// contact), re-dropping after each step, until the COM projection is strictly
/// inside the support polygon. `stable` is false when the iteration cap is hit.
/// Throws InvalidInput when the start pose is outside [-1 mm, +0.1 m] of the plane.
SettleResult settle_on_plane(const TriMesh& mesh, const Pose& start, const SettleOptions& opts = {});

/// Uniformly random rotation.
UnitQuat random_orientation(Rng& rng);

struct PileOptions {
  Vec2 center = Vec2(0.5, 0.15);
  double spread = 0.18;
  double heightmap_size = 0.56;
  int heightmap_cells = 64;
  Region region;
  int max_rejections = 100;
};

/// Places objects one by one at random XY/orientation inside the pile bounds,
/// settles each on the plane, and rejects placements that touch what is already
/// there. One object is picked as the target. Throws PlacementFailure.
SceneState generate_pile(const MeshCatalog& catalog, int n_objects, std::uint64_t seed, const PileOptions& opts);

}  // namespace reorient
