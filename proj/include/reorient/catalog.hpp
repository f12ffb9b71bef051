#pragma once

#include "reorient/mesh.hpp"

#include <string>
#include <vector>

namespace reorient {

struct CatalogEntry {
  std::string id;
  TriMesh mesh;
  /// Orientation that stands the object in its canonical upright pose.
  UnitQuat upright;
  /// Surface points used by heightmap collision queries.
  std::vector<Vec3> collision_points;
  /// Coarser surface points carried as the grasped-object proxy.
  std::vector<Vec3> proxy_points;
};

class MeshCatalog {
 public:
  static constexpr double kCollisionSpacing = 0.004;
  static constexpr double kProxySpacing = 0.02;

  MeshCatalog() = default;

  /// Six procedural stand-ins: two boxes, an L-block, a T-block, a tall
  /// octagonal prism and a wide low hexagonal prism.
  static const MeshCatalog& standard();

  std::size_t add(std::string id, TriMesh mesh, UnitQuat upright = UnitQuat::identity());

  std::size_t size() const { return entries_.size(); }
  const CatalogEntry& operator[](std::size_t i) const { return entries_.at(i); }
  const std::vector<CatalogEntry>& entries() const { return entries_; }
  /// Throws InvalidInput.
  std::size_t index_of(const std::string& id) const;
  bool contains(const std::string& id) const;

 private:
  std::vector<CatalogEntry> entries_;
};

}  // namespace reorient
