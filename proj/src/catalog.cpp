#include "reorient/catalog.hpp"

#include "reorient/error.hpp"

#include <cmath>
#include <set>
#include <tuple>

namespace reorient {

namespace {

// Profile drawn in XY, extruded along Z, then turned so the profile lies in
// the XZ plane (the extrusion runs along Y).
TriMesh standing_profile(const std::vector<Eigen::Vector2d>& outline, double depth) {
  const TriMesh flat = make_extrusion(outline, depth);
  const UnitQuat turn = UnitQuat::from_axis_angle(Vec3::UnitX(), M_PI / 2);
  std::vector<Vec3> v;
  for (const Vec3& p : flat.vertices()) v.push_back(turn.rotate(p));
  return recenter_bounds(TriMesh(std::move(v), flat.faces()));
}

// Vertices, then the first surface sample in each cubic cell of edge `spacing`.
std::vector<Vec3> thinned_samples(const TriMesh& mesh, double spacing) {
  std::vector<Vec3> out(mesh.vertices());
  std::set<std::tuple<long, long, long>> seen;
  auto cell = [&](const Vec3& p) {
    return std::tuple<long, long, long>(std::lround(std::floor(p.x() / spacing)), std::lround(std::floor(p.y() / spacing)),
                                        std::lround(std::floor(p.z() / spacing)));
  };
  for (const Vec3& v : out) seen.insert(cell(v));
  for (const Vec3& p : mesh.surface_samples(0.5 * spacing))
    if (seen.insert(cell(p)).second) out.push_back(p);
  return out;
}

}  // namespace

const MeshCatalog& MeshCatalog::standard() {
  static const MeshCatalog catalog = [] {
    MeshCatalog c;
    c.add("cracker_box", make_box(0.16, 0.06, 0.21));
    c.add("sugar_box", make_box(0.09, 0.04, 0.175));
    c.add("l_block", standing_profile({{0.0, 0.0}, {0.14, 0.0}, {0.14, 0.05}, {0.05, 0.05}, {0.05, 0.18}, {0.0, 0.18}},
                                      0.07));
    c.add("t_block", standing_profile({{0.0, 0.0},
                                       {0.16, 0.0},
                                       {0.16, 0.04},
                                       {0.105, 0.04},
                                       {0.105, 0.17},
                                       {0.055, 0.17},
                                       {0.055, 0.04},
                                       {0.0, 0.04}},
                                      0.06));
    c.add("bottle", make_prism(8, 0.035, 0.19));
    c.add("wide_prism", make_prism(6, 0.08, 0.045));
    return c;
  }();
  return catalog;
}

std::size_t MeshCatalog::add(std::string id, TriMesh mesh, UnitQuat upright) {
  if (contains(id)) throw Error(ErrorCode::InvalidInput, "duplicate mesh id '" + id + "'");
  CatalogEntry e{std::move(id), std::move(mesh), upright, {}, {}};
  e.collision_points = e.mesh.surface_samples(kCollisionSpacing);
  e.proxy_points = thinned_samples(e.mesh, kProxySpacing);
  entries_.push_back(std::move(e));
  return entries_.size() - 1;
}

std::size_t MeshCatalog::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].id == id) return i;
  throw Error(ErrorCode::InvalidInput, "unknown mesh id '" + id + "'");
}

bool MeshCatalog::contains(const std::string& id) const {
  for (const auto& e : entries_)
    if (e.id == id) return true;
  return false;
}

}  // namespace reorient
