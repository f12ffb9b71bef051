#include "reorient/mesh.hpp"

#include "reorient/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace reorient {

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  if (faces_.empty() || vertices_.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no faces");
  const int nv = static_cast<int>(vertices_.size());
  for (const Face& f : faces_)
    for (int i : f)
      if (i < 0 || i >= nv) throw Error(ErrorCode::InvalidMesh, "face index out of range");

  bounds_.min = bounds_.max = vertices_.front();
  for (const Vec3& v : vertices_) {
    bounds_.min = bounds_.min.cwiseMin(v);
    bounds_.max = bounds_.max.cwiseMax(v);
    bounding_radius_ = std::max(bounding_radius_, v.norm());
  }
  longest_extent_ = bounds_.extent().maxCoeff();

  double vol = 0.0;
  Vec3 weighted = Vec3::Zero();
  for (const Face& f : faces_) {
    const Vec3& a = vertices_[f[0]];
    const Vec3& b = vertices_[f[1]];
    const Vec3& c = vertices_[f[2]];
    const double v = a.dot(b.cross(c)) / 6.0;
    vol += v;
    weighted += v * (a + b + c) / 4.0;
  }
  volume_ = vol;
  if (std::abs(vol) > 1e-15) {
    com_ = weighted / vol;
  } else {
    double area = 0.0;
    Vec3 acc = Vec3::Zero();
    for (std::size_t i = 0; i < faces_.size(); ++i) {
      const double a = face_area(i);
      const Face& f = faces_[i];
      acc += a * (vertices_[f[0]] + vertices_[f[1]] + vertices_[f[2]]) / 3.0;
      area += a;
    }
    com_ = area > 0.0 ? Vec3(acc / area) : bounds_.center();
  }
}

Vec3 TriMesh::face_normal(std::size_t f) const {
  const Face& t = faces_[f];
  const Vec3 n = (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]);
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
}

double TriMesh::face_area(std::size_t f) const {
  const Face& t = faces_[f];
  return 0.5 * (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]).norm();
}

double TriMesh::surface_area() const {
  double a = 0.0;
  for (std::size_t i = 0; i < faces_.size(); ++i) a += face_area(i);
  return a;
}

bool TriMesh::is_watertight() const {
  std::map<std::pair<int, int>, int> edges;
  for (const Face& f : faces_)
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edges[{a, b}];
    }
  for (const auto& [e, count] : edges)
    if (count != 2) return false;

  // Union-find over vertices referenced by faces.
  std::vector<int> parent(vertices_.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Face& f : faces_) {
    parent[find(f[1])] = find(f[0]);
    parent[find(f[2])] = find(f[0]);
  }
  std::map<int, std::array<long, 3>> vef;  // root -> V, E, F
  std::set<int> used;
  for (const Face& f : faces_) {
    ++vef[find(f[0])][2];
    for (int i : f) used.insert(i);
  }
  for (int v : used) ++vef[find(v)][0];
  for (const auto& [e, count] : edges) ++vef[find(e.first)][1];
  for (const auto& [root, c] : vef)
    if (c[0] - c[1] + c[2] != 2) return false;
  return true;
}

std::vector<Vec3> TriMesh::surface_samples(double spacing) const {
  std::vector<Vec3> out(vertices_);
  for (const Face& f : faces_) {
    const Vec3& a = vertices_[f[0]];
    const Vec3& b = vertices_[f[1]];
    const Vec3& c = vertices_[f[2]];
    const double longest = std::max({(b - a).norm(), (c - a).norm(), (c - b).norm()});
    const int n = std::max(1, static_cast<int>(std::ceil(longest / spacing)));
    for (int i = 0; i <= n; ++i)
      for (int j = 0; i + j <= n; ++j) {
        if ((i == 0 && j == 0) || (i == n && j == 0) || (i == 0 && j == n)) continue;
        const double u = static_cast<double>(i) / n;
        const double v = static_cast<double>(j) / n;
        out.push_back(a + u * (b - a) + v * (c - a));
      }
  }
  return out;
}

std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                                   const Vec3& c) {
  constexpr double kEps = 1e-12;
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < kEps) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = origin - a;
  const double u = s.dot(p) * inv;
  if (u < -1e-12 || u > 1.0 + 1e-12) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < -1e-12 || u + v > 1.0 + 1e-12) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (t <= kEps) return std::nullopt;
  return t;
}

std::optional<RayHit> TriMesh::raycast(const Vec3& origin, const Vec3& dir) const {
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < faces_.size(); ++i) {
    const Face& f = faces_[i];
    const auto t = ray_triangle(origin, dir, vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]);
    if (t && (!best || *t < best->t)) best = RayHit{*t, origin + *t * dir, i};
  }
  return best;
}

bool TriMesh::contains(const Vec3& p) const {
  const Vec3 dir = Vec3(0.5773, 0.5774, 0.5776).normalized();
  int crossings = 0;
  for (const Face& f : faces_)
    if (ray_triangle(p, dir, vertices_[f[0]], vertices_[f[1]], vertices_[f[2]])) ++crossings;
  return crossings % 2 == 1;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + d1 / (d1 - d3) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + d2 / (d2 - d6) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double TriMesh::surface_distance(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Face& f : faces_)
    best = std::min(best, (p - closest_point_on_triangle(p, vertices_[f[0]], vertices_[f[1]], vertices_[f[2]])).norm());
  return best;
}

double mesh_bottom_offset(const TriMesh& mesh, const UnitQuat& orientation) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "mesh_bottom_offset");
  double min_z = std::numeric_limits<double>::infinity();
  for (const Vec3& v : mesh.vertices()) min_z = std::min(min_z, orientation.rotate(v).z());
  return -min_z;
}

double mesh_min_z(const TriMesh& mesh, const Pose& pose) {
  double min_z = std::numeric_limits<double>::infinity();
  for (const Vec3& v : mesh.vertices()) min_z = std::min(min_z, transform_point(pose, v).z());
  return min_z;
}

namespace {

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
}

bool in_triangle2(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                  const Eigen::Vector2d& c) {
  return cross2(a, b, p) >= 0 && cross2(b, c, p) >= 0 && cross2(c, a, p) >= 0;
}

std::vector<std::array<int, 3>> ear_clip(const std::vector<Eigen::Vector2d>& poly) {
  std::vector<int> idx(poly.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::array<int, 3>> tris;
  std::size_t guard = 0;
  while (idx.size() > 3 && guard++ < 10 * poly.size() * poly.size()) {
    bool clipped = false;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const int ip = idx[(i + idx.size() - 1) % idx.size()];
      const int ic = idx[i];
      const int in = idx[(i + 1) % idx.size()];
      if (cross2(poly[ip], poly[ic], poly[in]) <= 1e-15) continue;
      bool ear = true;
      for (int k : idx) {
        if (k == ip || k == ic || k == in) continue;
        if (in_triangle2(poly[k], poly[ip], poly[ic], poly[in])) {
          ear = false;
          break;
        }
      }
      if (!ear) continue;
      tris.push_back({ip, ic, in});
      idx.erase(idx.begin() + static_cast<long>(i));
      clipped = true;
      break;
    }
    if (!clipped) throw Error(ErrorCode::InvalidMesh, "outline is not a simple counter-clockwise polygon");
  }
  tris.push_back({idx[0], idx[1], idx[2]});
  return tris;
}

}  // namespace

TriMesh make_extrusion(const std::vector<Eigen::Vector2d>& outline, double height) {
  const int n = static_cast<int>(outline.size());
  if (n < 3 || !(height > 0.0)) throw Error(ErrorCode::InvalidMesh, "extrusion needs >= 3 points and height > 0");
  std::vector<Vec3> v;
  v.reserve(2 * n);
  for (const auto& p : outline) v.emplace_back(p.x(), p.y(), -0.5 * height);
  for (const auto& p : outline) v.emplace_back(p.x(), p.y(), 0.5 * height);
  std::vector<TriMesh::Face> f;
  for (const auto& t : ear_clip(outline)) {
    f.push_back({t[0] + n, t[1] + n, t[2] + n});
    f.push_back({t[2], t[1], t[0]});
  }
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    f.push_back({i, j, j + n});
    f.push_back({i, j + n, i + n});
  }
  return {std::move(v), std::move(f)};
}

TriMesh make_box(double dx, double dy, double dz) {
  const double hx = 0.5 * dx, hy = 0.5 * dy;
  return make_extrusion({{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}}, dz);
}

TriMesh make_prism(int sides, double radius, double height) {
  std::vector<Eigen::Vector2d> outline;
  for (int k = 0; k < sides; ++k) {
    const double a = (k - 0.5) * 2.0 * M_PI / sides;
    outline.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  return make_extrusion(outline, height);
}

TriMesh recenter_bounds(const TriMesh& mesh) {
  const Vec3 c = mesh.bounds().center();
  std::vector<Vec3> v = mesh.vertices();
  for (Vec3& p : v) p -= c;
  return {std::move(v), mesh.faces()};
}

TriMesh parse_obj(const std::string& text) {
  std::istringstream in(text);
  std::vector<Vec3> v;
  std::vector<TriMesh::Face> f;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw Error(ErrorCode::InvalidMesh, "bad vertex line: " + line);
      v.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) {
        const int idx = std::stoi(tok.substr(0, tok.find('/')));
        poly.push_back(idx > 0 ? idx - 1 : static_cast<int>(v.size()) + idx);
      }
      if (poly.size() < 3) throw Error(ErrorCode::InvalidMesh, "face with < 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) f.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  return {std::move(v), std::move(f)};
}

TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_obj(ss.str());
}

std::string to_obj(const TriMesh& mesh, const Pose& pose, int index_offset) {
  std::ostringstream out;
  out.precision(9);
  for (const Vec3& p : mesh.vertices()) {
    const Vec3 w = transform_point(pose, p);
    out << "v " << w.x() << ' ' << w.y() << ' ' << w.z() << '\n';
  }
  for (const auto& f : mesh.faces())
    out << "f " << f[0] + 1 + index_offset << ' ' << f[1] + 1 + index_offset << ' ' << f[2] + 1 + index_offset
        << '\n';
  return out.str();
}

}  // namespace reorient
