#include "reorient/kinematics.hpp"

#include "reorient/error.hpp"
#include "reorient_data.hpp"

#include "json.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace reorient {

using nlohmann::json;

namespace {

Vec3 vec3_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

Pose pose_from(const json& j) { return Pose::from_array(j.get<std::vector<double>>()); }

std::vector<Sphere> spheres_from(const json& j) {
  std::vector<Sphere> out;
  for (const auto& s : j) out.push_back({vec3_from(s.at("center")), s.at("radius").get<double>()});
  return out;
}

std::vector<Capsule> capsules_from(const json& j) {
  std::vector<Capsule> out;
  for (const auto& c : j) out.push_back({vec3_from(c.at("a")), vec3_from(c.at("b")), c.at("radius").get<double>()});
  return out;
}

void check_dof(const KinematicChain& chain, const JointConfig& q) {
  if (q.size() != chain.dof())
    throw Error(ErrorCode::DofMismatch,
                "config has " + std::to_string(q.size()) + " values, chain has " + std::to_string(chain.dof()));
}

Vec3 rotation_error(const UnitQuat& target, const UnitQuat& current) {
  const UnitQuat d = target * current.inverse();
  const Vec3 v(d.x(), d.y(), d.z());
  const double vn = v.norm();
  if (vn < 1e-15) return Vec3::Zero();
  return v / vn * (2.0 * std::atan2(vn, d.w()));
}

}  // namespace

KinematicChain::KinematicChain(std::vector<Joint> joints, Pose tool, JointConfig home)
    : joints_(std::move(joints)), tool_(tool), home_(std::move(home)) {
  for (Joint& j : joints_) {
    if (!(j.limit_lo < j.limit_hi)) throw Error(ErrorCode::InvalidInput, "joint " + j.name + " has limit_lo >= limit_hi");
    const double n = j.axis.norm();
    if (n < 1e-12) throw Error(ErrorCode::InvalidInput, "joint " + j.name + " has a zero axis");
    j.axis /= n;
  }
  if (home_.size() == 0) home_ = clamp(JointConfig::Zero(dof()));
  check_dof(*this, home_);
}

KinematicChain KinematicChain::from_json(const std::string& text) {
  const json doc = json::parse(text);
  std::vector<Joint> joints;
  for (const auto& jj : doc.at("joints")) {
    Joint j;
    j.name = jj.value("name", "joint" + std::to_string(joints.size() + 1));
    j.origin = pose_from(jj.at("origin"));
    j.axis = vec3_from(jj.at("axis"));
    j.limit_lo = jj.at("limit").at(0).get<double>();
    j.limit_hi = jj.at("limit").at(1).get<double>();
    if (jj.contains("spheres")) j.spheres = spheres_from(jj.at("spheres"));
    if (jj.contains("capsules")) j.capsules = capsules_from(jj.at("capsules"));
    joints.push_back(std::move(j));
  }
  const Pose tool = doc.contains("tool") ? pose_from(doc.at("tool")) : Pose::identity();
  JointConfig home;
  if (doc.contains("home")) {
    const auto h = doc.at("home").get<std::vector<double>>();
    home = Eigen::Map<const JointConfig>(h.data(), static_cast<Eigen::Index>(h.size()));
  }
  return {std::move(joints), tool, std::move(home)};
}

KinematicChain KinematicChain::default_arm() {
  static const KinematicChain arm = from_json(data::kDefaultArmJson);
  return arm;
}

bool KinematicChain::in_limits(const JointConfig& q, double tol) const {
  if (q.size() != dof()) return false;
  for (int i = 0; i < dof(); ++i) {
    if (!std::isfinite(q[i])) return false;
    if (q[i] < joints_[i].limit_lo - tol || q[i] > joints_[i].limit_hi + tol) return false;
  }
  return true;
}

JointConfig KinematicChain::clamp(const JointConfig& q) const {
  JointConfig out = q;
  for (int i = 0; i < dof(); ++i) out[i] = std::clamp(q[i], joints_[i].limit_lo, joints_[i].limit_hi);
  return out;
}

JointConfig KinematicChain::random_config(Rng& rng) const {
  JointConfig q(dof());
  for (int i = 0; i < dof(); ++i) q[i] = rng.uniform(joints_[i].limit_lo, joints_[i].limit_hi);
  return q;
}

double KinematicChain::reach_upper_bound() const {
  double r = tool_.position.norm();
  for (const Joint& j : joints_) r += j.origin.position.norm();
  return r;
}

GripperShape parse_gripper_shape(const std::string& s) {
  if (s == "I" || s == "i" || s == "I-shape") return GripperShape::I;
  if (s == "L" || s == "l" || s == "L-shape") return GripperShape::L;
  throw Error(ErrorCode::InvalidInput, "unknown gripper shape '" + s + "'");
}

const char* to_string(GripperShape s) { return s == GripperShape::I ? "I" : "L"; }

GripperModel GripperModel::from_json(const std::string& text, const std::string& key) {
  const json doc = json::parse(text);
  const json& g = doc.contains(key) ? doc.at(key) : doc;
  GripperModel m;
  m.shape = parse_gripper_shape(g.at("shape").get<std::string>());
  m.tcp_offset = pose_from(g.at("tcp"));
  m.approach_axis = vec3_from(g.at("approach_axis")).normalized();
  m.spheres = spheres_from(g.at("spheres"));
  if (g.contains("capsules")) m.capsules = capsules_from(g.at("capsules"));
  return m;
}

GripperModel GripperModel::builtin(GripperShape shape) {
  return from_json(data::kGrippersJson, to_string(shape));
}

FkResult forward_kinematics(const KinematicChain& chain, const JointConfig& q, const Pose& tcp_offset) {
  check_dof(chain, q);
  FkResult r;
  r.links.reserve(chain.dof());
  Pose frame;
  for (int i = 0; i < chain.dof(); ++i) {
    const Joint& j = chain.joints()[i];
    frame = frame * j.origin * Pose{Vec3::Zero(), UnitQuat::from_axis_angle(j.axis, q[i])};
    r.links.push_back(frame);
  }
  r.flange = frame * chain.tool();
  r.tcp = r.flange * tcp_offset;
  return r;
}

Eigen::MatrixXd tcp_jacobian(const KinematicChain& chain, const JointConfig& q, const Pose& tcp_offset) {
  const FkResult fk = forward_kinematics(chain, q, tcp_offset);
  Eigen::MatrixXd jac(6, chain.dof());
  for (int i = 0; i < chain.dof(); ++i) {
    const Vec3 axis = fk.links[i].orientation.rotate(chain.joints()[i].axis);
    jac.block<3, 1>(0, i) = axis.cross(fk.tcp.position - fk.links[i].position);
    jac.block<3, 1>(3, i) = axis;
  }
  return jac;
}

std::pair<double, double> pose_error(const Pose& a, const Pose& b) {
  return {(a.position - b.position).norm(), angular_distance(a.orientation, b.orientation)};
}

std::optional<JointConfig> try_ik(const KinematicChain& chain, const Pose& target, const JointConfig& seed,
                                  const IkOptions& opts, const Pose& tcp_offset, const ConfigPredicate& accept,
                                  WorkCounter* work) {
  check_dof(chain, seed);
  if (!(opts.tol_pos > 0.0) || !(opts.tol_rot > 0.0)) throw Error(ErrorCode::InvalidInput, "IK tolerances must be > 0");
  Rng rng(opts.seed);
  const int n = chain.dof();
  const double lambda2 = opts.damping * opts.damping;
  Eigen::Matrix<double, 6, 1> err;
  for (int attempt = 0; attempt < std::max(1, opts.restarts); ++attempt) {
    JointConfig q = attempt == 0 ? chain.clamp(seed) : chain.random_config(rng);
    double best = std::numeric_limits<double>::infinity();
    int stalled = 0;
    for (int it = 0; it <= opts.iterations; ++it) {
      const FkResult fk = forward_kinematics(chain, q, tcp_offset);
      const auto [ep, er] = pose_error(target, fk.tcp);
      if (ep < opts.tol_pos && er < opts.tol_rot) {
        if (!accept || accept(q)) return q;
        break;
      }
      if (it == opts.iterations) break;
      const double e = ep + 0.1 * er;
      if (e < best - 1e-6) {
        best = e;
        stalled = 0;
      } else if (opts.stall_iterations > 0 && ++stalled >= opts.stall_iterations) {
        break;
      }
      if (work) ++work->ik_iterations;
      err.head<3>() = target.position - fk.tcp.position;
      err.tail<3>() = rotation_error(target.orientation, fk.tcp.orientation);
      Eigen::MatrixXd jac(6, n);
      for (int i = 0; i < n; ++i) {
        const Vec3 axis = fk.links[i].orientation.rotate(chain.joints()[i].axis);
        jac.block<3, 1>(0, i) = axis.cross(fk.tcp.position - fk.links[i].position);
        jac.block<3, 1>(3, i) = axis;
      }
      Eigen::Matrix<double, 6, 6> jjt = jac * jac.transpose();
      jjt.diagonal().array() += lambda2;
      JointConfig dq = jac.transpose() * jjt.ldlt().solve(err);
      const double m = dq.cwiseAbs().maxCoeff();
      if (m > opts.max_step) dq *= opts.max_step / m;
      q = chain.clamp(q + dq);
    }
  }
  return std::nullopt;
}

JointConfig ik_solve(const KinematicChain& chain, const Pose& target, const JointConfig& seed, const IkOptions& opts,
                     const Pose& tcp_offset) {
  if (auto q = try_ik(chain, target, seed, opts, tcp_offset)) return *q;
  throw Error(ErrorCode::NoSolution, "IK did not converge after " + std::to_string(opts.restarts) + " restarts");
}

double joint_distance(const JointConfig& a, const JointConfig& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DofMismatch, "joint_distance on configs of different dof");
  return (a - b).norm();
}

std::vector<Sphere> link_spheres_at(const KinematicChain& chain, const GripperModel& gripper, const JointConfig& q,
                                    const AttachedObject* attached) {
  const FkResult fk = forward_kinematics(chain, q, gripper.tcp_offset);
  std::vector<Sphere> out;
  for (int i = 0; i < chain.dof(); ++i)
    for (const Sphere& s : chain.joints()[i].spheres) out.push_back({transform_point(fk.links[i], s.center), s.radius});
  for (const Sphere& s : gripper.spheres) out.push_back({transform_point(fk.flange, s.center), s.radius});
  if (attached)
    for (const Vec3& p : attached->points_tcp) out.push_back({transform_point(fk.tcp, p), 0.0});
  return out;
}

}  // namespace reorient
