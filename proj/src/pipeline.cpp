#include "reorient/pipeline.hpp"

#include "reorient/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace reorient {

using nlohmann::json;

Policy parse_policy(const std::string& s) {
  if (s == "learned") return Policy::Learned;
  if (s == "heuristic") return Policy::Heuristic;
  throw Error(ErrorCode::InvalidInput, "unknown policy '" + s + "'");
}

const char* to_string(Policy p) { return p == Policy::Learned ? "learned" : "heuristic"; }

double placement_auc(const TriMesh& mesh, const Pose& placed, const Pose& goal) {
  if (mesh.vertices().empty()) throw Error(ErrorCode::EmptyMesh, "placement_auc");
  double d = 0.0;
  for (const Vec3& v : mesh.vertices()) d += (transform_point(placed, v) - transform_point(goal, v)).norm();
  d /= static_cast<double>(mesh.vertices().size());
  return std::max(0.0, 1.0 - d / kAucMaxDistance);
}

namespace {

double wall_now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

IkOptions ik_with_seed(const PipelineConfig& cfg, std::uint64_t seed) {
  IkOptions ik = cfg.plan.ik;
  ik.seed = seed;
  return ik;
}

}  // namespace

EpisodeContext::EpisodeContext(const SceneState& s, const TaskSpec& t, const PipelineConfig& c, std::uint64_t sd,
                               WorkCounter& work)
    : scene(&s), task(&t), cfg(c), seed(sd) {
  robot.gripper = GripperModel::builtin(cfg.gripper);
  const TriMesh& mesh = (*s.catalog)[t.target_mesh].mesh;
  std::vector<GraspCandidate> all;
  try {
    all = sample_grasps_goal(t, mesh, robot.gripper, cfg.n_goal_grasps, mix_seed(seed, 11));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoVisibleSurface) throw;
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    const CollisionWorld carry = carry_world(s, t.container.slabs, all[i].relative);
    if (collision_free_ik(carry, robot, all[i].tcp, robot.chain.home(), ik_with_seed(cfg, mix_seed(seed, 100 + i)), &work))
      goal_grasps.push_back(all[i]);
  }
}

std::size_t representative_grasp(const std::vector<GraspCandidate>& grasps) {
  if (grasps.empty()) throw Error(ErrorCode::InvalidInput, "representative_grasp of an empty set");
  Vec3 mean = Vec3::Zero();
  for (const auto& g : grasps) mean += g.local_normal;
  std::size_t best = 0;
  double bd = -2.0;
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    const double d = mean.norm() > 1e-12 ? grasps[i].local_normal.dot(mean.normalized()) : 0.0;
    if (d > bd + 1e-12) {
      bd = d;
      best = i;
    }
  }
  return best;
}

namespace {

const std::optional<JointConfig>& cached_grasp_ik(const EpisodeContext& ctx, const CollisionWorld& pick,
                                                  const CollisionWorld& carry, const GraspCandidate& g,
                                                  std::size_t gi, GraspCache& cache, std::uint64_t seed,
                                                  WorkCounter& work) {
  if (!cache.ik[gi]) {
    auto q = collision_free_ik(pick, ctx.robot, g.tcp, ctx.robot.chain.home(), ik_with_seed(ctx.cfg, mix_seed(seed, gi)),
                               &work);
    if (q && !config_collision_free(carry, ctx.robot, *q, &work)) q.reset();
    cache.ik[gi] = q;
  }
  return *cache.ik[gi];
}

std::optional<std::vector<JointConfig>> lift_path(const EpisodeContext& ctx, const CollisionWorld& carry,
                                                  const JointConfig& q, const Pose& tcp, std::uint64_t seed,
                                                  WorkCounter& work) {
  for (double h : {0.1, 0.2, 0.3}) {
    Pose up = tcp;
    up.position.z() += h;
    auto p = cartesian_path(carry, ctx.robot, q, up, 0.01, ik_with_seed(ctx.cfg, seed), &work);
    if (p) return p;
  }
  return std::nullopt;
}

Trajectory join(const std::vector<JointConfig>& head, const Trajectory& tail, double step) {
  Trajectory t;
  t.configs = densify(head, step);
  t.raw_length = path_length(t.configs) + tail.raw_length;
  for (std::size_t i = 1; i < tail.configs.size(); ++i) t.configs.push_back(tail.configs[i]);
  t.planning_time_s = tail.planning_time_s;
  return t;
}

}  // namespace

std::optional<ReorientPlan> plan_reorientation(const EpisodeContext& ctx, const Pose& object_pose,
                                               const std::vector<GraspCandidate>& grasps, std::size_t gi,
                                               const Pose& reorient_pose, GraspCache& cache, std::uint64_t seed,
                                               WorkCounter& work, const Budget& budget) {
  if (budget.expired()) throw Error(ErrorCode::Timeout, "reorientation budget exhausted");
  const SceneState& scene = *ctx.scene;
  const auto& slabs = ctx.task->container.slabs;
  const GraspCandidate g = reanchor(grasps[gi], object_pose);
  const CollisionWorld pick = pick_world(scene, object_pose, slabs);
  const CollisionWorld carry = carry_world(scene, slabs, g.relative);
  const auto& q_grasp = cached_grasp_ik(ctx, pick, carry, g, gi, cache, seed, work);
  if (!q_grasp) return std::nullopt;

  const Pose release_tcp = reorient_pose * g.relative;
  const auto q_release =
      collision_free_ik(carry, ctx.robot, release_tcp, *q_grasp, ik_with_seed(ctx.cfg, mix_seed(seed, 7000 + gi)), &work);
  if (!q_release) return std::nullopt;

  if (!cache.lift[gi]) cache.lift[gi] = lift_path(ctx, carry, *q_grasp, g.tcp, mix_seed(seed, 8000 + gi), work);
  const auto& lift = *cache.lift[gi];
  if (!lift) return std::nullopt;

  try {
    if (!cache.approach[gi]) {
      PlanRequest a{ctx.robot.chain.home(), *q_grasp, budget.limit_s, mix_seed(seed, 9000 + gi)};
      try {
        cache.approach[gi] = rrt_connect(pick, ctx.robot, a, ctx.cfg.plan, &work, &budget);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Timeout) throw;
        cache.approach[gi] = std::optional<Trajectory>();
      }
    }
    if (!*cache.approach[gi]) return std::nullopt;
    PlanRequest t{lift->back(), *q_release, budget.limit_s, seed};
    const Trajectory transfer = rrt_connect(carry, ctx.robot, t, ctx.cfg.plan, &work, &budget);
    ReorientPlan plan;
    plan.approach = **cache.approach[gi];
    plan.reorient = join(*lift, transfer, ctx.cfg.plan.output_step);
    const Pose tcp = forward_kinematics(ctx.robot.chain, *q_release, ctx.robot.gripper.tcp_offset).tcp;
    plan.release_object = tcp * pose_inverse(g.relative);
    return plan;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Timeout) throw;
    return std::nullopt;
  }
}

namespace {

/// Index of a goal grasp with a collision-free IK (and, with `plan`, an
/// approach from home) on `object_pose`; nullopt when none.
std::optional<std::size_t> reachable_goal_grasp(const EpisodeContext& ctx, const Pose& object_pose, bool plan,
                                                std::uint64_t seed, WorkCounter& work, const Budget& budget) {
  const CollisionWorld pick = pick_world(*ctx.scene, object_pose, ctx.task->container.slabs);
  for (std::size_t i = 0; i < ctx.goal_grasps.size(); ++i) {
    if (budget.expired()) return std::nullopt;
    const GraspCandidate g = reanchor(ctx.goal_grasps[i], object_pose);
    if (g.normal.z() < -0.2) continue;
    const auto q = collision_free_ik(pick, ctx.robot, g.tcp, ctx.robot.chain.home(),
                                     ik_with_seed(ctx.cfg, mix_seed(seed, i)), &work);
    if (!q) continue;
    if (!plan) return i;
    try {
      PlanRequest r{ctx.robot.chain.home(), *q, budget.limit_s, mix_seed(seed, 500 + i)};
      rrt_connect(pick, ctx.robot, r, ctx.cfg.plan, &work, &budget);
      return i;
    } catch (const Error&) {
      if (budget.expired()) return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

int label_pickability(const EpisodeContext& ctx, const Pose& reorient_pose, std::uint64_t seed, WorkCounter& work) {
  const TriMesh& mesh = ctx.scene->target_entry().mesh;
  const SettleResult s = settle_on_plane(mesh, reorient_pose);
  if (!s.stable) return 0;
  const Budget budget = Budget::begin(work, ctx.cfg.label_budget_s);
  return reachable_goal_grasp(ctx, s.final_pose, true, seed, work, budget) ? 1 : 0;
}

WaypointLabel label_waypoints(const EpisodeContext& ctx, const std::vector<GraspCandidate>& grasps, std::size_t gi,
                              const Pose& reorient_pose, GraspCache& cache, std::uint64_t seed, WorkCounter& work) {
  WaypointLabel l;
  const SceneState& scene = *ctx.scene;
  const Pose& object_pose = scene.target.pose;
  const auto& slabs = ctx.task->container.slabs;
  const GraspCandidate g = reanchor(grasps[gi], object_pose);
  const CollisionWorld pick = pick_world(scene, object_pose, slabs);
  const CollisionWorld carry = carry_world(scene, slabs, g.relative);
  const auto& q_grasp = cached_grasp_ik(ctx, pick, carry, g, gi, cache, seed, work);
  l.v_grasp = q_grasp ? 1 : 0;
  const Pose release_tcp = reorient_pose * g.relative;
  const JointConfig seed_q = q_grasp ? *q_grasp : ctx.robot.chain.home();
  const auto q_release =
      collision_free_ik(carry, ctx.robot, release_tcp, seed_q, ik_with_seed(ctx.cfg, mix_seed(seed, 7000 + gi)), &work);
  l.v_reorient = q_release ? 1 : 0;
  if (!q_grasp || !q_release) return l;
  if (!cache.lift[gi]) cache.lift[gi] = lift_path(ctx, carry, *q_grasp, g.tcp, mix_seed(seed, 8000 + gi), work);
  const auto& lift = *cache.lift[gi];
  if (!lift) return l;
  const Budget budget = Budget::begin(work, ctx.cfg.label_budget_s);
  try {
    PlanRequest t{lift->back(), *q_release, budget.limit_s, seed};
    const Trajectory transfer = rrt_connect(carry, ctx.robot, t, ctx.cfg.plan, &work, &budget);
    l.v_traj = 1;
    l.length = join(*lift, transfer, ctx.cfg.plan.output_step).length();
  } catch (const Error&) {
  }
  return l;
}

std::string EpisodeResult::to_json() const {
  json j;
  j["policy"] = reorient::to_string(policy);
  j["direct"] = direct;
  j["reorient_success"] = reorient_success;
  j["place_success"] = place_success;
  j["overall_success"] = overall_success;
  j["auc"] = auc;
  j["planning_time_s"] = planning_time_s;
  j["planning_work_s"] = planning_work_s;
  j["execution_time_s"] = execution_time_s;
  j["trajectory_length_rad"] = trajectory_length;
  j["pairs_tried"] = pairs_tried;
  j["failure_stage"] = failure_stage;
  j["final_object"] = final_object.to_array();
  return j.dump();
}

namespace {

struct Stage3 {
  bool ok = false;
  double auc = 0.0;
  Pose final_object;
};

Stage3 place_stage(const EpisodeContext& ctx, const Pose& object_pose, std::uint64_t seed, WorkCounter& work,
                   EpisodeResult& r, const char* prefix) {
  Stage3 s;
  s.final_object = object_pose;
  const TriMesh& mesh = ctx.scene->target_entry().mesh;
  s.auc = placement_auc(mesh, object_pose, ctx.task->goal);
  if (ctx.goal_grasps.empty()) return s;
  const Budget budget = Budget::begin(work, ctx.cfg.stage_budget_s);
  PickPlaceInput in{ctx.scene, object_pose, ctx.task, ctx.robot.chain.home()};
  try {
    const PickPlacePlan plan = plan_pick_and_place(in, ctx.goal_grasps, ctx.robot, ctx.cfg.plan, seed, work, budget);
    const std::string p = prefix;
    r.stages.push_back({p + "approach", plan.approach});
    r.stages.push_back({p + "lift", plan.lift});
    r.stages.push_back({p + "transfer", plan.transfer});
    r.stages.push_back({p + "insert", plan.insert});
    s.final_object = plan.placed_object;
    s.auc = placement_auc(mesh, plan.placed_object, ctx.task->goal);
    s.ok = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllCandidatesFailed && e.code() != ErrorCode::Timeout) throw;
  }
  return s;
}

struct Candidate {
  std::size_t pose;
  std::size_t grasp;
};

/// Indices of the first occurrence of each distinct pose; distinct Euler
/// triples of the grid can give the same rotation.
std::vector<std::size_t> distinct_poses(const std::vector<Pose>& poses) {
  std::set<std::array<long long, 11>> seen;
  std::vector<std::size_t> out;
  auto q = [](double v) { return std::llround(v * 1e6); };
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Mat3 r = poses[i].orientation.matrix();
    const Vec3& p = poses[i].position;
    const std::array<long long, 11> key{q(p.x()),    q(p.y()),    q(r(0, 0)), q(r(0, 1)), q(r(0, 2)), q(r(1, 0)),
                                        q(r(1, 1)), q(r(1, 2)), q(r(2, 0)), q(r(2, 1)), q(r(2, 2))};
    if (seen.insert(key).second) out.push_back(i);
  }
  return out;
}

std::vector<Candidate> learned_candidates(const EpisodeContext& ctx, const Models& models,
                                          const std::vector<Pose>& poses, const std::vector<GraspCandidate>& grasps,
                                          WorkCounter& work) {
  if (!models.pickability || !models.waypoint)
    throw Error(ErrorCode::InvalidInput, "learned policy needs both trained models");
  const SceneState& scene = *ctx.scene;
  const Vec2 c = scene.heightmap.center();
  const auto hm = quantize_heightmap(scene.heightmap.data);
  const int cls = static_cast<int>(scene.target.mesh);
  const auto init = encode_pose(scene.target.pose, c);

  const EncodedContext pc = models.pickability->encode(*hm, cls, init);
  const GraspCandidate& rep = ctx.goal_grasps[representative_grasp(ctx.goal_grasps)];
  const auto distinct = distinct_poses(poses);
  std::vector<double> score(distinct.size());
  for (std::size_t k = 0; k < distinct.size(); ++k) {
    const Pose& p = poses[distinct[k]];
    score[k] = models.pickability->predict(pc, encode_pose(p, c), encode_pose(p * rep.relative, c)).pickable;
  }
  work.nn_evaluations += distinct.size();
  std::vector<std::size_t> top;
  for (std::size_t k : select_top_k(score, ctx.cfg.top_poses)) top.push_back(distinct[k]);

  const EncodedContext wc = models.waypoint->encode(*hm, cls, init);
  std::vector<Candidate> pairs;
  std::vector<double> v, len;
  for (std::size_t p : top) {
    const auto rp = encode_pose(poses[p], c);
    for (std::size_t g = 0; g < grasps.size(); ++g) {
      const ModelOutput o = models.waypoint->predict(wc, rp, encode_pose(grasps[g].tcp, c));
      pairs.push_back({p, g});
      v.push_back(o.v_traj);
      len.push_back(o.length);
    }
  }
  work.nn_evaluations += pairs.size();
  std::vector<Candidate> out;
  if (pairs.empty()) return out;
  for (std::size_t i : select_waypoints(v, len, ctx.cfg.top_pairs)) out.push_back(pairs[i]);
  return out;
}

EpisodeResult run_reorientation_episode(const EpisodeContext& ctx, Policy policy, const Models& models,
                                        WorkCounter& work) {
  EpisodeResult r;
  r.policy = policy;
  r.final_object = ctx.scene->target.pose;
  const SceneState& scene = *ctx.scene;
  const TriMesh& mesh = scene.target_entry().mesh;
  r.auc = placement_auc(mesh, scene.target.pose, ctx.task->goal);
  r.failure_stage = "reorient";
  if (ctx.goal_grasps.empty()) return r;

  const double wall0 = wall_now();
  const Budget budget = Budget::begin(work, ctx.cfg.stage_budget_s);
  std::optional<ReorientPlan> found;
  try {
    const auto grasps =
        sample_grasps_initial(scene, scene.target.pose, ctx.robot.gripper, ctx.cfg.n_initial_grasps, mix_seed(ctx.seed, 21));
    std::vector<Pose> poses;
    std::vector<Candidate> cands;
    if (policy == Policy::Learned) {
      poses = enumerate_reorient_poses(scene, mesh);
      cands = learned_candidates(ctx, models, poses, grasps, work);
    } else {
      poses = heuristic_reorient_poses(scene, *ctx.task, ctx.goal_grasps);
      for (std::size_t p = 0; p < poses.size(); ++p)
        for (std::size_t g = 0; g < grasps.size(); ++g) cands.push_back({p, g});
    }
    GraspCache cache(grasps.size());
    for (const Candidate& c : cands) {
      const double t0 = wall_now();
      ++r.pairs_tried;
      found = plan_reorientation(ctx, scene.target.pose, grasps, c.grasp, poses[c.pose], cache, mix_seed(ctx.seed, 31),
                                 work, budget);
      r.pair_planning_s.push_back(wall_now() - t0);
      if (found) break;
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Timeout) r.failure_stage = "plan-timeout";
    else if (e.code() != ErrorCode::NoVisibleSurface && e.code() != ErrorCode::NoFreePositions) throw;
  }
  r.planning_time_s = wall_now() - wall0;
  r.planning_work_s = budget.elapsed();
  if (!found) return r;

  r.stages.push_back({"approach", found->approach});
  r.stages.push_back({"reorient", found->reorient});
  r.trajectory_length = found->reorient.length();
  r.execution_time_s = execute_kinematic(found->reorient, ctx.robot).time_s;
  const SettleResult settled = settle_on_plane(mesh, found->release_object);
  r.final_object = settled.final_pose;
  const Budget check = Budget::begin(work, ctx.cfg.stage_budget_s);
  r.reorient_success =
      settled.stable && reachable_goal_grasp(ctx, settled.final_pose, false, mix_seed(ctx.seed, 41), work, check).has_value();
  if (!r.reorient_success) return r;

  const Stage3 s = place_stage(ctx, settled.final_pose, mix_seed(ctx.seed, 51), work, r, "place_");
  r.final_object = s.final_object;
  r.auc = s.auc;
  r.place_success = s.ok && s.auc > ctx.cfg.auc_threshold;
  r.overall_success = r.reorient_success && r.place_success;
  r.failure_stage = r.overall_success ? "" : "place";
  return r;
}

}  // namespace

EpisodeResult run_episode(const SceneState& scene, const TaskSpec& task, Policy policy, const Models& models,
                          std::uint64_t seed, const PipelineConfig& cfg) {
  WorkCounter work;
  const EpisodeContext ctx(scene, task, cfg, seed, work);
  EpisodeResult direct;
  direct.policy = policy;
  const Stage3 s = place_stage(ctx, scene.target.pose, mix_seed(seed, 1), work, direct, "");
  if (s.ok && s.auc > cfg.auc_threshold) {
    direct.direct = true;
    direct.reorient_success = true;
    direct.place_success = true;
    direct.overall_success = true;
    direct.auc = s.auc;
    direct.final_object = s.final_object;
    return direct;
  }
  return run_reorientation_episode(ctx, policy, models, work);
}

bool direct_placement_succeeds(const SceneState& scene, const TaskSpec& task, std::uint64_t seed,
                               const PipelineConfig& cfg) {
  WorkCounter work;
  const EpisodeContext ctx(scene, task, cfg, seed, work);
  EpisodeResult r;
  const Stage3 s = place_stage(ctx, scene.target.pose, mix_seed(seed, 1), work, r, "");
  return s.ok && s.auc > cfg.auc_threshold;
}

TaskInstance make_task(std::uint64_t seed, const PipelineConfig& cfg) {
  const MeshCatalog& catalog = MeshCatalog::standard();
  for (int attempt = 0; attempt < 20; ++attempt) {
    try {
      TaskInstance t;
      t.seed = seed;
      t.scene = generate_pile(catalog, cfg.n_objects, mix_seed(seed, 2 * attempt), cfg.pile);
      t.task = random_task(catalog, t.scene.target.mesh, cfg.container, mix_seed(seed, 2 * attempt + 1), cfg.shelf,
                           cfg.box);
      return t;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PlacementFailure) throw;
    }
  }
  throw Error(ErrorCode::PlacementFailure, "no valid task for seed " + std::to_string(seed));
}

std::vector<DatasetRecord> balance_records(std::vector<DatasetRecord> records, double ratio, std::uint64_t seed) {
  auto label = [](const DatasetRecord& r) { return r.kind == ModelKind::Pickability ? r.pickable : r.v_traj; };
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < records.size(); ++i) (label(records[i]) ? pos : neg).push_back(i);
  std::vector<std::size_t>& major = pos.size() > neg.size() ? pos : neg;
  const std::size_t minor = std::min(pos.size(), neg.size());
  const std::size_t cap = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(minor)));
  if (minor == 0 || major.size() <= cap) return records;
  Rng rng(mix_seed(seed, 0xba1));
  for (std::size_t i = major.size(); i > 1; --i) std::swap(major[i - 1], major[rng.index(i)]);
  std::vector<bool> keep(records.size(), true);
  for (std::size_t i = cap; i < major.size(); ++i) keep[major[i]] = false;
  std::vector<DatasetRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(std::move(records[i]));
  return out;
}

std::vector<DatasetRecord> generate_dataset(ModelKind kind, int n_episodes, std::uint64_t seed,
                                            const PipelineConfig& cfg) {
  if (n_episodes < 0) throw Error(ErrorCode::InvalidInput, "episode count must be >= 0");
  std::vector<DatasetRecord> out;
  const int n_classes = static_cast<int>(MeshCatalog::standard().size());
  for (int e = 0; e < n_episodes; ++e) {
    const std::uint64_t es = mix_seed(seed, static_cast<std::uint64_t>(e));
    const TaskInstance inst = make_task(es, cfg);
    WorkCounter work;
    const EpisodeContext ctx(inst.scene, inst.task, cfg, es, work);
    if (ctx.goal_grasps.empty()) continue;
    const SceneState& scene = inst.scene;
    const TriMesh& mesh = scene.target_entry().mesh;
    std::vector<Pose> poses;
    try {
      poses = enumerate_reorient_poses(scene, mesh);
    } catch (const Error& err) {
      if (err.code() == ErrorCode::NoFreePositions) continue;
      throw;
    }
    const Vec2 c = scene.heightmap.center();
    DatasetRecord base;
    base.kind = kind;
    base.heightmap = quantize_heightmap(scene.heightmap.data);
    base.object_class = static_cast<int>(scene.target.mesh);
    base.n_classes = n_classes;
    base.initial = encode_pose(scene.target.pose, c);
    Rng rng(mix_seed(es, 61));
    if (kind == ModelKind::Pickability) {
      const GraspCandidate& rep = ctx.goal_grasps[representative_grasp(ctx.goal_grasps)];
      for (int k = 0; k < cfg.label_poses_per_episode; ++k) {
        const Pose& p = poses[rng.index(poses.size())];
        DatasetRecord r = base;
        r.reorient = encode_pose(p, c);
        r.grasp = encode_pose(p * rep.relative, c);
        r.pickable = label_pickability(ctx, p, mix_seed(es, 1000 + k), work);
        out.push_back(std::move(r));
      }
    } else {
      std::vector<GraspCandidate> grasps;
      try {
        grasps = sample_grasps_initial(scene, scene.target.pose, ctx.robot.gripper, cfg.n_initial_grasps,
                                       mix_seed(es, 21));
      } catch (const Error& err) {
        if (err.code() == ErrorCode::NoVisibleSurface) continue;
        throw;
      }
      GraspCache cache(grasps.size());
      for (int k = 0; k < cfg.label_pairs_per_episode; ++k) {
        const Pose& p = poses[rng.index(poses.size())];
        const std::size_t g = rng.index(grasps.size());
        const WaypointLabel l = label_waypoints(ctx, grasps, g, p, cache, mix_seed(es, 2000 + k), work);
        DatasetRecord r = base;
        r.reorient = encode_pose(p, c);
        r.grasp = encode_pose(grasps[g].tcp, c);
        r.v_grasp = l.v_grasp;
        r.v_reorient = l.v_reorient;
        r.v_traj = l.v_traj;
        r.length = l.length;
        out.push_back(std::move(r));
      }
    }
  }
  return balance_records(std::move(out), cfg.balance_ratio, seed);
}

BenchmarkReport summarize(std::vector<std::uint64_t> seeds, std::vector<EpisodeResult> learned,
                          std::vector<EpisodeResult> heuristic) {
  BenchmarkReport rep;
  rep.task_seeds = std::move(seeds);
  rep.learned = std::move(learned);
  rep.heuristic = std::move(heuristic);
  auto tally = [](const std::vector<EpisodeResult>& rs) {
    PolicySummary s;
    s.tasks = static_cast<int>(rs.size());
    for (const auto& r : rs) {
      s.reorient_success += r.reorient_success;
      s.place_success += r.place_success;
      s.overall_success += r.overall_success;
    }
    return s;
  };
  rep.learned_summary = tally(rep.learned);
  rep.heuristic_summary = tally(rep.heuristic);
  const std::size_t n = std::min(rep.learned.size(), rep.heuristic.size());
  for (std::size_t i = 0; i < n; ++i)
    if (rep.learned[i].overall_success && rep.heuristic[i].overall_success) rep.co_success.push_back(i);
  if (!rep.co_success.empty()) {
    const double k = static_cast<double>(rep.co_success.size());
    for (std::size_t i : rep.co_success) {
      rep.learned_planning_s += rep.learned[i].planning_work_s / k;
      rep.heuristic_planning_s += rep.heuristic[i].planning_work_s / k;
      rep.learned_execution_s += rep.learned[i].execution_time_s / k;
      rep.heuristic_execution_s += rep.heuristic[i].execution_time_s / k;
      rep.learned_length += rep.learned[i].trajectory_length / k;
      rep.heuristic_length += rep.heuristic[i].trajectory_length / k;
    }
  }
  return rep;
}

BenchmarkReport evaluate_benchmark(const BenchmarkConfig& bench, const Models& models, const PipelineConfig& cfg,
                                   const std::function<void(const std::string&)>& progress) {
  std::vector<std::uint64_t> seeds;
  std::vector<EpisodeResult> learned, heuristic;
  for (int s = 0; s < bench.max_scan && static_cast<int>(seeds.size()) < bench.n_tasks; ++s) {
    const std::uint64_t ts = mix_seed(bench.seed, static_cast<std::uint64_t>(s));
    const TaskInstance inst = make_task(ts, cfg);
    WorkCounter work;
    const EpisodeContext ctx(inst.scene, inst.task, cfg, ts, work);
    if (ctx.goal_grasps.empty()) continue;
    EpisodeResult scratch;
    const Stage3 direct = place_stage(ctx, inst.scene.target.pose, mix_seed(ts, 1), work, scratch, "");
    if (direct.ok && direct.auc > cfg.auc_threshold) continue;
    seeds.push_back(ts);
    for (Policy p : {Policy::Learned, Policy::Heuristic}) {
      WorkCounter w;
      EpisodeResult r = run_reorientation_episode(ctx, p, models, w);
      if (progress) {
        std::ostringstream line;
        line << "task " << seeds.size() << " seed " << ts << " " << to_string(p) << " overall "
             << r.overall_success << " pairs " << r.pairs_tried << " plan_wall " << r.planning_time_s;
        progress(line.str());
      }
      (p == Policy::Learned ? learned : heuristic).push_back(std::move(r));
    }
  }
  return summarize(std::move(seeds), std::move(learned), std::move(heuristic));
}

std::string BenchmarkReport::to_json() const {
  auto pct = [](int k, int n) { return n > 0 ? 100.0 * k / n : 0.0; };
  auto table1 = [&](const PolicySummary& s) {
    return json{{"tasks", s.tasks},
                {"success_reorient_pct", pct(s.reorient_success, s.tasks)},
                {"success_place_pct", pct(s.place_success, s.tasks)},
                {"success_overall_pct", pct(s.overall_success, s.tasks)}};
  };
  auto episodes = [](const std::vector<EpisodeResult>& rs) {
    json a = json::array();
    for (const auto& r : rs)
      a.push_back({{"reorient_success", r.reorient_success},
                   {"place_success", r.place_success},
                   {"overall_success", r.overall_success},
                   {"auc", r.auc},
                   {"planning_work_s", r.planning_work_s},
                   {"execution_time_s", r.execution_time_s},
                   {"trajectory_length_rad", r.trajectory_length},
                   {"pairs_tried", r.pairs_tried},
                   {"failure_stage", r.failure_stage}});
    return a;
  };
  json j;
  j["n_tasks"] = task_seeds.size();
  j["task_seeds"] = task_seeds;
  j["table1"] = {{"learned", table1(learned_summary)}, {"heuristic", table1(heuristic_summary)}};
  j["table2"] = {{"co_success_tasks", co_success.size()},
                 {"learned",
                  {{"planning_time_s", learned_planning_s},
                   {"execution_time_s", learned_execution_s},
                   {"trajectory_length_rad", learned_length}}},
                 {"heuristic",
                  {{"planning_time_s", heuristic_planning_s},
                   {"execution_time_s", heuristic_execution_s},
                   {"trajectory_length_rad", heuristic_length}}}};
  j["episodes"] = {{"learned", episodes(learned)}, {"heuristic", episodes(heuristic)}};
  return j.dump(2);
}

namespace {

json pose_json(const Pose& p) { return p.to_array(); }

Pose pose_of(const json& j) {
  const auto a = j.get<std::vector<double>>();
  if (a.size() != 7) throw Error(ErrorCode::InvalidInput, "pose needs 7 numbers");
  return Pose::from_array(a);
}

Vec2 vec2_of(const json& j) {
  const auto a = j.get<std::vector<double>>();
  if (a.size() != 2) throw Error(ErrorCode::InvalidInput, "expected 2 numbers");
  return {a[0], a[1]};
}

Vec3 vec3_of(const json& j) {
  const auto a = j.get<std::vector<double>>();
  if (a.size() != 3) throw Error(ErrorCode::InvalidInput, "expected 3 numbers");
  return {a[0], a[1], a[2]};
}

template <class F>
auto parse_guard(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, e.what());
  }
}

}  // namespace

std::string scene_to_json(const SceneState& scene) {
  const MeshCatalog& cat = *scene.catalog;
  json j;
  j["heightmap"] = {{"center", {scene.heightmap.center().x(), scene.heightmap.center().y()}},
                    {"size", scene.heightmap.resolution * scene.heightmap.width},
                    {"cells", scene.heightmap.width}};
  j["region"] = {{"min", {scene.region.min.x(), scene.region.min.y()}},
                 {"max", {scene.region.max.x(), scene.region.max.y()}},
                 {"nx", scene.region.nx},
                 {"ny", scene.region.ny}};
  j["target"] = {{"mesh", cat[scene.target.mesh].id}, {"pose", pose_json(scene.target.pose)}};
  j["distractors"] = json::array();
  for (const auto& d : scene.distractors) j["distractors"].push_back({{"mesh", cat[d.mesh].id}, {"pose", pose_json(d.pose)}});
  return j.dump(2);
}

SceneState scene_from_json(const std::string& text, const MeshCatalog& catalog) {
  return parse_guard([&] {
    const json j = json::parse(text);
    SceneState s;
    s.catalog = &catalog;
    const json& h = j.at("heightmap");
    s.heightmap = Heightmap::empty(vec2_of(h.at("center")), h.at("size").get<double>(), h.at("cells").get<int>());
    const json& r = j.at("region");
    s.region = {vec2_of(r.at("min")), vec2_of(r.at("max")), r.at("nx").get<int>(), r.at("ny").get<int>()};
    s.target = {catalog.index_of(j.at("target").at("mesh").get<std::string>()), pose_of(j.at("target").at("pose"))};
    for (const json& d : j.at("distractors"))
      s.distractors.push_back({catalog.index_of(d.at("mesh").get<std::string>()), pose_of(d.at("pose"))});
    s.heightmap = s.rasterize();
    return s;
  });
}

std::string task_to_json(const TaskSpec& task) {
  json j;
  j["target_mesh"] = MeshCatalog::standard()[task.target_mesh].id;
  j["goal"] = pose_json(task.goal);
  j["container"] = {{"kind", to_string(task.container.kind)}, {"slabs", json::array()}};
  for (const Slab& s : task.container.slabs)
    j["container"]["slabs"].push_back({{"min", {s.min.x(), s.min.y(), s.min.z()}}, {"max", {s.max.x(), s.max.y(), s.max.z()}}});
  return j.dump(2);
}

TaskSpec task_from_json(const std::string& text) {
  return parse_guard([&] {
    const json j = json::parse(text);
    TaskSpec t;
    t.target_mesh = MeshCatalog::standard().index_of(j.at("target_mesh").get<std::string>());
    t.goal = pose_of(j.at("goal"));
    t.container.kind = parse_container_kind(j.at("container").at("kind").get<std::string>());
    for (const json& s : j.at("container").at("slabs")) t.container.slabs.push_back({vec3_of(s.at("min")), vec3_of(s.at("max"))});
    return t;
  });
}

std::string scene_to_obj(const SceneState& scene, const TaskSpec* task, const Pose* target_pose) {
  std::ostringstream out;
  int offset = 0;
  auto emit = [&](const std::string& name, const TriMesh& mesh, const Pose& pose) {
    out << "o " << name << '\n' << to_obj(mesh, pose, offset);
    offset += static_cast<int>(mesh.vertices().size());
  };
  const MeshCatalog& cat = *scene.catalog;
  emit("target", scene.target_entry().mesh, target_pose ? *target_pose : scene.target.pose);
  for (std::size_t i = 0; i < scene.distractors.size(); ++i)
    emit("distractor_" + std::to_string(i), cat[scene.distractors[i].mesh].mesh, scene.distractors[i].pose);
  if (task) {
    for (std::size_t i = 0; i < task->container.slabs.size(); ++i) {
      const Slab& s = task->container.slabs[i];
      const Vec3 e = s.max - s.min;
      emit("slab_" + std::to_string(i), make_box(e.x(), e.y(), e.z()), {0.5 * (s.min + s.max), UnitQuat::identity()});
    }
  }
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  f << text;
  if (!f) throw Error(ErrorCode::Io, "write failed: " + path);
}

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; }))
      throw Error(ErrorCode::InvalidInput, "unknown config key '" + where + "." + k + "'");
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  return parse_guard([&] {
    const json j = json::parse(text);
    PipelineConfig c;
    check_keys(j,
               {"gripper", "container", "n_objects", "n_initial_grasps", "n_goal_grasps", "stage_budget_s",
                "label_budget_s", "auc_threshold", "top_poses", "top_pairs", "label_poses_per_episode",
                "label_pairs_per_episode", "balance_ratio", "plan", "pile", "train"},
               "config");
    if (j.contains("gripper")) c.gripper = parse_gripper_shape(j.at("gripper").get<std::string>());
    if (j.contains("container")) c.container = parse_container_kind(j.at("container").get<std::string>());
    read_field(j, "n_objects", c.n_objects);
    read_field(j, "n_initial_grasps", c.n_initial_grasps);
    read_field(j, "n_goal_grasps", c.n_goal_grasps);
    read_field(j, "stage_budget_s", c.stage_budget_s);
    read_field(j, "label_budget_s", c.label_budget_s);
    read_field(j, "auc_threshold", c.auc_threshold);
    read_field(j, "top_poses", c.top_poses);
    read_field(j, "top_pairs", c.top_pairs);
    read_field(j, "label_poses_per_episode", c.label_poses_per_episode);
    read_field(j, "label_pairs_per_episode", c.label_pairs_per_episode);
    read_field(j, "balance_ratio", c.balance_ratio);
    if (j.contains("plan")) {
      const json& p = j.at("plan");
      check_keys(p, {"extend_step", "validate_step", "output_step", "goal_ik_solutions", "smoothing_attempts",
                     "ik_restarts", "ik_iterations"},
                 "plan");
      read_field(p, "extend_step", c.plan.extend_step);
      read_field(p, "validate_step", c.plan.validate_step);
      read_field(p, "output_step", c.plan.output_step);
      read_field(p, "goal_ik_solutions", c.plan.goal_ik_solutions);
      read_field(p, "smoothing_attempts", c.plan.smoothing_attempts);
      read_field(p, "ik_restarts", c.plan.ik.restarts);
      read_field(p, "ik_iterations", c.plan.ik.iterations);
    }
    if (j.contains("pile")) {
      const json& p = j.at("pile");
      check_keys(p, {"spread", "max_rejections"}, "pile");
      read_field(p, "spread", c.pile.spread);
      read_field(p, "max_rejections", c.pile.max_rejections);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      check_keys(t, {"lr", "batch_size", "epochs", "patience", "min_delta", "heightmaps_per_batch", "seed"}, "train");
      read_field(t, "lr", c.train.lr);
      read_field(t, "batch_size", c.train.batch_size);
      read_field(t, "epochs", c.train.epochs);
      read_field(t, "patience", c.train.patience);
      read_field(t, "min_delta", c.train.min_delta);
      read_field(t, "heightmaps_per_batch", c.train.heightmaps_per_batch);
      read_field(t, "seed", c.train.seed);
    }
    if (!(c.stage_budget_s > 0.0) || !(c.label_budget_s > 0.0))
      throw Error(ErrorCode::InvalidInput, "planning budgets must be > 0");
    if (c.top_poses < 1 || c.top_pairs < 1) throw Error(ErrorCode::InvalidInput, "top-k sizes must be >= 1");
    return c;
  });
}

PipelineConfig PipelineConfig::load(const std::string& path) { return from_json(read_file(path)); }

std::string PipelineConfig::to_json() const {
  json j;
  j["gripper"] = reorient::to_string(gripper);
  j["container"] = reorient::to_string(container);
  j["n_objects"] = n_objects;
  j["n_initial_grasps"] = n_initial_grasps;
  j["n_goal_grasps"] = n_goal_grasps;
  j["stage_budget_s"] = stage_budget_s;
  j["label_budget_s"] = label_budget_s;
  j["auc_threshold"] = auc_threshold;
  j["top_poses"] = top_poses;
  j["top_pairs"] = top_pairs;
  j["label_poses_per_episode"] = label_poses_per_episode;
  j["label_pairs_per_episode"] = label_pairs_per_episode;
  j["balance_ratio"] = balance_ratio;
  j["plan"] = {{"extend_step", plan.extend_step},
               {"validate_step", plan.validate_step},
               {"output_step", plan.output_step},
               {"goal_ik_solutions", plan.goal_ik_solutions},
               {"smoothing_attempts", plan.smoothing_attempts},
               {"ik_restarts", plan.ik.restarts},
               {"ik_iterations", plan.ik.iterations}};
  j["pile"] = {{"spread", pile.spread}, {"max_rejections", pile.max_rejections}};
  j["train"] = {{"lr", train.lr},
                {"batch_size", train.batch_size},
                {"epochs", train.epochs},
                {"patience", train.patience},
                {"min_delta", train.min_delta},
                {"heightmaps_per_batch", train.heightmaps_per_batch},
                {"seed", train.seed}};
  return j.dump(2);
}

}  // namespace reorient
