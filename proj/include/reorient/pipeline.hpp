#pragma once

#include "reorient/learn.hpp"
#include "reorient/planner.hpp"
#include "reorient/sampling.hpp"
#include "reorient/settle.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace reorient {

enum class Policy { Learned, Heuristic };
Policy parse_policy(const std::string& s);
const char* to_string(Policy p);

struct PipelineConfig {
  GripperShape gripper = GripperShape::L;
  ContainerKind container = ContainerKind::Shelf;
  int n_objects = 5;
  int n_initial_grasps = 30;
  int n_goal_grasps = 30;
  double stage_budget_s = 10.0;   // work clock, per planning stage
  double label_budget_s = 2.0;    // work clock, per oracle label
  double auc_threshold = 0.9;
  std::size_t top_poses = 1000;
  std::size_t top_pairs = 10;
  int label_poses_per_episode = 80;
  int label_pairs_per_episode = 80;
  double balance_ratio = 3.0;
  PlanOptions plan;
  PileOptions pile;
  ShelfLayout shelf;
  BoxLayout box;
  TrainConfig train;

  /// Keys mirror the field names; unknown keys throw InvalidInput.
  static PipelineConfig from_json(const std::string& text);
  static PipelineConfig load(const std::string& path);
  std::string to_json() const;
};

inline constexpr double kAucMaxDistance = 0.10;

/// max(0, 1 - d / 0.1) with d the mean vertex distance between the two poses.
double placement_auc(const TriMesh& mesh, const Pose& placed, const Pose& goal);

struct Models {
  const SurrogateModel* pickability = nullptr;
  const SurrogateModel* waypoint = nullptr;
};

/// Per-episode planning context: scene, task, robot and the goal-side grasps
/// that admit a collision-free IK at the goal pose.
struct EpisodeContext {
  const SceneState* scene = nullptr;
  const TaskSpec* task = nullptr;
  Robot robot;
  PipelineConfig cfg;
  std::vector<GraspCandidate> goal_grasps;  // object-relative, placeable
  std::uint64_t seed = 0;

  EpisodeContext(const SceneState& scene, const TaskSpec& task, const PipelineConfig& cfg, std::uint64_t seed,
                 WorkCounter& work);
};

struct ReorientPlan {
  Trajectory approach;  // home -> grasp
  Trajectory reorient;  // grasp -> release (lift + transfer)
  Pose release_object;  // object pose when released
};

/// Memoized grasp-side work shared across reorientation pairs of one grasp.
struct GraspCache {
  std::vector<std::optional<std::optional<JointConfig>>> ik;      // outer: computed
  std::vector<std::optional<std::optional<Trajectory>>> approach;  // outer: computed
  std::vector<std::optional<std::optional<std::vector<JointConfig>>>> lift;
  explicit GraspCache(std::size_t n = 0) : ik(n), approach(n), lift(n) {}
};

/// Plans grasp -> lift -> release for `grasp` (on `object_pose`) and the
/// reorientation pose. nullopt on failure; throws Timeout when `budget` runs out.
std::optional<ReorientPlan> plan_reorientation(const EpisodeContext& ctx, const Pose& object_pose,
                                               const std::vector<GraspCandidate>& grasps, std::size_t grasp,
                                               const Pose& reorient_pose, GraspCache& cache, std::uint64_t seed,
                                               WorkCounter& work, const Budget& budget);

/// 1 iff, after settling from `reorient_pose`, some goal grasp admits a
/// collision-free IK and an approach plan from home within the label budget.
int label_pickability(const EpisodeContext& ctx, const Pose& reorient_pose, std::uint64_t seed, WorkCounter& work);

struct WaypointLabel {
  int v_grasp = 0;
  int v_reorient = 0;
  int v_traj = 0;
  double length = 0.0;
};

WaypointLabel label_waypoints(const EpisodeContext& ctx, const std::vector<GraspCandidate>& initial_grasps,
                              std::size_t grasp, const Pose& reorient_pose, GraspCache& cache, std::uint64_t seed,
                              WorkCounter& work);

/// Goal grasp whose object-frame normal is closest to the mean normal.
std::size_t representative_grasp(const std::vector<GraspCandidate>& grasps);

struct StageTrajectory {
  std::string name;
  Trajectory trajectory;
};

struct EpisodeResult {
  Policy policy = Policy::Heuristic;
  bool direct = false;  // solved without reorientation
  bool reorient_success = false;
  bool place_success = false;
  bool overall_success = false;
  double auc = 0.0;
  double planning_time_s = 0.0;       // wall clock, reorientation stage
  double planning_work_s = 0.0;       // work clock, reorientation stage
  double execution_time_s = 0.0;      // simulated, reorientation trajectory
  double trajectory_length = 0.0;     // rad, reorientation trajectory
  int pairs_tried = 0;
  std::vector<double> pair_planning_s;  // wall clock per attempted pair
  std::string failure_stage;            // "", "reorient", "place", "plan-timeout"
  Pose final_object;
  std::vector<StageTrajectory> stages;

  std::string to_json() const;
};

/// Direct placement, else reorientation by `policy` then placement from the
/// settled pose. Failures are reported in the result, not thrown.
EpisodeResult run_episode(const SceneState& scene, const TaskSpec& task, Policy policy, const Models& models,
                          std::uint64_t seed, const PipelineConfig& cfg = {});

/// True iff plan_pick_and_place succeeds from the initial pose.
bool direct_placement_succeeds(const SceneState& scene, const TaskSpec& task, std::uint64_t seed,
                               const PipelineConfig& cfg = {});

struct TaskInstance {
  SceneState scene;
  TaskSpec task;
  std::uint64_t seed = 0;
};

/// Seeded pile + random container goal for the pile's target.
TaskInstance make_task(std::uint64_t seed, const PipelineConfig& cfg = {});

/// Labeled records from `n_episodes` seeded episodes, balanced to at most
/// `balance_ratio` : 1 between classes.
std::vector<DatasetRecord> generate_dataset(ModelKind kind, int n_episodes, std::uint64_t seed,
                                            const PipelineConfig& cfg = {});
/// Caps the majority class (pickable or v_traj) at ratio x minority, seeded.
std::vector<DatasetRecord> balance_records(std::vector<DatasetRecord> records, double ratio, std::uint64_t seed);

struct BenchmarkConfig {
  int n_tasks = 50;
  std::uint64_t seed = 0;
  int max_scan = 2000;  // task seeds scanned for reorientation-only tasks
};

struct PolicySummary {
  int tasks = 0;
  int reorient_success = 0;
  int place_success = 0;
  int overall_success = 0;
};

struct BenchmarkReport {
  std::vector<std::uint64_t> task_seeds;
  std::vector<EpisodeResult> learned;
  std::vector<EpisodeResult> heuristic;
  PolicySummary learned_summary, heuristic_summary;
  std::vector<std::size_t> co_success;
  // Means over co-success tasks; planning time on the work clock.
  double learned_planning_s = 0.0, heuristic_planning_s = 0.0;
  double learned_execution_s = 0.0, heuristic_execution_s = 0.0;
  double learned_length = 0.0, heuristic_length = 0.0;

  /// Deterministic: carries only work-clock times.
  std::string to_json() const;
};

/// Scans seeded tasks, keeps those where direct placement fails, and runs both
/// policies on each. `progress` (optional) receives one line per task.
BenchmarkReport evaluate_benchmark(const BenchmarkConfig& bench, const Models& models, const PipelineConfig& cfg = {},
                                   const std::function<void(const std::string&)>& progress = {});
/// Aggregates already-run episodes.
BenchmarkReport summarize(std::vector<std::uint64_t> seeds, std::vector<EpisodeResult> learned,
                          std::vector<EpisodeResult> heuristic);

std::string scene_to_json(const SceneState& scene);
SceneState scene_from_json(const std::string& text, const MeshCatalog& catalog = MeshCatalog::standard());
std::string task_to_json(const TaskSpec& task);
TaskSpec task_from_json(const std::string& text);
/// Distractors, target and container slabs as one OBJ.
std::string scene_to_obj(const SceneState& scene, const TaskSpec* task = nullptr, const Pose* target_pose = nullptr);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace reorient
