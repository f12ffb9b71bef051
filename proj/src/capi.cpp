#include "reorient/reorient.h"

#include "reorient/error.hpp"
#include "reorient/pipeline.hpp"

#include "json.hpp"

#include <cstring>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

using nlohmann::json;
using namespace reorient;

struct rb_context {
  PipelineConfig cfg;
  std::string last_error;
};

namespace {

rb_status status_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidInput:
    case ErrorCode::Io:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::EmptyDataset:
    case ErrorCode::DofMismatch:
      return RB_INVALID_INPUT;
    case ErrorCode::EpisodeFailure:
      return RB_EPISODE_FAILED;
    default:
      return RB_ERROR;
  }
}

template <class F>
rb_status guarded(rb_context* ctx, F&& f) {
  if (!ctx) return RB_INVALID_INPUT;
  ctx->last_error.clear();
  try {
    return f();
  } catch (const Error& e) {
    ctx->last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    ctx->last_error = std::string("InvalidInput: ") + e.what();
    return RB_INVALID_INPUT;
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return RB_ERROR;
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

std::string need(const char* s, const char* what) {
  if (!s || !*s) throw Error(ErrorCode::InvalidInput, std::string(what) + " is required");
  return s;
}

std::filesystem::path weight_file(const std::string& dir, ModelKind k) {
  return std::filesystem::path(dir) / (std::string(to_string(k)) + ".json");
}

struct LoadedModels {
  std::optional<SurrogateModel> pickability, waypoint;
  Models view() const { return {pickability ? &*pickability : nullptr, waypoint ? &*waypoint : nullptr}; }
};

LoadedModels load_models(const char* dir) {
  LoadedModels m;
  const std::string d = need(dir, "weights directory");
  m.pickability = SurrogateModel::load(weight_file(d, ModelKind::Pickability).string());
  m.waypoint = SurrogateModel::load(weight_file(d, ModelKind::Waypoint).string());
  if (m.pickability->kind() != ModelKind::Pickability || m.waypoint->kind() != ModelKind::Waypoint)
    throw Error(ErrorCode::InvalidInput, "weights directory holds models of the wrong kind");
  return m;
}

}  // namespace

extern "C" {

rb_status rb_context_create(const char* config_json, rb_context** out) {
  if (!out) return RB_INVALID_INPUT;
  *out = nullptr;
  auto ctx = std::make_unique<rb_context>();
  try {
    if (config_json && *config_json) ctx->cfg = PipelineConfig::from_json(config_json);
  } catch (const Error& e) {
    return status_of(e.code());
  } catch (const std::exception&) {
    return RB_INVALID_INPUT;
  }
  *out = ctx.release();
  return RB_OK;
}

void rb_context_destroy(rb_context* ctx) { delete ctx; }

const char* rb_last_error(const rb_context* ctx) { return ctx ? ctx->last_error.c_str() : "null context"; }

void rb_string_free(char* s) { delete[] s; }

rb_status rb_make_task(rb_context* ctx, uint64_t seed, const char* scene_path, const char* task_path) {
  return guarded(ctx, [&] {
    const TaskInstance t = make_task(seed, ctx->cfg);
    write_file(need(scene_path, "scene path"), scene_to_json(t.scene));
    write_file(need(task_path, "task path"), task_to_json(t.task));
    return RB_OK;
  });
}

rb_status rb_generate_dataset(rb_context* ctx, const char* kind, int episodes, uint64_t seed, const char* out_path,
                              size_t* n_records) {
  return guarded(ctx, [&] {
    const ModelKind k = parse_model_kind(need(kind, "kind"));
    if (episodes < 1) throw Error(ErrorCode::InvalidInput, "episodes must be positive");
    const auto records = generate_dataset(k, episodes, seed, ctx->cfg);
    save_dataset(need(out_path, "output path"), records);
    if (n_records) *n_records = records.size();
    return RB_OK;
  });
}

rb_status rb_train(rb_context* ctx, const char* kind, const char* data_path, double lr, int epochs, uint64_t seed,
                   const char* out_path, char** report_json) {
  return guarded(ctx, [&] {
    const ModelKind k = parse_model_kind(need(kind, "kind"));
    const std::string out = need(out_path, "output path");
    const auto data = load_dataset(need(data_path, "data path"));
    TrainConfig tc = ctx->cfg.train;
    if (lr > 0.0) tc.lr = lr;
    if (epochs > 0) tc.epochs = epochs;
    tc.seed = seed;
    TrainReport rep;
    const SurrogateModel m = train(k, data, tc, &rep);
    m.save(out);
    put(report_json, json{{"train_loss", rep.train_loss},
                          {"val_loss", rep.val_loss},
                          {"best_epoch", rep.best_epoch},
                          {"n_train", rep.n_train},
                          {"n_val", rep.n_val}}
                         .dump());
    return RB_OK;
  });
}

rb_status rb_run_episode(rb_context* ctx, const char* scene_path, const char* task_path, const char* policy,
                         const char* weights_dir, const char* export_dir, uint64_t seed, char** result_json) {
  return guarded(ctx, [&] {
    const SceneState scene = scene_from_json(read_file(need(scene_path, "scene path")));
    const TaskSpec task = task_from_json(read_file(need(task_path, "task path")));
    if (task.target_mesh != scene.target.mesh)
      throw Error(ErrorCode::InvalidInput, "task target does not match the scene target");
    const Policy p = parse_policy(need(policy, "policy"));
    LoadedModels models;
    if (p == Policy::Learned) models = load_models(weights_dir);
    const EpisodeResult r = run_episode(scene, task, p, models.view(), seed, ctx->cfg);
    if (export_dir && *export_dir) {
      const std::filesystem::path dir(export_dir);
      std::filesystem::create_directories(dir);
      write_file((dir / "scene_initial.obj").string(), scene_to_obj(scene, &task));
      write_file((dir / "scene_final.obj").string(), scene_to_obj(scene, &task, &r.final_object));
      for (std::size_t i = 0; i < r.stages.size(); ++i)
        write_file((dir / (std::to_string(i) + "_" + r.stages[i].name + ".json")).string(),
                   trajectory_to_json(r.stages[i].trajectory));
      write_file((dir / "result.json").string(), r.to_json());
    }
    put(result_json, r.to_json());
    if (!r.overall_success) {
      ctx->last_error = "episode failed at stage '" + r.failure_stage + "'";
      return RB_EPISODE_FAILED;
    }
    return RB_OK;
  });
}

rb_status rb_bench(rb_context* ctx, int n_tasks, uint64_t seed, const char* weights_dir, const char* report_path,
                   rb_progress_fn progress, void* user, char** report_json) {
  return guarded(ctx, [&] {
    if (n_tasks < 0) throw Error(ErrorCode::InvalidInput, "tasks must be non-negative");
    const LoadedModels models = load_models(weights_dir);
    BenchmarkConfig b;
    b.n_tasks = n_tasks;
    b.seed = seed;
    std::function<void(const std::string&)> cb;
    if (progress) cb = [&](const std::string& line) { progress(line.c_str(), user); };
    const BenchmarkReport rep = evaluate_benchmark(b, models.view(), ctx->cfg, cb);
    const std::string text = rep.to_json();
    if (report_path && *report_path) write_file(report_path, text);
    put(report_json, text);
    return RB_OK;
  });
}

}  // extern "C"
