// Command-line front end over the C API.
#include "reorient/reorient.h"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

struct Context {
  rb_context* ctx = nullptr;
  ~Context() { rb_context_destroy(ctx); }
};

int report(rb_context* ctx, rb_status s) {
  if (s != RB_OK) std::cerr << "error: " << rb_last_error(ctx) << '\n';
  return static_cast<int>(s);
}

void print_and_free(char* s) {
  if (!s) return;
  std::cout << s << '\n';
  rb_string_free(s);
}

void progress_line(const char* line, void*) { std::cerr << line << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale object reorientation simulator"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file overriding default settings")->check(CLI::ExistingFile);

  std::uint64_t seed = 0;
  std::string kind, out, data, scene, task, policy = "learned", weights, export_dir, report_path;
  int episodes = 1, epochs = 0, tasks = 50;
  double lr = 1e-3;

  auto* mk = app.add_subcommand("make-task", "Write a seeded scene and task");
  mk->add_option("--seed", seed);
  mk->add_option("--scene", scene)->required();
  mk->add_option("--task", task)->required();

  auto* gen = app.add_subcommand("gen-data", "Generate an oracle-labeled dataset");
  gen->add_option("--kind", kind)->required()->check(CLI::IsMember({"pickability", "waypoint"}));
  gen->add_option("--episodes", episodes)->required();
  gen->add_option("--seed", seed);
  gen->add_option("--out", out)->required();

  auto* tr = app.add_subcommand("train", "Train a surrogate model");
  tr->add_option("--kind", kind)->required()->check(CLI::IsMember({"pickability", "waypoint"}));
  tr->add_option("--data", data)->required()->check(CLI::ExistingFile);
  tr->add_option("--lr", lr);
  tr->add_option("--epochs", epochs);
  tr->add_option("--seed", seed);
  tr->add_option("--out", out)->required();

  auto* run = app.add_subcommand("run", "Run one episode");
  run->add_option("--scene", scene)->required()->check(CLI::ExistingFile);
  run->add_option("--task", task)->required()->check(CLI::ExistingFile);
  run->add_option("--policy", policy)->check(CLI::IsMember({"learned", "heuristic"}));
  run->add_option("--weights", weights);
  run->add_option("--export", export_dir);
  run->add_option("--seed", seed);

  auto* bench = app.add_subcommand("bench", "Benchmark both policies");
  bench->add_option("--tasks", tasks);
  bench->add_option("--seed", seed);
  bench->add_option("--weights", weights)->required();
  bench->add_option("--report", report_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : RB_INVALID_INPUT;
  }

  std::string config_text;
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    std::stringstream ss;
    ss << f.rdbuf();
    config_text = ss.str();
  }
  Context c;
  if (rb_status s = rb_context_create(config_text.empty() ? nullptr : config_text.c_str(), &c.ctx); s != RB_OK) {
    std::cerr << "error: invalid configuration " << config_path << '\n';
    return s;
  }

  if (*mk) return report(c.ctx, rb_make_task(c.ctx, seed, scene.c_str(), task.c_str()));
  if (*gen) {
    size_t n = 0;
    const rb_status s = rb_generate_dataset(c.ctx, kind.c_str(), episodes, seed, out.c_str(), &n);
    if (s == RB_OK) std::cout << n << " records written to " << out << '\n';
    return report(c.ctx, s);
  }
  if (*tr) {
    char* rep = nullptr;
    const rb_status s = rb_train(c.ctx, kind.c_str(), data.c_str(), lr, epochs, seed, out.c_str(), &rep);
    print_and_free(rep);
    return report(c.ctx, s);
  }
  if (*run) {
    char* res = nullptr;
    const rb_status s = rb_run_episode(c.ctx, scene.c_str(), task.c_str(), policy.c_str(),
                                       weights.empty() ? nullptr : weights.c_str(),
                                       export_dir.empty() ? nullptr : export_dir.c_str(), seed, &res);
    print_and_free(res);
    return report(c.ctx, s);
  }
  char* rep = nullptr;
  const rb_status s = rb_bench(c.ctx, tasks, seed, weights.c_str(), report_path.empty() ? nullptr : report_path.c_str(),
                               progress_line, nullptr, report_path.empty() ? &rep : nullptr);
  print_and_free(rep);
  return report(c.ctx, s);
}
