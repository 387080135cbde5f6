// Copyright 2026 The shapeservo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// shapeservo command-line front end: run, batch, metrics, reference, serve.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shapeservo/batch.hpp"
#include "shapeservo/config_io.hpp"
#include "shapeservo/log_io.hpp"
#include "shapeservo/metrics.hpp"
#include "shapeservo/service.hpp"

namespace fs = std::filesystem;
using namespace shapeservo;

namespace {

struct CommonOptions {
  std::string robot, camera, gains, sim;
  int sections = 2;
  std::uint64_t seed = 1;
  double noise_px = 0.0;
  double noise_depth_mm = 0.0;
  std::string criterion;

  void add_configs(CLI::App* app) {
    app->add_option("--robot", robot, "robot JSON (default: N identical 80-200 mm sections)")->check(CLI::ExistingFile);
    app->add_option("--sections", sections, "section count when --robot is not given")->check(CLI::Range(1, 8));
    app->add_option("--camera", camera, "camera JSON (default: eye-to-body camera 1 m in front)")
        ->check(CLI::ExistingFile);
    app->add_option("--gains", gains, "gains JSON")->check(CLI::ExistingFile);
    app->add_option("--sim", sim, "simulation JSON")->check(CLI::ExistingFile);
  }

  void add_noise(CLI::App* app) {
    app->add_option("--seed", seed, "noise / reference seed");
    app->add_option("--noise-px", noise_px, "pixel noise sigma (px)")->check(CLI::NonNegativeNumber);
    app->add_option("--noise-depth-mm", noise_depth_mm, "depth noise sigma (mm)")->check(CLI::NonNegativeNumber);
  }

  void add_criterion(CLI::App* app) {
    app->add_option("--criterion", criterion, "transient criterion (default: stringent for N<=2, else relaxed)")
        ->check(CLI::IsMember({"stringent", "relaxed"}));
  }

  RobotConfig load_robot() const {
    if (!robot.empty()) return robot_from_json(load_json_file(robot));
    RobotConfig r;
    r.sections.assign(static_cast<std::size_t>(sections), SectionSpec{});
    return r;
  }
  Camera load_camera() const { return camera.empty() ? default_camera() : camera_from_json(load_json_file(camera)); }
  ControlGains load_gains() const { return gains.empty() ? ControlGains{} : gains_from_json(load_json_file(gains)); }
  SimConfig load_sim() const { return sim.empty() ? SimConfig{} : sim_from_json(load_json_file(sim)); }
  NoiseConfig noise() const { return {noise_px, noise_depth_mm * 1e-3, seed}; }
  TransientCriterion transient(std::size_t n) const {
    return criterion.empty() ? default_criterion(n) : transient_criterion_from_string(criterion);
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
}

int cmd_run(const CommonOptions& o, const std::string& scenario_path, const std::string& out_dir) {
  const auto robot = o.load_robot();
  const auto cam = o.load_camera();
  const auto scenario = scenario_from_json(load_json_file(scenario_path), robot, cam);
  const auto log = run_episode(robot, cam, o.load_gains(), scenario, o.load_sim(), o.noise());
  fs::create_directories(out_dir);
  write_csv_file((fs::path(out_dir) / "log.csv").string(), log);
  save_json_file((fs::path(out_dir) / "log.json").string(), to_json(log));
  std::printf("termination %s after %zu cycles\n", to_string(log.termination), log.records.size());
  if (log.termination == Termination::Aborted) {
    std::printf("aborted at cycle %d: %s\n", log.abort_step, log.abort_reason.c_str());
  }
  if (log.records.size() >= 2) {
    const auto report = compute_report(log, o.transient(robot.size()));
    save_json_file((fs::path(out_dir) / "report.json").string(), to_json(report));
    std::printf("task error %.4f px / %.4f mm, configuration error %.4f px / %.4f mm\n",
                report.steady.task.image_px, report.steady.task.depth_mm,
                report.steady.configuration.image_px, report.steady.configuration.depth_mm);
  }
  return log.termination == Termination::Completed ? 0 : 2;
}

int cmd_batch(const CommonOptions& o, int references, int s_shapes, double threshold, const std::string& out_dir,
              bool keep_logs) {
  BatchConfig cfg;
  cfg.robot = o.load_robot();
  cfg.camera = o.load_camera();
  cfg.gains = o.load_gains();
  cfg.sim = o.load_sim();
  cfg.noise = o.noise();
  cfg.seed = o.seed;
  cfg.references = references;
  cfg.s_shapes = s_shapes;
  cfg.threshold = threshold;
  cfg.criterion = o.transient(cfg.robot.size());
  cfg.keep_logs = keep_logs;
  const auto report = run_batch(cfg);
  fs::create_directories(out_dir);
  save_json_file((fs::path(out_dir) / "batch_report.json").string(), to_json(report));
  if (keep_logs) {
    for (std::size_t k = 0; k < report.logs.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "episode_%03zu.csv", k);
      write_csv_file((fs::path(out_dir) / name).string(), report.logs[k]);
    }
  }
  const auto& a = report.aggregate;
  std::printf("%zu sections, %zu episodes, convergence %.1f%%\n", report.sections, report.episodes.size(),
              100.0 * a.convergence_rate);
  std::printf("task          %.4f +- %.4f px   %.4f +- %.4f mm\n", a.task_px.mean, a.task_px.std, a.task_mm.mean,
              a.task_mm.std);
  std::printf("configuration %.4f +- %.4f px   %.4f +- %.4f mm\n", a.config_px.mean, a.config_px.std,
              a.config_mm.mean, a.config_mm.std);
  std::printf("%s rise %.3f +- %.3f s, settle %.3f +- %.3f s\n", to_string(report.criterion), a.rise_s.mean,
              a.rise_s.std, a.settle_s.mean, a.settle_s.std);
  for (const auto& e : report.episodes) {
    if (!e.error.empty()) std::printf("episode %d: %s\n", e.index, e.error.c_str());
  }
  return a.convergence_rate == 1.0 ? 0 : 2;
}

int cmd_metrics(const std::string& log_path, const std::string& criterion, const std::string& out) {
  const auto log = read_csv_file(log_path);
  const auto c = criterion.empty() ? default_criterion(log.sections) : transient_criterion_from_string(criterion);
  const std::string text = to_json(compute_report(log, c)).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return 0;
}

int cmd_reference(const CommonOptions& o, const std::vector<double>& pixel, double depth_m,
                  const std::vector<double>& position, std::optional<double> tangent, const std::string& balance,
                  const std::string& out) {
  const auto robot = o.load_robot();
  const auto cam = o.load_camera();
  ReferenceOptions opt;
  opt.criterion = balance_criterion_from_string(balance);
  const auto g = position.empty()
                     ? generate_reference(Eigen::Vector2d(pixel[0], pixel[1]), depth_m, robot, cam, opt, tangent)
                     : generate_reference(Vec3(position[0], position[1], position[2]), robot, cam, opt, tangent);
  const std::string text = to_json(g).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return 0;
}

int cmd_serve(const CommonOptions& o, const std::string& scenario_path, const std::string& address, int port,
              double tick_ms) {
  ServiceConfig cfg;
  cfg.robot = o.load_robot();
  cfg.camera = o.load_camera();
  cfg.gains = o.load_gains();
  cfg.sim = o.load_sim();
  cfg.noise = o.noise();
  if (!scenario_path.empty()) cfg.scenario = scenario_from_json(load_json_file(scenario_path), cfg.robot, cfg.camera);
  if (tick_ms > 0.0) cfg.tick_period_s = tick_ms * 1e-3;
  serve(cfg, static_cast<unsigned short>(port), address, [&](unsigned short p) {
    std::printf("listening on %s:%u (%s)\n", address.c_str(), p, kServiceSchema);
    std::fflush(stdout);
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-body shape servoing of multi-section continuum robots (simulation harness)"};
  app.require_subcommand(1);

  CommonOptions run_opt;
  std::string run_scenario, run_out = "out";
  auto* run = app.add_subcommand("run", "run one closed-loop episode for a scenario");
  run_opt.add_configs(run);
  run_opt.add_noise(run);
  run_opt.add_criterion(run);
  run->add_option("--scenario", run_scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", run_out, "output directory (log.csv, log.json, report.json)");

  CommonOptions batch_opt;
  int references = 20, s_shapes = 5;
  double threshold = 0.1;
  std::string batch_out = "out";
  bool keep_logs = false;
  auto* batch = app.add_subcommand("batch", "randomized references, one episode each, aggregated metrics");
  batch_opt.add_configs(batch);
  batch_opt.add_noise(batch);
  batch_opt.add_criterion(batch);
  batch->add_option("-k,--references", references, "references per batch")->check(CLI::PositiveNumber);
  batch->add_option("--s-shapes", s_shapes, "how many of them are S-shapes")->check(CLI::NonNegativeNumber);
  batch->add_option("--threshold", threshold, "convergence threshold on the error norm")
      ->check(CLI::PositiveNumber);
  batch->add_option("-o,--out", batch_out, "output directory");
  batch->add_flag("--logs", keep_logs, "also write one CSV log per episode");

  std::string metrics_log, metrics_criterion, metrics_out;
  auto* metrics = app.add_subcommand("metrics", "recompute the metrics report from a CSV log");
  metrics->add_option("log", metrics_log, "CSV trajectory log")->required()->check(CLI::ExistingFile);
  metrics->add_option("--criterion", metrics_criterion, "transient criterion")
      ->check(CLI::IsMember({"stringent", "relaxed"}));
  metrics->add_option("-o,--out", metrics_out, "write the report here instead of stdout");

  CommonOptions ref_opt;
  std::vector<double> pixel, position;
  double depth_m = 0.0;
  std::optional<double> tangent;
  std::string balance = "balance-length", ref_out;
  auto* ref = app.add_subcommand("reference", "generate a shape reference for an end-effector target");
  ref_opt.add_configs(ref);
  auto* pixel_opt = ref->add_option("--pixel", pixel, "clicked pixel u v")->expected(2);
  ref->add_option("--depth-m", depth_m, "target depth along the pixel ray (m)")->needs(pixel_opt);
  auto* pos_opt = ref->add_option("--position", position, "world target x y z (mm)")->expected(3);
  pixel_opt->excludes(pos_opt);
  ref->add_option("--tangent", tangent, "end tangent angle in the reference plane (rad)");
  ref->add_option("--balance", balance, "optimization criterion")
      ->check(CLI::IsMember({"balance-length", "balance-curvature"}));
  ref->add_option("-o,--out", ref_out, "write the reference here instead of stdout");

  CommonOptions serve_opt;
  std::string serve_scenario, address = "127.0.0.1";
  int port = 8765;
  double tick_ms = 0.0;
  auto* srv = app.add_subcommand("serve", "live episode service (newline-delimited JSON over TCP)");
  serve_opt.add_configs(srv);
  serve_opt.add_noise(srv);
  srv->add_option("--scenario", serve_scenario, "scenario loaded into each new session")->check(CLI::ExistingFile);
  srv->add_option("--address", address, "listen address");
  srv->add_option("--port", port, "listen port (0 = any free port)")->check(CLI::Range(0, 65535));
  srv->add_option("--tick-ms", tick_ms, "wall-clock tick period (default: sim dt)")->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_opt, run_scenario, run_out);
    if (*batch) return cmd_batch(batch_opt, references, s_shapes, threshold, batch_out, keep_logs);
    if (*metrics) return cmd_metrics(metrics_log, metrics_criterion, metrics_out);
    if (*ref) {
      if (pixel.empty() == position.empty()) throw ConfigError("give either --pixel with --depth-m, or --position");
      if (!pixel.empty() && !(depth_m > 0.0)) throw ConfigError("--depth-m must be positive");
      return cmd_reference(ref_opt, pixel, depth_m, position, tangent, balance, ref_out);
    }
    if (*srv) return cmd_serve(serve_opt, serve_scenario, address, port, tick_ms);
  } catch (const UnreachableError& e) {
    std::fprintf(stderr, "unreachable: %s (residual %.3g)\n", e.what(), e.residual());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
