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

// Batch experiments: K randomized reachable references (some of them
// explicit S-shapes) per robot, one episode each, aggregated metrics.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "shapeservo/metrics.hpp"
#include "shapeservo/plant.hpp"
#include "shapeservo/reference.hpp"

namespace shapeservo {

/// Every feature inside the image and at least `min_depth_mm` deep.
inline bool features_visible(const FeatureVector& f, const CameraIntrinsics& k, double min_depth_mm = 100.0) {
  for (const auto& x : f) {
    if (x.x < 0.0 || x.x > k.width || x.y < 0.0 || x.y > k.height || x.depth_mm() < min_depth_mm) return false;
  }
  return true;
}

namespace detail {

inline std::vector<ArcParams> sample_admissible_arcs(const RobotConfig& config, std::mt19937_64& rng) {
  std::vector<ArcParams> arcs;
  std::uniform_real_distribution<double> unit(0.0, 1.0), dir(-kPi, kPi);
  for (const auto& spec : config.sections) {
    for (;;) {
      ArcParams a;
      a.length = spec.min_length + unit(rng) * (spec.max_length - spec.min_length);
      a.curvature = unit(rng) * std::min(0.7 * kPi / a.length, 0.9 / spec.tendon_radius);
      a.direction = dir(rng);
      if (arc_admissible(a, spec)) {
        arcs.push_back(a);
        break;
      }
    }
  }
  return arcs;
}

}  // namespace detail

/// Reference generated for the end-effector position of a random admissible
/// chain (so the target is reachable).
inline Reference random_reference(const RobotConfig& config, const Camera& cam, std::mt19937_64& rng,
                                  double threshold, const ReferenceOptions& opt = {}) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const auto arcs = detail::sample_admissible_arcs(config, rng);
    const Vec3 target = robot_forward(config, arcs).back().translation();
    try {
      auto gen = generate_reference(target, config, cam, opt);
      if (!features_visible(gen.features, cam.intrinsics)) continue;
      return {gen.features, threshold, gen.arcs, "random"};
    } catch (const Error&) {
    }
  }
  throw Error("random_reference: no visible reachable reference found");
}

/// Planar chain whose consecutive sections bend to opposite sides.
inline Reference s_shape_reference(const RobotConfig& config, const Camera& cam, std::mt19937_64& rng,
                                   double threshold) {
  if (config.size() < 2) throw DomainError("s_shape_reference: needs at least two sections");
  std::uniform_real_distribution<double> unit(0.0, 1.0), dir(-kPi, kPi);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double azimuth = dir(rng);
    double sign = unit(rng) < 0.5 ? 1.0 : -1.0;
    PlanarChain chain;
    for (const auto& spec : config.sections) {
      const double length = spec.min_length + unit(rng) * (spec.max_length - spec.min_length);
      chain.push_back({length, sign * (0.3 + unit(rng) * 0.9)});
      sign = -sign;
    }
    if (!chain_admissible(chain, azimuth, config)) continue;
    const auto arcs = to_arcs(chain, azimuth);
    try {
      const auto f = reference_features(arcs, config, cam);
      if (!features_visible(f, cam.intrinsics)) continue;
      return {f, threshold, arcs, "s_shape"};
    } catch (const Error&) {
    }
  }
  throw Error("s_shape_reference: no visible S-shape found");
}

struct BatchConfig {
  RobotConfig robot;
  Camera camera;
  ControlGains gains;
  SimConfig sim;
  NoiseConfig noise;  // seed is offset per episode
  int references = 20;
  int s_shapes = 5;  // the last `s_shapes` references are S-shapes
  std::uint64_t seed = 1;
  std::optional<TransientCriterion> criterion;  // default by section count
  double threshold = 0.1;
  bool keep_logs = false;
};

struct EpisodeSummary {
  int index = 0;
  std::string kind;
  Termination termination = Termination::Running;
  std::string error;
  std::optional<MetricsReport> report;
  double wall_ms = 0.0;  // not part of the deterministic output
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  int count = 0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  m.count = static_cast<int>(v.size());
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

struct BatchAggregate {
  double convergence_rate = 0.0;
  MeanStd task_px, task_mm, config_px, config_mm, rise_s, settle_s;
};

struct BatchReport {
  std::size_t sections = 0;
  TransientCriterion criterion = TransientCriterion::Stringent;
  std::vector<EpisodeSummary> episodes;
  BatchAggregate aggregate;
  std::vector<TrajectoryLog> logs;  // when keep_logs
};

/// Aggregate over episodes with a report; convergence rate over all.
inline BatchAggregate aggregate(const std::vector<EpisodeSummary>& episodes) {
  BatchAggregate a;
  std::vector<double> tp, tm, cp, cm, rise, settle;
  int converged = 0;
  for (const auto& e : episodes) {
    if (!e.report) continue;
    const auto& r = *e.report;
    converged += r.converged ? 1 : 0;
    tp.push_back(r.steady.task.image_px);
    tm.push_back(r.steady.task.depth_mm);
    cp.push_back(r.steady.configuration.image_px);
    cm.push_back(r.steady.configuration.depth_mm);
    if (r.transient.rise_time) rise.push_back(*r.transient.rise_time);
    if (r.transient.settle_time) settle.push_back(*r.transient.settle_time);
  }
  a.convergence_rate = episodes.empty() ? 0.0 : static_cast<double>(converged) / static_cast<double>(episodes.size());
  a.task_px = mean_std(tp);
  a.task_mm = mean_std(tm);
  a.config_px = mean_std(cp);
  a.config_mm = mean_std(cm);
  a.rise_s = mean_std(rise);
  a.settle_s = mean_std(settle);
  return a;
}

/// Deterministic references for a batch.
inline std::vector<Reference> batch_references(const BatchConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<Reference> refs;
  const int s_shapes = cfg.robot.size() >= 2 ? std::min(cfg.s_shapes, cfg.references) : 0;
  for (int k = 0; k < cfg.references; ++k) {
    if (k >= cfg.references - s_shapes) {
      refs.push_back(s_shape_reference(cfg.robot, cfg.camera, rng, cfg.threshold));
    } else {
      refs.push_back(random_reference(cfg.robot, cfg.camera, rng, cfg.threshold));
    }
  }
  return refs;
}

/// Episode failures are recorded; the batch continues.
inline BatchReport run_batch(const BatchConfig& cfg) {
  if (cfg.references < 1) throw DomainError("run_batch: need at least one reference");
  BatchReport report;
  report.sections = cfg.robot.size();
  report.criterion = cfg.criterion.value_or(default_criterion(cfg.robot.size()));
  const auto refs = batch_references(cfg);
  for (int k = 0; k < cfg.references; ++k) {
    EpisodeSummary s;
    s.index = k;
    s.kind = refs[static_cast<std::size_t>(k)].label;
    NoiseConfig noise = cfg.noise;
    noise.seed = cfg.noise.seed + static_cast<std::uint64_t>(k);
    const auto t0 = std::chrono::steady_clock::now();
    TrajectoryLog log;
    try {
      Scenario sc;
      sc.references.push_back(refs[static_cast<std::size_t>(k)]);
      log = run_episode(cfg.robot, cfg.camera, cfg.gains, sc, cfg.sim, noise);
      s.termination = log.termination;
      if (log.termination == Termination::Aborted) s.error = log.abort_reason;
      if (log.records.size() >= 2) s.report = compute_report(log, report.criterion);
    } catch (const Error& e) {
      s.termination = Termination::Aborted;
      s.error = e.what();
    }
    s.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    report.episodes.push_back(std::move(s));
    if (cfg.keep_logs) report.logs.push_back(std::move(log));
  }
  report.aggregate = aggregate(report.episodes);
  return report;
}

inline nlohmann::json to_json(const MeanStd& m) {
  return {{"mean", m.mean}, {"std", m.std}, {"count", m.count}};
}

/// Deterministic part of the report (no wall-clock times).
inline nlohmann::json to_json(const BatchReport& r) {
  auto episodes = nlohmann::json::array();
  for (const auto& e : r.episodes) {
    nlohmann::json j{{"index", e.index}, {"kind", e.kind}, {"termination", to_string(e.termination)}};
    if (!e.error.empty()) j["error"] = e.error;
    j["metrics"] = e.report ? to_json(*e.report) : nlohmann::json(nullptr);
    episodes.push_back(j);
  }
  const auto& a = r.aggregate;
  return {{"schema", "shapeservo.batch/1"},
          {"sections", r.sections},
          {"criterion", to_string(r.criterion)},
          {"aggregate",
           {{"convergence_rate", a.convergence_rate},
            {"task", {{"image_px", to_json(a.task_px)}, {"depth_mm", to_json(a.task_mm)}}},
            {"configuration", {{"image_px", to_json(a.config_px)}, {"depth_mm", to_json(a.config_mm)}}},
            {"rise_time_s", to_json(a.rise_s)},
            {"settle_time_s", to_json(a.settle_s)}}},
          {"episodes", episodes}};
}

}  // namespace shapeservo
