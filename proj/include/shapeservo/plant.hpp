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

// Kinematic plant, trajectory log and the closed-loop episode.
//
// One control cycle: plant tips -> camera -> (noise) -> back-projection ->
// arc fit -> error -> reference switching -> servo law -> plant step.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "shapeservo/camera.hpp"
#include "shapeservo/controller.hpp"
#include "shapeservo/errors.hpp"
#include "shapeservo/estimation.hpp"
#include "shapeservo/kinematics.hpp"

namespace shapeservo {

struct SimConfig {
  double dt = 0.1;             // s, 10 Hz control
  double actuator_lag = 0.0;   // s, first-order time constant; 0 = ideal
  int max_steps = 600;
  /// Cycles kept servoing after the last reference converges, so the
  /// steady-state window is measured under control.
  int dwell_steps = 10;
  /// Physical bend cap per section (rad); keeps every arc inside the
  /// half-circle validity range of the linkage model.
  double max_bend = 0.95 * kPi;
  /// Slack on section length limits for the arc fit (mm).
  double fit_length_tolerance = 20.0;

  void validate() const {
    if (!(dt > 0.0)) throw DomainError("sim: dt must be positive");
    if (!(actuator_lag >= 0.0)) throw DomainError("sim: actuator_lag must be non-negative");
    if (max_steps < 1 || dwell_steps < 0) throw DomainError("sim: bad step counts");
    if (!(max_bend > 0.0 && max_bend < kPi)) throw DomainError("sim: max_bend must be in (0, pi)");
  }
};

struct PlantState {
  std::vector<CableLengths> cables;
  Eigen::VectorXd applied_velocity;  // after actuator lag, mm/s
  double time = 0.0;
  std::vector<bool> limit_clamped;  // per cable, last step
};

/// All sections retracted to their minimum length, straight.
inline PlantState initial_plant_state(const RobotConfig& config) {
  PlantState s;
  s.cables = retracted_cables(config);
  s.applied_velocity = Eigen::VectorXd::Zero(3 * static_cast<Eigen::Index>(config.size()));
  s.limit_clamped.assign(3 * config.size(), false);
  return s;
}

inline PlantState step_plant(const PlantState& state, const Eigen::VectorXd& v_cable,
                             const RobotConfig& config, const SimConfig& sim) {
  const std::size_t n = config.size();
  if (v_cable.size() != 3 * static_cast<Eigen::Index>(n) || state.cables.size() != n) {
    throw SizeMismatch("step_plant: expected " + std::to_string(3 * n) + " cable velocities");
  }
  PlantState next = state;
  next.limit_clamped.assign(3 * n, false);
  if (sim.actuator_lag > 0.0) {
    const double alpha = 1.0 - std::exp(-sim.dt / sim.actuator_lag);
    next.applied_velocity = state.applied_velocity + alpha * (v_cable - state.applied_velocity);
  } else {
    next.applied_velocity = v_cable;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& spec = config.sections[i];
    Vec3 c = state.cables[i].vec() + sim.dt * next.applied_velocity.segment<3>(3 * static_cast<Eigen::Index>(i));
    for (int k = 0; k < 3; ++k) {
      const double clamped = std::clamp(c(k), spec.min_length, spec.max_length);
      if (clamped != c(k)) next.limit_clamped[3 * i + static_cast<std::size_t>(k)] = true;
      c(k) = clamped;
    }
    const ArcParams arc = cables_to_arc(CableLengths::from(c), spec.tendon_radius);
    if (arc.bend_angle() > sim.max_bend) {
      // shrink the cable differences about their mean: length is kept and
      // the bend scales linearly
      const double mean = c.mean();
      c = Vec3::Constant(mean) + (sim.max_bend / arc.bend_angle()) * (c - Vec3::Constant(mean));
      for (int k = 0; k < 3; ++k) next.limit_clamped[3 * i + static_cast<std::size_t>(k)] = true;
    }
    next.cables[i] = CableLengths::from(c);
  }
  next.time = state.time + sim.dt;
  return next;
}

inline std::vector<Vec3> plant_tips(const PlantState& state, const RobotConfig& config) {
  return tip_positions(config, state.cables);
}

struct NoiseConfig {
  double sigma_px = 0.0;
  double sigma_depth_m = 0.0;
  std::uint64_t seed = 0;

  bool enabled() const { return sigma_px > 0.0 || sigma_depth_m > 0.0; }
};

/// Independent, reproducible noise stream per control cycle.
inline std::uint64_t cycle_seed(std::uint64_t seed, std::uint64_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

enum class CycleEvent { None, AutoAdvance, ManualAdvance, Complete };

inline const char* to_string(CycleEvent e) {
  switch (e) {
    case CycleEvent::AutoAdvance: return "auto_advance";
    case CycleEvent::ManualAdvance: return "manual_advance";
    case CycleEvent::Complete: return "complete";
    case CycleEvent::None: break;
  }
  return "none";
}

inline CycleEvent cycle_event_from_string(const std::string& s) {
  if (s == "none") return CycleEvent::None;
  if (s == "auto_advance") return CycleEvent::AutoAdvance;
  if (s == "manual_advance") return CycleEvent::ManualAdvance;
  if (s == "complete") return CycleEvent::Complete;
  throw DomainError("unknown cycle event '" + s + "'");
}

/// One control cycle. `error` is measured against `reference` (index
/// `ref_index`); an advance event means the command already targets the
/// next reference.
struct TrajectoryRecord {
  int step = 0;
  double time = 0.0;
  std::size_t ref_index = 0;
  CycleEvent event = CycleEvent::None;
  std::vector<CableLengths> cables;  // plant state at measurement
  std::vector<ArcParams> arcs;       // estimated
  FeatureVector features;            // observed (noisy when enabled)
  FeatureVector reference;
  Eigen::VectorXd error;
  double error_norm = 0.0;
  Eigen::VectorXd command;  // mm/s after the speed clamp
  std::vector<bool> speed_clamped;
  std::vector<bool> limit_clamped;  // by the plant step that follows
};

enum class Termination { Running, Completed, MaxSteps, Aborted };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::MaxSteps: return "max_steps";
    case Termination::Aborted: return "aborted";
    case Termination::Running: break;
  }
  return "running";
}

struct TrajectoryLog {
  std::size_t sections = 0;
  std::vector<TrajectoryRecord> records;
  Termination termination = Termination::Running;
  std::string abort_reason;
  int abort_step = -1;

  bool completed() const {
    for (const auto& r : records) {
      if (r.event == CycleEvent::Complete) return true;
    }
    return false;
  }
};

/// Closed-loop episode as a step-driven state machine (used offline by
/// run_episode and tick-by-tick by the service).
class Episode {
 public:
  Episode(RobotConfig config, Camera camera, ControlGains gains, Scenario scenario,
          SimConfig sim = {}, NoiseConfig noise = {})
      : config_(std::move(config)),
        camera_(std::move(camera)),
        gains_(std::move(gains)),
        scenario_(std::move(scenario)),
        sim_(sim),
        noise_(noise) {
    if (config_.size() == 0) throw DomainError("episode: robot has no sections");
    gains_.validate();
    sim_.validate();
    scenario_.validate(config_.size());
    reset();
  }

  void reset() {
    state_ = initial_plant_state(config_);
    log_ = TrajectoryLog{};
    log_.sections = config_.size();
    ref_index_ = 0;
    step_ = 0;
    complete_step_ = -1;
    manual_advance_ = false;
  }

  bool finished() const { return log_.termination != Termination::Running; }

  /// Runs one control cycle; returns the new record, or nothing once the
  /// episode has finished. Module errors end the episode as Aborted.
  const TrajectoryRecord* step() {
    if (finished()) return nullptr;
    try {
      cycle();
    } catch (const Error& e) {
      log_.termination = Termination::Aborted;
      log_.abort_reason = e.what();
      log_.abort_step = step_;
      return nullptr;
    }
    ++step_;
    if (complete_step_ >= 0 && step_ - complete_step_ > sim_.dwell_steps) {
      log_.termination = Termination::Completed;
    } else if (step_ >= sim_.max_steps) {
      log_.termination = Termination::MaxSteps;
    }
    return &log_.records.back();
  }

  /// Switch to the next reference at the start of the next cycle,
  /// regardless of the error threshold.
  void request_manual_advance() { manual_advance_ = true; }

  /// Replace the remaining references with `ref` (becomes current).
  void replace_reference(Reference ref) {
    if (ref.features.size() != config_.size()) throw SizeMismatch("reference feature count");
    scenario_.references.resize(ref_index_ + 1);
    scenario_.references[ref_index_] = std::move(ref);
    reopen();
  }

  void append_reference(Reference ref) {
    if (ref.features.size() != config_.size()) throw SizeMismatch("reference feature count");
    scenario_.references.push_back(std::move(ref));
    reopen();
  }

  const TrajectoryLog& log() const { return log_; }
  const PlantState& plant() const { return state_; }
  const Scenario& scenario() const { return scenario_; }
  std::size_t reference_index() const { return ref_index_; }
  const RobotConfig& robot() const { return config_; }
  const Camera& camera() const { return camera_; }
  int steps() const { return step_; }

 private:
  // New references re-arm a completed (but not aborted) episode.
  void reopen() {
    complete_step_ = -1;
    if (log_.termination == Termination::Completed) log_.termination = Termination::Running;
  }

  void cycle() {
    TrajectoryRecord rec;
    rec.step = step_;
    rec.time = state_.time;
    rec.cables = state_.cables;

    FeatureVector observed = project_points(plant_tips(state_, config_), camera_);
    if (noise_.enabled()) {
      observed = add_feature_noise(observed, noise_.sigma_px, noise_.sigma_depth_m,
                                   cycle_seed(noise_.seed, static_cast<std::uint64_t>(step_)));
    }
    std::vector<Vec3> tips;
    tips.reserve(observed.size());
    for (const auto& f : observed) tips.push_back(backproject(f, camera_));
    rec.arcs = estimate_robot_state(tips, config_, FitOptions{sim_.fit_length_tolerance});
    const auto est_cables = estimated_cables(rec.arcs, config_);

    if (manual_advance_) {
      manual_advance_ = false;
      if (ref_index_ + 1 < scenario_.references.size()) {
        ++ref_index_;
        rec.event = CycleEvent::ManualAdvance;
      }
    }
    rec.ref_index = ref_index_;
    rec.reference = scenario_.references[ref_index_].features;
    rec.error = compute_error(observed, rec.reference);
    rec.error_norm = rec.error.norm();

    Eigen::VectorXd control_error = rec.error;
    if (complete_step_ < 0) {
      const auto adv = advance_scenario(scenario_, ref_index_, rec.error);
      if (adv.advanced) {
        ref_index_ = adv.index;
        if (rec.event == CycleEvent::None) rec.event = CycleEvent::AutoAdvance;
        control_error = compute_error(observed, scenario_.references[ref_index_].features);
      } else if (adv.complete) {
        rec.event = CycleEvent::Complete;
        complete_step_ = step_;
      }
    }

    const auto out = control_step(est_cables, control_error, observed, camera_, config_, gains_);
    rec.features = std::move(observed);
    rec.command = out.velocity;
    rec.speed_clamped = out.speed_clamped;
    state_ = step_plant(state_, out.velocity, config_, sim_);
    rec.limit_clamped = state_.limit_clamped;
    log_.records.push_back(std::move(rec));
  }

  RobotConfig config_;
  Camera camera_;
  ControlGains gains_;
  Scenario scenario_;
  SimConfig sim_;
  NoiseConfig noise_;
  PlantState state_;
  TrajectoryLog log_;
  std::size_t ref_index_ = 0;
  int step_ = 0;
  int complete_step_ = -1;
  bool manual_advance_ = false;
};

inline TrajectoryLog run_episode(const RobotConfig& config, const Camera& camera,
                                 const ControlGains& gains, const Scenario& scenario,
                                 const SimConfig& sim = {}, const NoiseConfig& noise = {}) {
  Episode episode(config, camera, gains, scenario, sim, noise);
  while (!episode.finished()) episode.step();
  return episode.log();
}

}  // namespace shapeservo
