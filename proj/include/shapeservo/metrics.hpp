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

// Metrics computed purely from a TrajectoryLog: steady-state errors split
// into image (px) and depth (mm), transient rise / settling times, overshoot
// and monotonicity of the error norm.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "shapeservo/errors.hpp"
#include "shapeservo/plant.hpp"

namespace shapeservo {

struct ErrorSplit {
  double image_px = 0.0;
  double depth_mm = 0.0;
};

struct SteadyStateErrors {
  ErrorSplit task;           // end-effector feature only
  ErrorSplit configuration;  // every feature
};

/// Image / depth split of one error vector. Depth errors are linearised
/// about the reference depth: dz = z_ref * dlog z.
inline SteadyStateErrors split_error(const Eigen::VectorXd& e, const FeatureVector& reference) {
  const std::size_t n = reference.size();
  if (e.size() != 3 * static_cast<Eigen::Index>(n)) throw SizeMismatch("split_error: length");
  SteadyStateErrors out;
  double px2 = 0.0, mm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(3 * i);
    const double px = std::hypot(e(k), e(k + 1));
    const double mm = std::abs(e(k + 2)) * reference[i].depth_mm();
    px2 += px * px;
    mm2 += mm * mm;
    if (i + 1 == n) out.task = {px, mm};
  }
  out.configuration = {std::sqrt(px2), std::sqrt(mm2)};
  return out;
}

/// Terminal window: the last 10% of cycles (at least one).
inline std::size_t steady_window(std::size_t records) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(records))));
}

/// Mean of the per-cycle split norms over the terminal window.
inline SteadyStateErrors steady_state_metrics(const TrajectoryLog& log) {
  if (log.records.size() < 2) throw DomainError("steady_state_metrics: episode too short");
  const std::size_t w = steady_window(log.records.size());
  SteadyStateErrors mean;
  for (std::size_t k = log.records.size() - w; k < log.records.size(); ++k) {
    const auto& r = log.records[k];
    const auto s = split_error(r.error, r.reference);
    mean.task.image_px += s.task.image_px / static_cast<double>(w);
    mean.task.depth_mm += s.task.depth_mm / static_cast<double>(w);
    mean.configuration.image_px += s.configuration.image_px / static_cast<double>(w);
    mean.configuration.depth_mm += s.configuration.depth_mm / static_cast<double>(w);
  }
  return mean;
}

enum class TransientCriterion {
  Stringent,  // 90% -> 10% rise, 5% settling band
  Relaxed,    // 80% -> 20% rise, 10% settling band
};

inline const char* to_string(TransientCriterion c) {
  return c == TransientCriterion::Stringent ? "stringent" : "relaxed";
}

inline TransientCriterion transient_criterion_from_string(const std::string& s) {
  if (s == "stringent") return TransientCriterion::Stringent;
  if (s == "relaxed") return TransientCriterion::Relaxed;
  throw DomainError("unknown transient criterion '" + s + "'");
}

struct TransientMetrics {
  std::optional<double> rise_time;    // s; empty when a crossing never happens
  std::optional<double> settle_time;  // s; empty = not settled
};

/// Crossing times are the first sample at or below the level, measured from
/// the first sample. Settling is the first sample after which the signal
/// stays inside the band. A zero initial error gives zero for both.
inline TransientMetrics transient_metrics(std::span<const double> times,
                                          std::span<const double> norms,
                                          TransientCriterion criterion) {
  if (times.size() != norms.size() || times.empty()) throw SizeMismatch("transient_metrics: bad series");
  const double e0 = norms[0];
  if (e0 == 0.0) return {0.0, 0.0};
  const bool stringent = criterion == TransientCriterion::Stringent;
  const double hi = (stringent ? 0.9 : 0.8) * e0;
  const double lo = (stringent ? 0.1 : 0.2) * e0;
  const double band = (stringent ? 0.05 : 0.10) * e0;
  auto first_at_or_below = [&](double level) -> std::optional<double> {
    for (std::size_t k = 0; k < norms.size(); ++k) {
      if (norms[k] <= level) return times[k] - times[0];
    }
    return std::nullopt;
  };
  TransientMetrics out;
  const auto t_hi = first_at_or_below(hi);
  const auto t_lo = first_at_or_below(lo);
  if (t_hi && t_lo) out.rise_time = *t_lo - *t_hi;
  // last sample outside the band; settled from the sample after it
  std::optional<std::size_t> last_out;
  for (std::size_t k = 0; k < norms.size(); ++k) {
    if (norms[k] > band) last_out = k;
  }
  if (!last_out) {
    out.settle_time = 0.0;
  } else if (*last_out + 1 < norms.size()) {
    out.settle_time = times[*last_out + 1] - times[0];
  }
  return out;
}

inline TransientMetrics transient_metrics(const TrajectoryLog& log, TransientCriterion criterion) {
  std::vector<double> t, e;
  for (const auto& r : log.records) {
    t.push_back(r.time);
    e.push_back(r.error_norm);
  }
  return transient_metrics(t, e, criterion);
}

/// Largest excursion of any error component past zero (to the side opposite
/// its initial sign), relative to the initial error norm. Only cycles on the
/// first reference are considered.
inline double overshoot_ratio(const TrajectoryLog& log) {
  if (log.records.empty()) return 0.0;
  const auto& e0 = log.records[0].error;
  const double n0 = e0.norm();
  if (n0 == 0.0) return 0.0;
  double worst = 0.0;
  for (const auto& r : log.records) {
    if (r.ref_index != log.records[0].ref_index) break;
    for (Eigen::Index c = 0; c < e0.size(); ++c) {
      const double v = r.error(c);
      if (e0(c) > 0.0 && v < 0.0) worst = std::max(worst, -v);
      if (e0(c) < 0.0 && v > 0.0) worst = std::max(worst, v);
    }
  }
  return worst / n0;
}

/// Error norm never increases from cycle `from` on (first reference only).
inline bool error_norm_non_increasing(const TrajectoryLog& log, std::size_t from = 1) {
  for (std::size_t k = from + 1; k < log.records.size(); ++k) {
    if (log.records[k].ref_index != log.records[0].ref_index) break;
    if (log.records[k].error_norm > log.records[k - 1].error_norm) return false;
  }
  return true;
}

struct MetricsReport {
  SteadyStateErrors steady;
  TransientCriterion criterion = TransientCriterion::Stringent;
  TransientMetrics transient;
  bool converged = false;
  std::size_t cycles = 0;
  double overshoot = 0.0;
  bool monotone = true;
};

/// Stringent for up to two sections, relaxed beyond.
inline TransientCriterion default_criterion(std::size_t sections) {
  return sections <= 2 ? TransientCriterion::Stringent : TransientCriterion::Relaxed;
}

inline MetricsReport compute_report(const TrajectoryLog& log, TransientCriterion criterion) {
  MetricsReport m;
  m.steady = steady_state_metrics(log);
  m.criterion = criterion;
  m.transient = transient_metrics(log, criterion);
  m.converged = log.completed();
  m.cycles = log.records.size();
  m.overshoot = overshoot_ratio(log);
  m.monotone = error_norm_non_increasing(log);
  return m;
}

inline nlohmann::json to_json(const MetricsReport& m) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"task", {{"image_px", m.steady.task.image_px}, {"depth_mm", m.steady.task.depth_mm}}},
          {"configuration",
           {{"image_px", m.steady.configuration.image_px}, {"depth_mm", m.steady.configuration.depth_mm}}},
          {"criterion", to_string(m.criterion)},
          {"rise_time_s", opt(m.transient.rise_time)},
          {"settle_time_s", opt(m.transient.settle_time)},
          {"converged", m.converged},
          {"cycles", m.cycles},
          {"overshoot_ratio", m.overshoot},
          {"monotone", m.monotone}};
}

}  // namespace shapeservo
