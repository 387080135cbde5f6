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

// Vision-only state estimation: constant-curvature arcs fitted to observed
// section-tip points, then mapped to cable lengths for the shape Jacobian.

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "shapeservo/errors.hpp"
#include "shapeservo/kinematics.hpp"

namespace shapeservo {

struct FitOptions {
  /// Slack (mm) on the section length limits. Zero is strict; noisy
  /// observations of a section sitting at a limit need a few mm.
  double length_tolerance = 0.0;
};

/// Arc through the section base (origin, tangent +z) and `tip_local`.
/// Length limits are checked only when `spec` is given.
inline ArcParams fit_section_arc(const Vec3& tip_local,
                                 const std::optional<SectionSpec>& spec = std::nullopt,
                                 const FitOptions& options = {}) {
  const double rho = std::hypot(tip_local.x(), tip_local.y());
  const double z = tip_local.z();
  if (rho == 0.0 && z == 0.0) throw DomainError("fit_section_arc: tip coincides with the base");
  if (!(z > 0.0)) {
    throw DomainError("fit_section_arc: tip is behind the base tangent plane");
  }
  ArcParams arc;
  if (rho == 0.0) {
    arc.length = z;
  } else {
    const double chord2 = rho * rho + z * z;
    arc.curvature = 2.0 * rho / chord2;
    arc.direction = std::atan2(tip_local.y(), tip_local.x());
    // s = bend / kappa = 2 atan2(rho, z) * chord^2 / (2 rho)
    arc.length = std::atan2(rho, z) * chord2 / rho;
  }
  if (spec) {
    const double tol = options.length_tolerance;
    if (arc.length < spec->min_length - tol || arc.length > spec->max_length + tol) {
      throw DomainError("fit_section_arc: implied length " + std::to_string(arc.length) +
                        " mm is outside [" + std::to_string(spec->min_length) + ", " +
                        std::to_string(spec->max_length) + "]");
    }
  }
  return arc;
}

/// Fits every section in turn, expressing tip i in the frame rebuilt from
/// the arcs already fitted (orientation is never observed directly).
inline std::vector<ArcParams> estimate_robot_state(std::span<const Vec3> tips_world,
                                                   const RobotConfig& config,
                                                   const FitOptions& options = {}) {
  if (tips_world.size() != config.size()) {
    throw SizeMismatch("estimate_robot_state: expected " + std::to_string(config.size()) +
                       " tips, got " + std::to_string(tips_world.size()));
  }
  std::vector<ArcParams> arcs;
  arcs.reserve(config.size());
  RigidTransform frame = config.base;
  for (std::size_t i = 0; i < config.size(); ++i) {
    try {
      arcs.push_back(fit_section_arc(frame.inverse() * tips_world[i], config.sections[i], options));
      frame = frame * section_forward(arcs.back());
    } catch (const DomainError& e) {
      throw EstimationError(e.what(), i);
    }
  }
  return arcs;
}

inline std::vector<CableLengths> estimated_cables(std::span<const ArcParams> arcs,
                                                  const RobotConfig& config) {
  if (arcs.size() != config.size()) throw SizeMismatch("estimated_cables: size mismatch");
  std::vector<CableLengths> out;
  out.reserve(arcs.size());
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    try {
      out.push_back(arc_to_cables(arcs[i], config.sections[i].tendon_radius));
    } catch (const DomainError& e) {
      throw EstimationError(e.what(), i);
    }
  }
  return out;
}

}  // namespace shapeservo
