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

// Hybrid (2-1/2-D) whole-body shape servo law, convergence test and
// reference-sequence advancement.
//
//   v_cable = -servo_gain * pinv(J_shape) * S * pinv(J_img) * e
//
// S maps the image-Jacobian velocity of each tip into the world frame. The
// image Jacobian's depth row is -1, so the camera depth axis is flipped
// before rotating into the world; without the flip the loop is unstable.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapeservo/camera.hpp"
#include "shapeservo/errors.hpp"
#include "shapeservo/jacobians.hpp"
#include "shapeservo/kinematics.hpp"

namespace shapeservo {

struct ControlGains {
  double servo_gain = 1000.0;  // 1/s; closed-loop rate is servo_gain / depth_mm
  double damping = 1e-3;       // DLS mu for both pseudoinverses
  double err_threshold = 0.1;  // L2 of the mixed px / log-depth error
  double max_cable_speed = 500.0;  // mm/s
  ImageJacobianMode image_mode = ImageJacobianMode::Conventional;
  double min_depth_mm = kDefaultMinDepthMm;
  /// Per-entry weights on the error (length 3N); empty means identity.
  Eigen::VectorXd error_weights;

  void validate() const {
    if (!(servo_gain > 0.0)) throw DomainError("gains: servo_gain must be positive");
    if (!(damping >= 0.0)) throw DomainError("gains: damping must be non-negative");
    if (!(max_cable_speed > 0.0)) throw DomainError("gains: max_cable_speed must be positive");
    if (!(err_threshold > 0.0)) throw DomainError("gains: err_threshold must be positive");
  }
};

/// f - f_ref, flattened [dx1, dy1, dlogz1, ...].
inline Eigen::VectorXd compute_error(const FeatureVector& f, const FeatureVector& f_ref) {
  if (f.size() != f_ref.size()) {
    throw SizeMismatch("compute_error: " + std::to_string(f.size()) + " features vs " +
                       std::to_string(f_ref.size()) + " reference features");
  }
  return flatten(f) - flatten(f_ref);
}

/// End-effector part of the error (last feature).
inline Eigen::Vector3d task_error(const Eigen::VectorXd& e) { return e.tail<3>(); }

/// Strict: a norm exactly at the threshold is not converged.
inline bool check_converged(const Eigen::VectorXd& e, double threshold) {
  return e.norm() < threshold;
}

struct ControlOutput {
  Eigen::VectorXd velocity;       // mm/s, 3N
  std::vector<bool> speed_clamped;  // per cable
  bool near_singular = false;
};

/// Block-diagonal map from image-Jacobian velocities to world tip velocities.
inline Eigen::MatrixXd servo_to_world(std::size_t n, const Camera& cam) {
  const Mat3 r_wc = cam.extrinsics.world_to_camera.linear().transpose();
  const Mat3 block = r_wc * Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3 * static_cast<Eigen::Index>(n), 3 * static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) s.block<3, 3>(3 * i, 3 * i) = block;
  return s;
}

inline ControlOutput control_step(std::span<const CableLengths> est_cables,
                                  const Eigen::VectorXd& error, const FeatureVector& features,
                                  const Camera& cam, const RobotConfig& config,
                                  const ControlGains& gains) {
  const std::size_t n = config.size();
  if (est_cables.size() != n || features.size() != n ||
      error.size() != 3 * static_cast<Eigen::Index>(n)) {
    throw SizeMismatch("control_step: state, features and error disagree on section count");
  }
  if (!error.allFinite()) throw NumericalError("control_step: non-finite error vector");
  ControlOutput out;
  out.speed_clamped.assign(3 * n, false);
  Eigen::VectorXd e = error;
  if (gains.error_weights.size() != 0) {
    if (gains.error_weights.size() != e.size()) throw SizeMismatch("control_step: weight length");
    e = gains.error_weights.cwiseProduct(e);
  }
  if (e.isZero(0.0)) {
    out.velocity = Eigen::VectorXd::Zero(e.size());
    return out;
  }
  const auto j_img = block_diag_image_jacobian(features, cam.intrinsics, gains.image_mode,
                                               gains.min_depth_mm);
  const Eigen::MatrixXd j_shape = build_shape_jacobian(config, est_cables, &out.near_singular);
  const Eigen::VectorXd servo_velocity = blockwise_pinv(j_img, gains.damping).dense() * e;
  const Eigen::VectorXd tip_velocity = servo_to_world(n, cam) * servo_velocity;
  out.velocity = -gains.servo_gain * (damped_pinv(j_shape, gains.damping) * tip_velocity);
  if (!out.velocity.allFinite()) throw NumericalError("control_step: non-finite cable velocity");
  for (Eigen::Index k = 0; k < out.velocity.size(); ++k) {
    if (std::abs(out.velocity(k)) > gains.max_cable_speed) {
      out.velocity(k) = std::copysign(gains.max_cable_speed, out.velocity(k));
      out.speed_clamped[static_cast<std::size_t>(k)] = true;
    }
  }
  return out;
}

struct Reference {
  FeatureVector features;
  double threshold = 0.1;
  /// Arcs the features were generated from, when known.
  std::optional<std::vector<ArcParams>> arcs;
  std::string label;
};

struct Scenario {
  std::vector<Reference> references;

  void validate(std::size_t sections) const {
    if (references.empty()) throw DomainError("scenario: no references");
    for (const auto& r : references) {
      if (r.features.size() != sections) throw SizeMismatch("scenario: reference feature count");
      if (!(r.threshold > 0.0)) throw DomainError("scenario: thresholds must be positive");
    }
  }
};

struct AdvanceResult {
  std::size_t index = 0;
  bool advanced = false;
  /// Converged on the last reference.
  bool complete = false;
};

inline AdvanceResult advance_scenario(const Scenario& scenario, std::size_t index,
                                      const Eigen::VectorXd& e) {
  if (index >= scenario.references.size()) throw DomainError("advance_scenario: bad index");
  AdvanceResult r{index, false, false};
  if (!check_converged(e, scenario.references[index].threshold)) return r;
  if (index + 1 == scenario.references.size()) {
    r.complete = true;
  } else {
    r.index = index + 1;
    r.advanced = true;
  }
  return r;
}

}  // namespace shapeservo
