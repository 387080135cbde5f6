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

// Synthetic eye-to-body pinhole camera and hybrid (pixel + log depth) shape
// features. No lens distortion.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "shapeservo/errors.hpp"
#include "shapeservo/kinematics.hpp"

namespace shapeservo {

/// Depth enters the log feature in meters.
inline constexpr double kDepthUnitsPerMm = 1e-3;

struct CameraIntrinsics {
  double focal = 600.0;  // px
  Eigen::Vector2d principal_point{640.0, 360.0};
  int width = 1280;
  int height = 720;
};

struct CameraExtrinsics {
  RigidTransform world_to_camera = RigidTransform::Identity();
};

struct Camera {
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
};

/// Default eye-to-body view: optical center 1 m in front of the robot base
/// (world -y), 250 mm above it, looking along world +y. Image x follows
/// world +x, image y follows world -z.
inline Camera default_camera() {
  Camera cam;
  Mat3 camera_axes_in_world;
  camera_axes_in_world.col(0) = Vec3::UnitX();
  camera_axes_in_world.col(1) = -Vec3::UnitZ();
  camera_axes_in_world.col(2) = Vec3::UnitY();
  RigidTransform camera_to_world = RigidTransform::Identity();
  camera_to_world.linear() = camera_axes_in_world;
  camera_to_world.translation() = Vec3(0.0, -1000.0, 250.0);
  cam.extrinsics.world_to_camera = camera_to_world.inverse();
  return cam;
}

struct ShapeFeature {
  double x = 0.0;          // px
  double y = 0.0;          // px
  double log_depth = 0.0;  // log of depth in meters

  double depth_mm() const { return std::exp(log_depth) / kDepthUnitsPerMm; }
};

/// One feature per section tip, base to tip.
using FeatureVector = std::vector<ShapeFeature>;

/// [x1, y1, log z1, x2, ...]
inline Eigen::VectorXd flatten(const FeatureVector& f) {
  Eigen::VectorXd v(3 * static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(3 * i);
    v(k) = f[i].x;
    v(k + 1) = f[i].y;
    v(k + 2) = f[i].log_depth;
  }
  return v;
}

inline FeatureVector unflatten(const Eigen::VectorXd& v) {
  if (v.size() % 3 != 0) throw SizeMismatch("unflatten: length is not a multiple of 3");
  FeatureVector f(static_cast<std::size_t>(v.size() / 3));
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(3 * i);
    f[i] = {v(k), v(k + 1), v(k + 2)};
  }
  return f;
}

struct Projection {
  Eigen::Vector2d pixel;
  double depth_m = 0.0;
};

inline Projection project(const Vec3& p_world, const Camera& cam) {
  const Vec3 pc = cam.extrinsics.world_to_camera * p_world;
  if (!(pc.z() > 0.0)) throw DepthError("project: point is behind the camera");
  const auto& k = cam.intrinsics;
  return {k.principal_point + k.focal * Eigen::Vector2d(pc.x() / pc.z(), pc.y() / pc.z()),
          pc.z() * kDepthUnitsPerMm};
}

inline ShapeFeature to_feature(const Projection& p) {
  return {p.pixel.x(), p.pixel.y(), std::log(p.depth_m)};
}

/// World point whose projection is (pixel, depth_m).
inline Vec3 backproject(const Eigen::Vector2d& pixel, double depth_m, const Camera& cam) {
  if (!(depth_m > 0.0)) throw DepthError("backproject: depth must be positive");
  const auto& k = cam.intrinsics;
  const double z = depth_m / kDepthUnitsPerMm;
  const Eigen::Vector2d n = (pixel - k.principal_point) / k.focal;
  return cam.extrinsics.world_to_camera.inverse() * Vec3(n.x() * z, n.y() * z, z);
}

inline Vec3 backproject(const ShapeFeature& f, const Camera& cam) {
  return backproject({f.x, f.y}, std::exp(f.log_depth), cam);
}

/// Features of an arbitrary list of world points (base to tip).
inline FeatureVector project_points(std::span<const Vec3> points, const Camera& cam) {
  FeatureVector out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    try {
      out.push_back(to_feature(project(points[i], cam)));
    } catch (const DepthError&) {
      throw VisibilityError("tip is not in front of the camera", i);
    }
  }
  return out;
}

/// Hybrid features of every section tip for the given arcs.
inline FeatureVector extract_shape_features(const RobotConfig& config,
                                            std::span<const ArcParams> arcs,
                                            const Camera& cam) {
  std::vector<Vec3> tips;
  for (const auto& t : robot_forward(config, arcs)) tips.push_back(t.translation());
  return project_points(tips, cam);
}

/// Seeded Gaussian perturbation: pixels in px, depth in meters (applied
/// before the log). Deterministic for a given seed.
inline FeatureVector add_feature_noise(const FeatureVector& f, double sigma_px,
                                       double sigma_depth_m, std::uint64_t seed) {
  if (sigma_px < 0.0 || sigma_depth_m < 0.0) {
    throw DomainError("add_feature_noise: sigmas must be non-negative");
  }
  if (sigma_px == 0.0 && sigma_depth_m == 0.0) return f;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  FeatureVector out = f;
  for (auto& feature : out) {
    feature.x += sigma_px * gauss(rng);
    feature.y += sigma_px * gauss(rng);
    const double depth = std::exp(feature.log_depth) + sigma_depth_m * gauss(rng);
    feature.log_depth = std::log(std::max(depth, 1e-6));
  }
  return out;
}

}  // namespace shapeservo
