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

// Image and shape Jacobians for whole-body shape servoing.
//
// The image Jacobian is block diagonal (one 3x3 block per tip feature), so it
// is inverted block by block. The shape Jacobian stacks the per-tip robot
// Jacobians into a block lower-triangular 3N x 3N map.

#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "shapeservo/camera.hpp"
#include "shapeservo/errors.hpp"
#include "shapeservo/kinematics.hpp"

namespace shapeservo {

enum class ImageJacobianMode {
  /// [[f, 0, -x/z], [0, f, -y/z], [0, 0, -1]]
  Conventional,
  /// Second row leads with 1/f, literally as printed.
  PaperExact,
};

inline constexpr double kDefaultMinDepthMm = 10.0;

/// 3x3 interaction block for one point feature. `x`, `y` are pixel offsets
/// from the principal point, `depth_mm` the point depth.
inline Mat3 image_point_jacobian(double x, double y, double depth_mm, double focal,
                                 ImageJacobianMode mode = ImageJacobianMode::Conventional,
                                 double min_depth_mm = kDefaultMinDepthMm) {
  if (!(depth_mm > min_depth_mm)) {
    throw DepthError("image_point_jacobian: depth " + std::to_string(depth_mm) +
                     " mm is below the minimum " + std::to_string(min_depth_mm) + " mm");
  }
  const double row2 = mode == ImageJacobianMode::PaperExact ? 1.0 / focal : focal;
  Mat3 j;
  j << focal, 0.0, -x / depth_mm,  //
      0.0, row2, -y / depth_mm,    //
      0.0, 0.0, -1.0;
  return j;
}

/// Block-diagonal image Jacobian stored as its diagonal blocks.
struct BlockDiagImageJacobian {
  std::vector<Mat3> blocks;

  std::size_t size() const { return blocks.size(); }

  Eigen::MatrixXd dense() const {
    const auto n = static_cast<Eigen::Index>(blocks.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      m.block<3, 3>(3 * i, 3 * i) = blocks[static_cast<std::size_t>(i)];
    }
    return m;
  }
};

inline BlockDiagImageJacobian block_diag_image_jacobian(
    const FeatureVector& features, const CameraIntrinsics& intrinsics,
    ImageJacobianMode mode = ImageJacobianMode::Conventional,
    double min_depth_mm = kDefaultMinDepthMm) {
  if (features.empty()) throw SizeMismatch("block_diag_image_jacobian: no features");
  BlockDiagImageJacobian out;
  out.blocks.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    try {
      out.blocks.push_back(image_point_jacobian(
          f.x - intrinsics.principal_point.x(), f.y - intrinsics.principal_point.y(),
          f.depth_mm(), intrinsics.focal, mode, min_depth_mm));
    } catch (const DepthError& e) {
      throw IndexedError(e.what(), i);
    }
  }
  return out;
}

/// Damped least-squares pseudoinverse M^T (M M^T + mu^2 I)^-1. With mu = 0
/// and full row rank this is the Moore-Penrose inverse; rank-deficient input
/// with mu = 0 falls back to an SVD-based pseudoinverse.
inline Eigen::MatrixXd damped_pinv(const Eigen::MatrixXd& m, double mu) {
  if (mu < 0.0) throw DomainError("damped_pinv: damping must be non-negative");
  if (m.rows() > m.cols()) {
    // tall: (M^T M + mu^2 I)^-1 M^T, the same operator
    return damped_pinv(m.transpose(), mu).transpose();
  }
  const Eigen::MatrixXd gram =
      m * m.transpose() + mu * mu * Eigen::MatrixXd::Identity(m.rows(), m.rows());
  if (mu == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible()) {
      return m.completeOrthogonalDecomposition().pseudoInverse();
    }
    return m.transpose() * lu.inverse();
  }
  return m.transpose() * gram.ldlt().solve(Eigen::MatrixXd::Identity(m.rows(), m.rows()));
}

/// Pseudoinverse of a block-diagonal image Jacobian, one block at a time.
inline BlockDiagImageJacobian blockwise_pinv(const BlockDiagImageJacobian& j, double mu) {
  BlockDiagImageJacobian out;
  out.blocks.reserve(j.size());
  for (const auto& b : j.blocks) out.blocks.push_back(damped_pinv(b, mu));
  return out;
}

/// Stacked map from all cable velocities to every section tip velocity
/// (world frame). Block (i, j) is zero for j > i.
inline Eigen::MatrixXd build_shape_jacobian(const RobotConfig& config,
                                            std::span<const CableLengths> cables,
                                            bool* near_singular = nullptr) {
  const auto n = static_cast<Eigen::Index>(config.size());
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  bool singular = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto rj = robot_jacobian(config, cables, static_cast<std::size_t>(i));
    singular = singular || rj.near_singular;
    j.block(3 * i, 0, 3, rj.matrix.cols()) = rj.matrix;
  }
  if (near_singular != nullptr) *near_singular = singular;
  return j;
}

}  // namespace shapeservo
