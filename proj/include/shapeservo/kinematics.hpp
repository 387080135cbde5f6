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

// Constant-curvature kinematics of tendon-driven extensible sections.
//
// Each section is an arc (length, curvature, bending direction). The arc is
// realised as a prismatic-universal-prismatic virtual linkage whose modified
// Denavit-Hartenberg chain reproduces the exact arc tip frame. Cable lengths
// of the three tendons (120 degrees apart, at radius d) map to and from the
// arc in closed form.
//
// Units: mm and rad throughout.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "shapeservo/errors.hpp"

namespace shapeservo {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using RigidTransform = Eigen::Isometry3d;

inline constexpr double kPi = std::numbers::pi;

/// Robot-independent state of one section.
struct ArcParams {
  double length = 0.0;     // arc length s (mm)
  double curvature = 0.0;  // kappa >= 0 (1/mm)
  double direction = 0.0;  // bending direction phi in (-pi, pi]

  double bend_angle() const { return curvature * length; }
};

/// Tendon lengths of one section (mm).
struct CableLengths {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;

  Vec3 vec() const { return {l1, l2, l3}; }
  static CableLengths from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
  double mean() const { return (l1 + l2 + l3) / 3.0; }
};

/// Joint values of the virtual linkage.
struct PupJoints {
  double plane_angle = 0.0;      // revolute, selects the bending plane
  double proximal_length = 0.0;  // prismatic, base to universal joint
  double bend_angle = 0.0;       // revolute, total bend of the arc
  double distal_length = 0.0;    // prismatic, universal joint to tip
  double unroll_angle = 0.0;     // revolute, equals -plane_angle
};

struct SectionSpec {
  double tendon_radius = 20.0;  // d (mm)
  double min_length = 80.0;
  double max_length = 200.0;
};

enum class JacobianMode { Analytic, FiniteDifference };

struct RobotConfig {
  std::vector<SectionSpec> sections;
  RigidTransform base = RigidTransform::Identity();
  JacobianMode jacobian_mode = JacobianMode::Analytic;

  std::size_t size() const { return sections.size(); }
};

/// Below this bend angle the tangent-intersection length and the closed-form
/// arc use their Taylor series.
inline constexpr double kStraightBendThreshold = 1e-6;

/// Below this curvature the Jacobian uses the straight-limit form of the
/// bending-direction column and flags the state as near-singular.
inline constexpr double kCurvatureFloor = 1e-6;

namespace detail {

/// sin(t) / t
inline double sinc(double t) {
  if (std::abs(t) < 1e-4) {
    const double t2 = t * t;
    return 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
  }
  return std::sin(t) / t;
}

/// (1 - cos(t)) / t
inline double versc(double t) {
  if (std::abs(t) < 1e-4) {
    const double t2 = t * t;
    return t / 2.0 - t * t2 / 24.0 + t * t2 * t2 / 720.0;
  }
  return (1.0 - std::cos(t)) / t;
}

/// tan(x) / x, 4th-order series below the straight threshold.
inline double tanc(double x) {
  if (std::abs(2.0 * x) < kStraightBendThreshold) {
    const double x2 = x * x;
    return 1.0 + x2 / 3.0 + 2.0 * x2 * x2 / 15.0;
  }
  return std::tan(x) / x;
}

/// d/dx (tan(x) / x)
inline double tanc_derivative(double x) {
  if (std::abs(x) < 0.05) {
    const double x2 = x * x;
    return x * (2.0 / 3.0 +
                x2 * (8.0 / 15.0 + x2 * (102.0 / 315.0 + x2 * 496.0 / 2835.0)));
  }
  const double c = std::cos(x);
  return (x / (c * c) - std::tan(x)) / (x * x);
}

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

inline Mat3 rot_x(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix();
}
inline Mat3 rot_z(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
}

/// One row of a modified (Craig) D-H table: Rx(alpha) Tx(a) Rz(theta) Tz(d).
struct DhRow {
  double a;
  double alpha;
  double d;
  double theta;
  bool revolute;  // which of d/theta is the joint variable
};

inline Eigen::Matrix4d dh_transform(const DhRow& r) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  const double ca = std::cos(r.alpha), sa = std::sin(r.alpha);
  const double ct = std::cos(r.theta), st = std::sin(r.theta);
  m << ct, -st, 0.0, r.a,            //
      st * ca, ct * ca, -sa, -sa * r.d,  //
      st * sa, ct * sa, ca, ca * r.d,    //
      0.0, 0.0, 0.0, 1.0;
  return m;
}

/// Derivative of dh_transform with respect to the row's joint variable.
inline Eigen::Matrix4d dh_derivative(const DhRow& r) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  const double ca = std::cos(r.alpha), sa = std::sin(r.alpha);
  const double ct = std::cos(r.theta), st = std::sin(r.theta);
  if (r.revolute) {
    m(0, 0) = -st;
    m(0, 1) = -ct;
    m(1, 0) = ct * ca;
    m(1, 1) = -st * ca;
    m(2, 0) = ct * sa;
    m(2, 1) = -st * sa;
  } else {
    m(1, 3) = -sa;
    m(2, 3) = ca;
  }
  return m;
}

/// Virtual-linkage table for one section, evaluated at q.
inline std::array<DhRow, 5> pup_table(const PupJoints& q) {
  return {{
      {0.0, 0.0, 0.0, q.plane_angle, true},
      {0.0, 0.0, q.proximal_length, 0.0, false},
      {0.0, -kPi / 2.0, 0.0, q.bend_angle, true},
      {0.0, kPi / 2.0, q.distal_length, 0.0, false},
      {0.0, 0.0, 0.0, q.unroll_angle, true},
  }};
}

inline RigidTransform to_isometry(const Eigen::Matrix4d& m) {
  RigidTransform t = RigidTransform::Identity();
  t.linear() = m.topLeftCorner<3, 3>();
  t.translation() = m.topRightCorner<3, 1>();
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cable <-> arc mappings

/// Tendon lengths of a section bent along `arc`. Throws DomainError when
/// kappa * d >= 1 (a cable could become non-positive).
inline CableLengths arc_to_cables(const ArcParams& arc, double tendon_radius) {
  const double kd = arc.curvature * tendon_radius;
  if (!(kd < 1.0)) {
    throw DomainError("arc_to_cables: curvature * tendon radius must be < 1 (got " +
                      std::to_string(kd) + ")");
  }
  const double s = arc.length;
  const double phi = arc.direction;
  return {s * (1.0 - kd * std::sin(phi)),
          s * (1.0 + kd * std::sin(kPi / 3.0 + phi)),
          s * (1.0 - kd * std::cos(kPi / 6.0 + phi))};
}

/// Inverse of arc_to_cables. Straight sections get direction 0.
inline ArcParams cables_to_arc(const CableLengths& c, double tendon_radius) {
  if (!(c.l1 > 0.0 && c.l2 > 0.0 && c.l3 > 0.0)) {
    throw DomainError("cables_to_arc: cable lengths must be positive");
  }
  const double sum = c.l1 + c.l2 + c.l3;
  // l1^2 + l2^2 + l3^2 - l1 l2 - l2 l3 - l3 l1, written without cancellation
  const double a = c.l1 - c.l2, b = c.l2 - c.l3, e = c.l3 - c.l1;
  const double disc = 0.5 * (a * a + b * b + e * e);
  ArcParams arc;
  arc.length = sum / 3.0;
  arc.curvature = 2.0 * std::sqrt(std::max(disc, 0.0)) / (tendon_radius * sum);
  if (arc.curvature == 0.0) {
    arc.direction = 0.0;
    return arc;
  }
  // kappa*d*sin(phi) = 1 - l1/s ; kappa*d*cos(phi) = (l2 - l3) / (sqrt(3) s)
  const double s = arc.length;
  arc.direction = std::atan2(1.0 - c.l1 / s, (c.l2 - c.l3) / (std::sqrt(3.0) * s));
  return arc;
}

// ---------------------------------------------------------------------------
// Virtual linkage

/// Joint values of the linkage equivalent to `arc`. The two prismatic links
/// meet where the base and tip tangents intersect.
inline PupJoints arc_to_pup(const ArcParams& arc) {
  const double theta = arc.bend_angle();
  if (!(theta < kPi)) {
    throw DomainError("arc_to_pup: bend angle must be < pi (got " +
                      std::to_string(theta) + ")");
  }
  // tan(theta/2) / kappa == (s/2) * tan(x)/x with x = theta/2
  const double link = 0.5 * arc.length * detail::tanc(0.5 * theta);
  return {arc.direction, link, theta, link, -arc.direction};
}

inline RigidTransform pup_forward(const PupJoints& q) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (const auto& row : detail::pup_table(q)) m = m * detail::dh_transform(row);
  return detail::to_isometry(m);
}

/// Tip frame of a section relative to its base, through the D-H chain.
inline RigidTransform section_forward(const ArcParams& arc) {
  return pup_forward(arc_to_pup(arc));
}

/// Tip frame of a section straight from the constant-curvature arc equations.
inline RigidTransform pcc_closed_form(const ArcParams& arc) {
  const double theta = arc.bend_angle();
  const double s = arc.length;
  const double cp = std::cos(arc.direction), sp = std::sin(arc.direction);
  const double ct = std::cos(theta), st = std::sin(theta);
  RigidTransform t = RigidTransform::Identity();
  Mat3 r;
  r << cp * cp * (ct - 1.0) + 1.0, sp * cp * (ct - 1.0), cp * st,  //
      sp * cp * (ct - 1.0), cp * cp * (1.0 - ct) + ct, sp * st,    //
      -cp * st, -sp * st, ct;
  t.linear() = r;
  const double radial = s * detail::versc(theta);
  t.translation() = Vec3(radial * cp, radial * sp, s * detail::sinc(theta));
  return t;
}

/// World-frame tip frames of every section (base * T1 * ... * Ti).
inline std::vector<RigidTransform> robot_forward(const RobotConfig& config,
                                                 std::span<const ArcParams> arcs) {
  if (arcs.size() != config.size()) {
    throw SizeMismatch("robot_forward: expected " + std::to_string(config.size()) +
                       " arcs, got " + std::to_string(arcs.size()));
  }
  std::vector<RigidTransform> tips;
  tips.reserve(arcs.size());
  RigidTransform frame = config.base;
  for (const auto& arc : arcs) {
    frame = frame * section_forward(arc);
    tips.push_back(frame);
  }
  return tips;
}

inline std::vector<ArcParams> cables_to_arcs(const RobotConfig& config,
                                             std::span<const CableLengths> cables) {
  if (cables.size() != config.size()) {
    throw SizeMismatch("cables_to_arcs: expected " + std::to_string(config.size()) +
                       " cable triples, got " + std::to_string(cables.size()));
  }
  std::vector<ArcParams> arcs;
  arcs.reserve(cables.size());
  for (std::size_t i = 0; i < cables.size(); ++i) {
    arcs.push_back(cables_to_arc(cables[i], config.sections[i].tendon_radius));
  }
  return arcs;
}

inline std::vector<CableLengths> arcs_to_cables(const RobotConfig& config,
                                                std::span<const ArcParams> arcs) {
  if (arcs.size() != config.size()) {
    throw SizeMismatch("arcs_to_cables: size mismatch");
  }
  std::vector<CableLengths> out;
  out.reserve(arcs.size());
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    out.push_back(arc_to_cables(arcs[i], config.sections[i].tendon_radius));
  }
  return out;
}

/// World positions of all section tips for a cable state.
inline std::vector<Vec3> tip_positions(const RobotConfig& config,
                                       std::span<const CableLengths> cables) {
  const auto arcs = cables_to_arcs(config, cables);
  std::vector<Vec3> out;
  for (const auto& t : robot_forward(config, arcs)) out.push_back(t.translation());
  return out;
}

/// Kinematically admissible for the section: length in range, bend below pi,
/// and every cable within [min_length, max_length].
inline bool arc_admissible(const ArcParams& arc, const SectionSpec& spec,
                           double tolerance = 1e-9) {
  if (arc.length < spec.min_length - tolerance || arc.length > spec.max_length + tolerance) {
    return false;
  }
  if (!(arc.bend_angle() < kPi) || !(arc.curvature * spec.tendon_radius < 1.0)) return false;
  const Vec3 c = arc_to_cables(arc, spec.tendon_radius).vec();
  return c.minCoeff() >= spec.min_length - tolerance &&
         c.maxCoeff() <= spec.max_length + tolerance;
}

// ---------------------------------------------------------------------------
// Jacobians

/// d(T(c) r)/dc: motion of a point `r`, rigidly attached to the section tip
/// frame, per unit change of each of the three cables. Expressed in the
/// section base frame.
///
/// Chain rule: cables -> (s, kappa, kappa*phi) -> linkage joints -> D-H chain.
/// The bending-direction term is carried as (dX/dphi)/kappa times
/// d(kappa*phi), which stays finite for a straight section.
inline Mat3 section_point_jacobian(const CableLengths& cables, double tendon_radius,
                                   const Vec3& r) {
  const ArcParams arc = cables_to_arc(cables, tendon_radius);
  const PupJoints q = arc_to_pup(arc);
  const double s = arc.length;
  const double kappa = arc.curvature;
  const double theta = arc.bend_angle();
  const double cp = std::cos(arc.direction), sp = std::sin(arc.direction);

  // Partials of the arc with respect to the cables.
  const Vec3 l = cables.vec();
  const Eigen::RowVector3d ds = Eigen::RowVector3d::Constant(1.0 / 3.0);
  Mat3 ddelta;  // d(l_k/s - 1)/dl_m
  for (int k = 0; k < 3; ++k) {
    for (int m = 0; m < 3; ++m) {
      ddelta(k, m) = ((k == m) ? 1.0 / s : 0.0) - l(k) / (3.0 * s * s);
    }
  }
  const Eigen::RowVector3d du = (ddelta.row(1) - ddelta.row(2)) / std::sqrt(3.0);
  const Eigen::RowVector3d dw = -ddelta.row(0);
  const Eigen::RowVector3d dkappa = (cp * du + sp * dw) / tendon_radius;
  const Eigen::RowVector3d dkappa_phi = (cp * dw - sp * du) / tendon_radius;

  // Point derivatives with respect to each linkage joint.
  const auto rows = detail::pup_table(q);
  std::array<Eigen::Matrix4d, 5> f;
  for (int k = 0; k < 5; ++k) f[k] = detail::dh_transform(rows[k]);
  std::array<Eigen::Matrix4d, 6> prefix;
  prefix[0].setIdentity();
  for (int k = 0; k < 5; ++k) prefix[k + 1] = prefix[k] * f[k];
  std::array<Eigen::Vector4d, 6> suffix;  // f[k] ... f[4] * r
  suffix[5] = r.homogeneous();
  for (int k = 4; k >= 0; --k) suffix[k] = f[k] * suffix[k + 1];
  std::array<Vec3, 5> dq;
  for (int k = 0; k < 5; ++k) {
    dq[k] = (prefix[k] * detail::dh_derivative(rows[k]) * suffix[k + 1]).head<3>();
  }

  const double x = 0.5 * theta;
  const double link_ds = 0.5 / (std::cos(x) * std::cos(x));
  const double link_dkappa = 0.25 * s * s * detail::tanc_derivative(x);
  const Vec3 dlink = dq[1] + dq[3];
  const Vec3 d_length = dlink * link_ds + dq[2] * kappa;
  const Vec3 d_curv = dlink * link_dkappa + dq[2] * s;

  Vec3 d_dir_over_kappa;
  if (kappa >= kCurvatureFloor) {
    d_dir_over_kappa = (dq[0] - dq[4]) / kappa;
  } else {
    // Straight limit: Rz(phi) [ (z - Ry z)/kappa x Ry r' + z x m / kappa ]
    const Mat3 rz = detail::rot_z(arc.direction);
    const Mat3 ry = Eigen::AngleAxisd(theta, Vec3::UnitY()).toRotationMatrix();
    const Vec3 r_bent = ry * (rz.transpose() * r);
    const Vec3 axis_gap(-s * detail::sinc(theta), 0.0, s * detail::versc(theta));
    const Vec3 lateral(0.0, q.proximal_length * s * detail::sinc(theta), 0.0);
    d_dir_over_kappa = rz * (axis_gap.cross(r_bent) + lateral);
  }

  return d_length * ds + d_curv * dkappa + d_dir_over_kappa * dkappa_phi;
}

struct RobotJacobian {
  Eigen::MatrixXd matrix;      // 3 x 3i
  bool near_singular = false;  // some section had kappa below kCurvatureFloor
};

namespace detail {

inline Eigen::MatrixXd robot_jacobian_fd(const RobotConfig& config,
                                         std::span<const CableLengths> cables,
                                         std::size_t tip, double step = 1e-4) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(3, 3 * (tip + 1));
  std::vector<CableLengths> work(cables.begin(), cables.end());
  for (std::size_t sec = 0; sec <= tip; ++sec) {
    for (int k = 0; k < 3; ++k) {
      Vec3 v = cables[sec].vec();
      v(k) += step;
      work[sec] = CableLengths::from(v);
      const Vec3 plus = tip_positions(config, work)[tip];
      v(k) -= 2.0 * step;
      work[sec] = CableLengths::from(v);
      const Vec3 minus = tip_positions(config, work)[tip];
      work[sec] = cables[sec];
      j.col(static_cast<Eigen::Index>(3 * sec + k)) = (plus - minus) / (2.0 * step);
    }
  }
  return j;
}

}  // namespace detail

/// Map from the stacked cable velocities of sections 0..tip to the world
/// linear velocity of that section's tip. `tip` is zero-based.
inline RobotJacobian robot_jacobian(const RobotConfig& config,
                                    std::span<const CableLengths> cables,
                                    std::size_t tip) {
  if (cables.size() != config.size()) {
    throw SizeMismatch("robot_jacobian: cable state does not match the robot");
  }
  if (tip >= config.size()) {
    throw SizeMismatch("robot_jacobian: section index out of range");
  }
  RobotJacobian out;
  const auto arcs = cables_to_arcs(config, cables);
  for (std::size_t i = 0; i <= tip; ++i) {
    if (arcs[i].curvature < kCurvatureFloor) out.near_singular = true;
  }
  if (config.jacobian_mode == JacobianMode::FiniteDifference) {
    out.matrix = detail::robot_jacobian_fd(config, cables, tip);
    return out;
  }
  const auto frames = robot_forward(config, arcs);
  const Vec3 p = frames[tip].translation();
  out.matrix.resize(3, static_cast<Eigen::Index>(3 * (tip + 1)));
  for (std::size_t j = 0; j <= tip; ++j) {
    const RigidTransform& parent = (j == 0) ? config.base : frames[j - 1];
    const Vec3 r_local = frames[j].inverse() * p;
    out.matrix.block<3, 3>(0, static_cast<Eigen::Index>(3 * j)) =
        parent.linear() *
        section_point_jacobian(cables[j], config.sections[j].tendon_radius, r_local);
  }
  return out;
}

/// Straight robot at its minimum lengths.
inline std::vector<CableLengths> retracted_cables(const RobotConfig& config) {
  std::vector<CableLengths> out;
  for (const auto& s : config.sections) out.push_back({s.min_length, s.min_length, s.min_length});
  return out;
}

}  // namespace shapeservo
