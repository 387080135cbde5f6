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

// Planar reference generation: a clicked end-effector target (pixel + depth,
// optional tangent) becomes an N-section constant-curvature chain and its
// feature vector.
//
// Geometry lives in a plane through the robot base axis. Planar coordinates
// are (lateral, forward): forward along the base tangent, lateral along
// base-frame direction (cos azimuth, sin azimuth, 0). A planar arc carries a
// signed bend angle; positive bends toward +lateral.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapeservo/camera.hpp"
#include "shapeservo/errors.hpp"
#include "shapeservo/kinematics.hpp"

namespace shapeservo {

struct PlanarArc {
  double length = 0.0;  // mm
  double bend = 0.0;    // signed bend angle, rad
};

struct PlanarPose {
  double lateral = 0.0;  // mm
  double forward = 0.0;  // mm
  double heading = 0.0;  // tangent angle from the base axis toward +lateral
};

using PlanarChain = std::vector<PlanarArc>;

/// Displacement of an arc expressed in its start frame (lateral, forward).
inline Eigen::Vector2d planar_arc_displacement(const PlanarArc& a) {
  return a.length * Eigen::Vector2d(detail::versc(a.bend), detail::sinc(a.bend));
}

/// Rotate a start-frame vector by `heading` into the plane frame.
inline Eigen::Vector2d rotate_heading(const Eigen::Vector2d& v, double heading) {
  const double c = std::cos(heading), s = std::sin(heading);
  return {v.x() * c + v.y() * s, -v.x() * s + v.y() * c};
}

inline PlanarPose planar_end_pose(std::span<const PlanarArc> chain) {
  PlanarPose p;
  for (const auto& a : chain) {
    const Eigen::Vector2d d = rotate_heading(planar_arc_displacement(a), p.heading);
    p.lateral += d.x();
    p.forward += d.y();
    p.heading += a.bend;
  }
  return p;
}

/// Points along the chain, `per_arc` samples per arc plus the base point.
inline std::vector<Eigen::Vector2d> sample_chain(std::span<const PlanarArc> chain, int per_arc = 16) {
  std::vector<Eigen::Vector2d> pts{Eigen::Vector2d::Zero()};
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  double heading = 0.0;
  for (const auto& a : chain) {
    for (int k = 1; k <= per_arc; ++k) {
      const double u = static_cast<double>(k) / per_arc;
      pts.push_back(origin + rotate_heading(planar_arc_displacement({u * a.length, u * a.bend}), heading));
    }
    origin = pts.back();
    heading += a.bend;
  }
  return pts;
}

inline ArcParams to_arc(const PlanarArc& a, double azimuth) {
  ArcParams arc;
  arc.length = a.length;
  if (a.bend == 0.0) return arc;
  arc.curvature = std::abs(a.bend) / a.length;
  arc.direction = detail::wrap_angle(a.bend > 0.0 ? azimuth : azimuth + kPi);
  return arc;
}

inline std::vector<ArcParams> to_arcs(std::span<const PlanarArc> chain, double azimuth) {
  std::vector<ArcParams> out;
  for (const auto& a : chain) out.push_back(to_arc(a, azimuth));
  return out;
}

/// Inverse of to_arcs; every arc must bend within the plane.
inline PlanarChain to_planar(std::span<const ArcParams> arcs, double azimuth, double tol = 1e-9) {
  PlanarChain out;
  for (const auto& arc : arcs) {
    if (arc.curvature == 0.0 || arc.bend_angle() < tol) {
      out.push_back({arc.length, 0.0});
      continue;
    }
    const double d = detail::wrap_angle(arc.direction - azimuth);
    if (std::abs(d) < tol) {
      out.push_back({arc.length, arc.bend_angle()});
    } else if (std::abs(std::abs(d) - kPi) < tol) {
      out.push_back({arc.length, -arc.bend_angle()});
    } else {
      throw DomainError("to_planar: arc does not bend in the reference plane");
    }
  }
  return out;
}

/// Splits the longest arc in half (same curvature) until the chain has
/// `count` arcs. The curve itself is unchanged.
inline PlanarChain insert_segments(PlanarChain chain, std::size_t count) {
  if (chain.empty()) throw DomainError("insert_segments: empty chain");
  while (chain.size() < count) {
    const auto it = std::max_element(chain.begin(), chain.end(),
                                     [](const PlanarArc& a, const PlanarArc& b) { return a.length < b.length; });
    const PlanarArc half{0.5 * it->length, 0.5 * it->bend};
    *it = half;
    chain.insert(it, half);
  }
  return chain;
}

/// Each piece split into `pieces` equal arcs.
inline PlanarChain split_evenly(std::span<const PlanarArc> pieces, std::span<const std::size_t> counts) {
  PlanarChain out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const double n = static_cast<double>(counts[i]);
    for (std::size_t k = 0; k < counts[i]; ++k) out.push_back({pieces[i].length / n, pieces[i].bend / n});
  }
  return out;
}

// --- two-segment solve -----------------------------------------------------

/// All two-arc chains reaching `target` (position and heading) whose first
/// arc bends by `first_bend`. Returns nothing when the lengths are not both
/// positive. The collinear case picks equal lengths.
inline std::optional<std::array<PlanarArc, 2>> two_segment_at(const PlanarPose& target, double first_bend) {
  const double second_bend = target.heading - first_bend;
  const Eigen::Vector2d c1 = planar_arc_displacement({1.0, first_bend});
  const Eigen::Vector2d c2 = rotate_heading(planar_arc_displacement({1.0, second_bend}), first_bend);
  const Eigen::Vector2d t(target.lateral, target.forward);
  Eigen::Matrix2d a;
  a << c1, c2;
  const double det = a.determinant();
  double s1 = 0.0, s2 = 0.0;
  if (std::abs(det) > 1e-12) {
    const Eigen::Vector2d s = a.inverse() * t;
    s1 = s(0);
    s2 = s(1);
  } else {
    // parallel columns: c2 = r c1; target must lie on the same line
    const double r = c2.dot(c1) / c1.squaredNorm();
    if (std::abs(c1.x() * t.y() - c1.y() * t.x()) > 1e-9 * std::max(1.0, t.norm())) return std::nullopt;
    if (std::abs(1.0 + r) < 1e-12) return std::nullopt;
    s1 = s2 = t.dot(c1) / c1.squaredNorm() / (1.0 + r);
  }
  if (!(s1 > 0.0 && s2 > 0.0)) return std::nullopt;
  return std::array<PlanarArc, 2>{PlanarArc{s1, first_bend}, PlanarArc{s2, second_bend}};
}

/// Candidate first-arc bends, deterministic order.
inline std::vector<double> bend_grid(int half_steps = 720) {
  std::vector<double> g;
  for (int k = -half_steps + 1; k < half_steps; ++k) g.push_back(kPi * k / half_steps);
  return g;
}

struct SegmentLimits {
  double min_length = 80.0;
  double max_length = 200.0;
  double max_bend = kPi;  // exclusive
};

inline double limit_violation(const PlanarArc& a, const SegmentLimits& lim) {
  return std::max(0.0, lim.min_length - a.length) + std::max(0.0, a.length - lim.max_length) +
         std::max(0.0, std::abs(a.bend) - lim.max_bend + 1e-12);
}

/// Two tangent-continuous arcs from the base to `target`, minimising
/// (s1 - s2)^2 within the limits.
inline std::array<PlanarArc, 2> two_segment_ik(const PlanarPose& target, const SegmentLimits& first,
                                               const SegmentLimits& second) {
  std::optional<std::array<PlanarArc, 2>> best;
  double best_cost = std::numeric_limits<double>::infinity();
  double best_residual = std::numeric_limits<double>::infinity();
  auto evaluate = [&](double b1) {
    const auto sol = two_segment_at(target, b1);
    if (!sol) return false;
    const double violation = limit_violation((*sol)[0], first) + limit_violation((*sol)[1], second);
    if (violation > 0.0) {
      best_residual = std::min(best_residual, violation);
      return false;
    }
    const double ds = (*sol)[0].length - (*sol)[1].length;
    // tiny bend penalty prefers the straighter of equally balanced chains
    const double cost = ds * ds + 1e-9 * (b1 * b1 + (*sol)[1].bend * (*sol)[1].bend);
    if (cost < best_cost) {
      best_cost = cost;
      best = sol;
    }
    return true;
  };
  const auto grid = bend_grid();
  const double step = grid[1] - grid[0];
  bool any = false;
  for (double b1 : grid) any = evaluate(b1) || any;
  if (!any) {
    // feasible windows narrower than the grid step
    for (double b1 : grid) {
      for (int f = 1; f < 16; ++f) evaluate(b1 + step * f / 16.0);
    }
  }
  if (!best) throw UnreachableError("two_segment_ik: no admissible two-arc solution", best_residual);
  return *best;
}

// --- optimisation ----------------------------------------------------------

enum class BalanceCriterion { Length, Curvature };

inline const char* to_string(BalanceCriterion c) {
  return c == BalanceCriterion::Length ? "balance-length" : "balance-curvature";
}

inline BalanceCriterion balance_criterion_from_string(const std::string& s) {
  if (s == "balance-length") return BalanceCriterion::Length;
  if (s == "balance-curvature") return BalanceCriterion::Curvature;
  throw DomainError("unknown balance criterion '" + s + "'");
}

/// Disc obstacle in planar (lateral, forward) coordinates, mm.
struct DiscObstacle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

struct ReferenceOptions {
  BalanceCriterion criterion = BalanceCriterion::Length;
  std::vector<DiscObstacle> obstacles;
  double obstacle_margin = 10.0;  // mm
};

inline double criterion_value(std::span<const PlanarArc> chain, BalanceCriterion c) {
  double mean = 0.0;
  std::vector<double> v;
  for (const auto& a : chain) {
    v.push_back(c == BalanceCriterion::Length ? a.length : std::abs(a.bend) / a.length);
    mean += v.back() / static_cast<double>(chain.size());
  }
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean) / static_cast<double>(chain.size());
  return var;
}

/// Cable lengths depend on the bending direction, so the plane azimuth is
/// part of the check.
inline bool chain_admissible(std::span<const PlanarArc> chain, double azimuth, const RobotConfig& config) {
  if (chain.size() != config.size()) return false;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (!(chain[i].length > 0.0) || !(std::abs(chain[i].bend) < kPi)) return false;
    if (!arc_admissible(to_arc(chain[i], azimuth), config.sections[i])) return false;
  }
  return true;
}

inline bool chain_clear(std::span<const PlanarArc> chain, const ReferenceOptions& opt) {
  if (opt.obstacles.empty()) return true;
  for (const auto& p : sample_chain(chain)) {
    for (const auto& o : opt.obstacles) {
      if ((p - o.center).norm() < o.radius + opt.obstacle_margin) return false;
    }
  }
  return true;
}

/// How far (mm, rad) an arc is from admissibility for a section.
inline double section_violation(const PlanarArc& a, double azimuth, const SectionSpec& spec) {
  double v = limit_violation(a, {spec.min_length, spec.max_length, kPi});
  const ArcParams arc = to_arc(a, azimuth);
  const double kd = arc.curvature * spec.tendon_radius;
  if (kd >= 1.0) return v + (kd - 1.0) * a.length + 1e-6;
  const Vec3 c = arc_to_cables(arc, spec.tendon_radius).vec();
  v += std::max(0.0, spec.min_length - c.minCoeff()) + std::max(0.0, c.maxCoeff() - spec.max_length);
  return v;
}

namespace detail {

struct SearchResult {
  std::optional<PlanarChain> best;
  double best_value = std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();  // of infeasible candidates
  bool any_admissible = false;  // ignoring obstacles
};

/// Deterministic search over first-piece bend and how many sections go on
/// each of the two pieces (pieces split evenly).
inline SearchResult search_chains(const PlanarPose& target, double azimuth, const RobotConfig& config,
                                  const ReferenceOptions& opt) {
  SearchResult r;
  const std::size_t n = config.size();
  // true when the chain is admissible and obstacle-free
  auto consider = [&](const PlanarChain& chain) -> bool {
    if (!chain_admissible(chain, azimuth, config)) {
      double v = 0.0;
      for (std::size_t i = 0; i < chain.size(); ++i) v += section_violation(chain[i], azimuth, config.sections[i]);
      r.residual = std::min(r.residual, v);
      return false;
    }
    r.any_admissible = true;
    if (!chain_clear(chain, opt)) return false;
    const double value = criterion_value(chain, opt.criterion);
    double bend2 = 0.0;
    for (const auto& a : chain) bend2 += a.bend * a.bend;
    const double cost = value + 1e-9 * bend2;
    if (cost < r.best_value) {
      r.best_value = cost;
      r.best = chain;
    }
    return true;
  };
  if (n == 1) {
    // single arc: position fixes the heading
    const double rho = std::abs(target.lateral);
    const double bend = std::copysign(2.0 * std::atan2(rho, target.forward), target.lateral);
    const double chord2 = rho * rho + target.forward * target.forward;
    if (target.forward > 0.0 && std::abs(detail::wrap_angle(bend - target.heading)) < 1e-9) {
      const double length = rho == 0.0 ? target.forward : std::atan2(rho, target.forward) * chord2 / rho;
      consider({{length, bend}});
    }
    return r;
  }
  const auto grid = bend_grid();
  const double step = grid[1] - grid[0];
  for (std::size_t n1 = 1; n1 < n; ++n1) {
    const std::array<std::size_t, 2> counts{n1, n - n1};
    auto evaluate = [&](double b1) {
      const auto sol = two_segment_at(target, b1);
      return sol && consider(split_evenly(*sol, counts));
    };
    // coarse pass, then a fine pass around every feasible grid point and
    // its neighbours (feasible windows can be narrower than the grid step)
    std::vector<std::size_t> seeds;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (evaluate(grid[k])) seeds.push_back(k);
    }
    if (seeds.empty()) {
      for (std::size_t k = 0; k < grid.size(); ++k) seeds.push_back(k);
    }
    std::vector<bool> refined(grid.size(), false);
    for (std::size_t k : seeds) {
      for (std::size_t j = k == 0 ? 0 : k - 1; j <= std::min(k + 1, grid.size() - 1); ++j) {
        if (refined[j]) continue;
        refined[j] = true;
        for (int f = 1; f < 16; ++f) evaluate(grid[j] + step * f / 16.0);
      }
    }
  }
  return r;
}

}  // namespace detail

/// Re-distributes the sections of `arcs` (all bending in the plane at
/// `azimuth`) to reduce the balance criterion while holding the end pose and
/// staying clear of obstacles. Returns the input unless strictly improved.
inline std::vector<ArcParams> optimize_reference(std::span<const ArcParams> arcs, double azimuth,
                                                 const RobotConfig& config, const ReferenceOptions& opt) {
  if (arcs.size() != config.size()) throw SizeMismatch("optimize_reference: arc count");
  const PlanarChain input = to_planar(arcs, azimuth);
  const auto found = detail::search_chains(planar_end_pose(input), azimuth, config, opt);
  const bool input_ok = chain_admissible(input, azimuth, config) && chain_clear(input, opt);
  if (input_ok) {
    if (found.best && criterion_value(*found.best, opt.criterion) <
                          criterion_value(input, opt.criterion) - 1e-12) {
      return to_arcs(*found.best, azimuth);
    }
    return {arcs.begin(), arcs.end()};
  }
  if (!found.best) throw InfeasibleError("optimize_reference: no admissible obstacle-free chain");
  return to_arcs(*found.best, azimuth);
}

inline FeatureVector reference_features(std::span<const ArcParams> arcs, const RobotConfig& config,
                                        const Camera& cam) {
  return extract_shape_features(config, arcs, cam);
}

struct GeneratedReference {
  double azimuth = 0.0;
  PlanarPose target;
  PlanarChain chain;
  std::vector<ArcParams> arcs;
  FeatureVector features;
};

/// Reference whose end effector sits at `target_world`. The plane contains
/// the base axis and the target. Without an explicit tangent the heading of
/// the single arc through the target is tried first, then headings at
/// growing offsets from it.
inline GeneratedReference generate_reference(const Vec3& target_world, const RobotConfig& config,
                                             const Camera& cam, const ReferenceOptions& opt = {},
                                             std::optional<double> tangent = std::nullopt) {
  const Vec3 p = config.base.inverse() * target_world;
  GeneratedReference out;
  const double rho = std::hypot(p.x(), p.y());
  out.azimuth = rho > 0.0 ? std::atan2(p.y(), p.x()) : 0.0;
  out.target.lateral = rho;
  out.target.forward = p.z();
  const double natural = 2.0 * std::atan2(rho, p.z());
  std::vector<double> headings{tangent.value_or(natural)};
  if (!tangent) {
    for (int k = 1; k <= 90; ++k) {
      for (int sign : {1, -1}) {
        const double h = natural + sign * k * kPi / 90.0;
        if (std::abs(h) < 1.5 * kPi) headings.push_back(h);
      }
    }
  }
  double residual = std::numeric_limits<double>::infinity();
  bool blocked = false;
  for (double h : headings) {
    out.target.heading = h;
    const auto found = detail::search_chains(out.target, out.azimuth, config, opt);
    blocked = blocked || found.any_admissible;
    residual = std::min(residual, found.residual);
    if (found.best) {
      out.chain = *found.best;
      out.arcs = to_arcs(out.chain, out.azimuth);
      out.features = reference_features(out.arcs, config, cam);
      return out;
    }
  }
  if (blocked) throw InfeasibleError("generate_reference: every admissible chain hits an obstacle");
  throw UnreachableError("generate_reference: target is outside the workspace", residual);
}

/// Target from a clicked pixel and a depth (m) along its camera ray.
inline GeneratedReference generate_reference(const Eigen::Vector2d& pixel, double depth_m,
                                             const RobotConfig& config, const Camera& cam,
                                             const ReferenceOptions& opt = {},
                                             std::optional<double> tangent = std::nullopt) {
  return generate_reference(backproject(pixel, depth_m, cam), config, cam, opt, tangent);
}

}  // namespace shapeservo
