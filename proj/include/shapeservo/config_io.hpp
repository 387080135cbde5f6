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


// JSON configuration files: robot, camera, gains, simulation and scenario.
//
// Lengths are millimetres unless a file declares {"units": {"length": ...}}
// with "m", "cm" or "mm"; angles are radians. Quaternions are [w, x, y, z].
// Unknown keys are rejected so typos do not silently fall back to defaults.

#pragma once

#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "shapeservo/camera.hpp"
#include "shapeservo/controller.hpp"
#include "shapeservo/errors.hpp"
#include "shapeservo/kinematics.hpp"
#include "shapeservo/log_io.hpp"
#include "shapeservo/plant.hpp"
#include "shapeservo/reference.hpp"

namespace shapeservo {

using nlohmann::json;

inline constexpr const char* kRobotSchema = "shapeservo.robot/1";
inline constexpr const char* kCameraSchema = "shapeservo.camera/1";
inline constexpr const char* kGainsSchema = "shapeservo.gains/1";
inline constexpr const char* kSimSchema = "shapeservo.sim/1";
inline constexpr const char* kScenarioSchema = "shapeservo.scenario/1";
inline constexpr const char* kReferenceSchema = "shapeservo.reference/1";

namespace detail {

inline void check_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  check_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline void check_schema(const json& j, const char* schema, const std::string& where) {
  if (j.contains("schema") && j["schema"] != schema) {
    throw ConfigError(where + ": schema " + j["schema"].dump() + ", expected " + schema);
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

/// mm per declared length unit.
inline double length_scale(const json& j, const std::string& where) {
  if (!j.contains("units")) return 1.0;
  const json& u = j["units"];
  check_keys(u, {"length", "angle"}, where + ".units");
  if (u.contains("angle") && u["angle"] != "rad") throw ConfigError(where + ": angles must be rad");
  const auto unit = get_or<std::string>(u, "length", "mm", where + ".units");
  if (unit == "mm") return 1.0;
  if (unit == "cm") return 10.0;
  if (unit == "m") return 1000.0;
  throw ConfigError(where + ": unknown length unit '" + unit + "'");
}

template <int N>
Eigen::Matrix<double, N, 1> get_vec(const json& j, const char* key, const std::string& where) {
  const auto v = get<std::vector<double>>(j, key, where);
  if (v.size() != N) {
    throw ConfigError(where + "." + key + ": expected " + std::to_string(N) + " numbers");
  }
  return Eigen::Map<const Eigen::Matrix<double, N, 1>>(v.data());
}

inline RigidTransform pose_from_json(const json& j, double scale, const std::string& where) {
  check_keys(j, {"position", "quaternion"}, where);
  RigidTransform t = RigidTransform::Identity();
  if (j.contains("position")) t.translation() = scale * get_vec<3>(j, "position", where);
  if (j.contains("quaternion")) {
    const Eigen::Vector4d q = get_vec<4>(j, "quaternion", where);
    if (std::abs(q.norm() - 1.0) > 1e-6) throw ConfigError(where + ": quaternion is not unit length");
    t.linear() = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).normalized().toRotationMatrix();
  }
  return t;
}

inline json pose_to_json(const RigidTransform& t) {
  const Eigen::Quaterniond q(t.linear());
  const Vec3 p = t.translation();
  return {{"position", {p.x(), p.y(), p.z()}}, {"quaternion", {q.w(), q.x(), q.y(), q.z()}}};
}

}  // namespace detail

// --- robot -----------------------------------------------------------------

inline void validate(const RobotConfig& config) {
  if (config.sections.empty()) throw ConfigError("robot: no sections");
  for (std::size_t i = 0; i < config.size(); ++i) {
    const auto& s = config.sections[i];
    const std::string where = "robot.sections[" + std::to_string(i) + "]";
    if (!(s.tendon_radius > 0.0)) throw ConfigError(where + ": d must be positive");
    if (!(s.min_length > 0.0 && s.min_length < s.max_length)) {
      throw ConfigError(where + ": need 0 < s_min < s_max");
    }
  }
}

inline RobotConfig robot_from_json(const json& j) {
  const std::string where = "robot";
  detail::check_keys(j, {"schema", "units", "sections", "base", "jacobian"}, where);
  detail::check_schema(j, kRobotSchema, where);
  const double scale = detail::length_scale(j, where);
  RobotConfig config;
  if (!j.contains("sections") || !j["sections"].is_array()) {
    throw ConfigError(where + ": 'sections' must be an array");
  }
  for (std::size_t i = 0; i < j["sections"].size(); ++i) {
    const json& s = j["sections"][i];
    const std::string w = where + ".sections[" + std::to_string(i) + "]";
    detail::check_keys(s, {"d", "s_min", "s_max"}, w);
    config.sections.push_back({scale * detail::get<double>(s, "d", w),
                               scale * detail::get<double>(s, "s_min", w),
                               scale * detail::get<double>(s, "s_max", w)});
  }
  if (j.contains("base")) config.base = detail::pose_from_json(j["base"], scale, where + ".base");
  const auto mode = detail::get_or<std::string>(j, "jacobian", "analytic", where);
  if (mode == "analytic") {
    config.jacobian_mode = JacobianMode::Analytic;
  } else if (mode == "finite_difference") {
    config.jacobian_mode = JacobianMode::FiniteDifference;
  } else {
    throw ConfigError(where + ": unknown jacobian mode '" + mode + "'");
  }
  validate(config);
  return config;
}

inline json to_json(const RobotConfig& config) {
  auto sections = json::array();
  for (const auto& s : config.sections) {
    sections.push_back({{"d", s.tendon_radius}, {"s_min", s.min_length}, {"s_max", s.max_length}});
  }
  return {{"schema", kRobotSchema},
          {"units", {{"length", "mm"}, {"angle", "rad"}}},
          {"jacobian", config.jacobian_mode == JacobianMode::Analytic ? "analytic" : "finite_difference"},
          {"base", detail::pose_to_json(config.base)},
          {"sections", sections}};
}

// --- camera ----------------------------------------------------------------

/// "pose" is the camera frame in world coordinates (camera-to-world): +z
/// along the optical axis, +x along image columns, +y along image rows.
inline Camera camera_from_json(const json& j) {
  const std::string where = "camera";
  detail::check_keys(j, {"schema", "units", "focal", "principal_point", "resolution", "pose"}, where);
  detail::check_schema(j, kCameraSchema, where);
  const double scale = detail::length_scale(j, where);
  Camera cam = default_camera();
  auto& k = cam.intrinsics;
  k.focal = detail::get_or<double>(j, "focal", k.focal, where);
  if (j.contains("principal_point")) k.principal_point = detail::get_vec<2>(j, "principal_point", where);
  if (j.contains("resolution")) {
    const auto r = detail::get<std::vector<int>>(j, "resolution", where);
    if (r.size() != 2) throw ConfigError(where + ".resolution: expected [width, height]");
    k.width = r[0];
    k.height = r[1];
  }
  if (!(k.focal > 0.0)) throw ConfigError(where + ": focal must be positive");
  if (k.width <= 0 || k.height <= 0) throw ConfigError(where + ": resolution must be positive");
  if (j.contains("pose")) {
    cam.extrinsics.world_to_camera = detail::pose_from_json(j["pose"], scale, where + ".pose").inverse();
  }
  return cam;
}

inline json to_json(const Camera& cam) {
  const auto& k = cam.intrinsics;
  return {{"schema", kCameraSchema},
          {"units", {{"length", "mm"}, {"angle", "rad"}}},
          {"focal", k.focal},
          {"principal_point", {k.principal_point.x(), k.principal_point.y()}},
          {"resolution", {k.width, k.height}},
          {"pose", detail::pose_to_json(cam.extrinsics.world_to_camera.inverse())}};
}

// --- gains / simulation ----------------------------------------------------

inline const char* to_string(ImageJacobianMode m) {
  return m == ImageJacobianMode::Conventional ? "conventional" : "paper_exact";
}

inline ImageJacobianMode image_jacobian_mode_from_string(const std::string& s) {
  if (s == "conventional") return ImageJacobianMode::Conventional;
  if (s == "paper_exact") return ImageJacobianMode::PaperExact;
  throw ConfigError("unknown image jacobian mode '" + s + "'");
}

inline ControlGains gains_from_json(const json& j) {
  const std::string where = "gains";
  detail::check_keys(j, {"schema", "servo_gain", "damping", "err_threshold", "max_cable_speed",
                         "image_jacobian", "min_depth_mm", "error_weights"},
                     where);
  detail::check_schema(j, kGainsSchema, where);
  ControlGains g;
  g.servo_gain = detail::get_or(j, "servo_gain", g.servo_gain, where);
  g.damping = detail::get_or(j, "damping", g.damping, where);
  g.err_threshold = detail::get_or(j, "err_threshold", g.err_threshold, where);
  g.max_cable_speed = detail::get_or(j, "max_cable_speed", g.max_cable_speed, where);
  g.min_depth_mm = detail::get_or(j, "min_depth_mm", g.min_depth_mm, where);
  g.image_mode = image_jacobian_mode_from_string(
      detail::get_or<std::string>(j, "image_jacobian", to_string(g.image_mode), where));
  if (j.contains("error_weights")) {
    const auto w = detail::get<std::vector<double>>(j, "error_weights", where);
    g.error_weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  }
  try {
    g.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return g;
}

inline json to_json(const ControlGains& g) {
  json j{{"schema", kGainsSchema},
         {"servo_gain", g.servo_gain},
         {"damping", g.damping},
         {"err_threshold", g.err_threshold},
         {"max_cable_speed", g.max_cable_speed},
         {"image_jacobian", to_string(g.image_mode)},
         {"min_depth_mm", g.min_depth_mm}};
  if (g.error_weights.size() != 0) {
    j["error_weights"] = std::vector<double>(g.error_weights.data(), g.error_weights.data() + g.error_weights.size());
  }
  return j;
}

inline SimConfig sim_from_json(const json& j) {
  const std::string where = "sim";
  detail::check_keys(j, {"schema", "dt", "actuator_lag", "max_steps", "dwell_steps", "max_bend",
                         "fit_length_tolerance"},
                     where);
  detail::check_schema(j, kSimSchema, where);
  SimConfig s;
  s.dt = detail::get_or(j, "dt", s.dt, where);
  s.actuator_lag = detail::get_or(j, "actuator_lag", s.actuator_lag, where);
  s.max_steps = detail::get_or(j, "max_steps", s.max_steps, where);
  s.dwell_steps = detail::get_or(j, "dwell_steps", s.dwell_steps, where);
  s.max_bend = detail::get_or(j, "max_bend", s.max_bend, where);
  s.fit_length_tolerance = detail::get_or(j, "fit_length_tolerance", s.fit_length_tolerance, where);
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return s;
}

inline json to_json(const SimConfig& s) {
  return {{"schema", kSimSchema},
          {"dt", s.dt},
          {"actuator_lag", s.actuator_lag},
          {"max_steps", s.max_steps},
          {"dwell_steps", s.dwell_steps},
          {"max_bend", s.max_bend},
          {"fit_length_tolerance", s.fit_length_tolerance}};
}

// --- references / scenarios ------------------------------------------------

inline FeatureVector features_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": features must be an array of [x, y, log_depth_m]");
  FeatureVector f;
  for (const auto& e : j) {
    std::vector<double> v;
    try {
      v = e.get<std::vector<double>>();
    } catch (const json::exception& ex) {
      throw ConfigError(where + ": " + ex.what());
    }
    if (v.size() != 3) throw ConfigError(where + ": each feature is [x, y, log_depth_m]");
    f.push_back({v[0], v[1], v[2]});
  }
  return f;
}

inline std::vector<ArcParams> arcs_from_json(const json& j, double scale, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": arcs must be an array");
  std::vector<ArcParams> arcs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    detail::check_keys(j[i], {"s", "kappa", "phi"}, w);
    ArcParams a{scale * detail::get<double>(j[i], "s", w), detail::get<double>(j[i], "kappa", w) / scale,
                detail::get_or(j[i], "phi", 0.0, w)};
    if (a.curvature < 0.0) {
      a.curvature = -a.curvature;
      a.direction += kPi;
    }
    a.direction = detail::wrap_angle(a.direction);
    arcs.push_back(a);
  }
  return arcs;
}

inline ReferenceOptions reference_options_from_json(const json& j, double scale, const std::string& where) {
  ReferenceOptions opt;
  opt.criterion = balance_criterion_from_string(
      detail::get_or<std::string>(j, "criterion", to_string(opt.criterion), where));
  opt.obstacle_margin = scale * detail::get_or(j, "obstacle_margin", opt.obstacle_margin / scale, where);
  if (j.contains("obstacles")) {
    if (!j["obstacles"].is_array()) throw ConfigError(where + ".obstacles: expected an array");
    for (std::size_t i = 0; i < j["obstacles"].size(); ++i) {
      const json& o = j["obstacles"][i];
      const std::string w = where + ".obstacles[" + std::to_string(i) + "]";
      detail::check_keys(o, {"center", "radius"}, w);
      opt.obstacles.push_back({scale * detail::get_vec<2>(o, "center", w), scale * detail::get<double>(o, "radius", w)});
    }
  }
  return opt;
}

/// Target end-effector specification, resolved by the reference generator.
struct TargetSpec {
  std::optional<Eigen::Vector2d> pixel;
  double depth_m = 0.0;
  std::optional<Vec3> position;  // world, mm
  std::optional<double> tangent;
  ReferenceOptions options;
};

inline TargetSpec target_from_json(const json& j, double scale, const std::string& where) {
  detail::check_keys(j, {"pixel", "depth_m", "position", "tangent", "criterion", "obstacles", "obstacle_margin"},
                     where);
  TargetSpec t;
  if (j.contains("pixel")) {
    t.pixel = detail::get_vec<2>(j, "pixel", where);
    t.depth_m = detail::get<double>(j, "depth_m", where);
    if (!(t.depth_m > 0.0)) throw ConfigError(where + ": depth_m must be positive");
  }
  if (j.contains("position")) t.position = scale * detail::get_vec<3>(j, "position", where);
  if (t.pixel.has_value() == t.position.has_value()) {
    throw ConfigError(where + ": give exactly one of 'pixel' (+ 'depth_m') or 'position'");
  }
  if (j.contains("tangent")) t.tangent = detail::get<double>(j, "tangent", where);
  t.options = reference_options_from_json(j, scale, where);
  return t;
}

inline GeneratedReference resolve_target(const TargetSpec& t, const RobotConfig& config, const Camera& cam) {
  if (t.pixel) return generate_reference(*t.pixel, t.depth_m, config, cam, t.options, t.tangent);
  return generate_reference(*t.position, config, cam, t.options, t.tangent);
}

/// Reference entry as it appears in a scenario file.
inline json to_json(const Reference& r) {
  json j{{"label", r.label}, {"threshold", r.threshold}, {"features", to_json(r.features)}};
  if (r.arcs) j["arcs"] = to_json(std::span<const ArcParams>(*r.arcs));
  return j;
}

/// Generated reference; loadable as a scenario entry.
inline json to_json(const GeneratedReference& g) {
  auto chain = json::array();
  for (const auto& a : g.chain) chain.push_back({{"length", a.length}, {"bend", a.bend}});
  return {{"schema", kReferenceSchema},
          {"azimuth", g.azimuth},
          {"planar_target", {{"lateral", g.target.lateral}, {"forward", g.target.forward}, {"heading", g.target.heading}}},
          {"chain", chain},
          {"arcs", to_json(std::span<const ArcParams>(g.arcs))},
          {"features", to_json(g.features)}};
}

/// One scenario entry: exactly one of "features", "arcs" or "target". When
/// both features and arcs are present (generator output), features win and
/// the arcs are kept for configuration-space reporting.
inline Reference reference_from_json(const json& j, const RobotConfig& config, const Camera& cam,
                                     double scale, double default_threshold, const std::string& where) {
  detail::check_keys(j, {"schema", "label", "threshold", "features", "arcs", "target", "azimuth", "chain", "planar_target"}, where);
  Reference r;
  r.label = detail::get_or<std::string>(j, "label", "", where);
  r.threshold = detail::get_or(j, "threshold", default_threshold, where);
  if (!(r.threshold > 0.0)) throw ConfigError(where + ": threshold must be positive");
  const int kinds = (j.contains("features") ? 1 : 0) + (j.contains("target") ? 1 : 0) +
                    (j.contains("arcs") && !j.contains("features") ? 1 : 0);
  if (kinds != 1) throw ConfigError(where + ": give exactly one of 'features', 'arcs' or 'target'");
  if (j.contains("arcs")) {
    r.arcs = arcs_from_json(j["arcs"], scale, where + ".arcs");
    if (r.arcs->size() != config.size()) throw ConfigError(where + ": arc count != section count");
    for (std::size_t i = 0; i < config.size(); ++i) {
      if (!arc_admissible((*r.arcs)[i], config.sections[i])) {
        throw ConfigError(where + ".arcs[" + std::to_string(i) + "]: not admissible for the section");
      }
    }
  }
  if (j.contains("features")) {
    r.features = features_from_json(j["features"], where + ".features");
  } else if (r.arcs) {
    r.features = reference_features(*r.arcs, config, cam);
  } else {
    const auto g = resolve_target(target_from_json(j["target"], scale, where + ".target"), config, cam);
    r.features = g.features;
    r.arcs = g.arcs;
  }
  if (r.features.size() != config.size()) throw ConfigError(where + ": feature count != section count");
  return r;
}

inline Scenario scenario_from_json(const json& j, const RobotConfig& config, const Camera& cam) {
  const std::string where = "scenario";
  detail::check_keys(j, {"schema", "units", "threshold", "references"}, where);
  detail::check_schema(j, kScenarioSchema, where);
  const double scale = detail::length_scale(j, where);
  const double threshold = detail::get_or(j, "threshold", 0.1, where);
  if (!j.contains("references") || !j["references"].is_array() || j["references"].empty()) {
    throw ConfigError(where + ": 'references' must be a non-empty array");
  }
  Scenario sc;
  for (std::size_t i = 0; i < j["references"].size(); ++i) {
    sc.references.push_back(reference_from_json(j["references"][i], config, cam, scale, threshold,
                                                where + ".references[" + std::to_string(i) + "]"));
  }
  return sc;
}

inline json to_json(const Scenario& sc) {
  auto refs = json::array();
  for (const auto& r : sc.references) refs.push_back(to_json(r));
  return {{"schema", kScenarioSchema}, {"references", refs}};
}

// --- files -----------------------------------------------------------------

inline json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << j.dump(2) << '\n';
}

}  // namespace shapeservo
