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

// TrajectoryLog serialization: CSV (one row per cycle, values printed with
// 17 significant digits so they round-trip exactly) and JSON.

#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "shapeservo/errors.hpp"
#include "shapeservo/plant.hpp"

namespace shapeservo {

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw DomainError("csv: bad number '" + s + "'");
  return v;
}

}  // namespace detail

/// Column names for an N-section log; sections are numbered from 1.
inline std::vector<std::string> csv_header(std::size_t sections) {
  std::vector<std::string> h{"step", "time", "ref_index", "event"};
  auto per_section = [&](const std::string& prefix, std::initializer_list<const char*> names) {
    for (std::size_t i = 1; i <= sections; ++i) {
      for (const char* n : names) h.push_back(prefix + std::to_string(i) + "_" + n);
    }
  };
  per_section("cable", {"l1", "l2", "l3"});
  per_section("arc", {"s", "kappa", "phi"});
  per_section("feat", {"x", "y", "logz"});
  per_section("ref", {"x", "y", "logz"});
  per_section("err", {"x", "y", "logz"});
  h.push_back("error_norm");
  per_section("cmd", {"l1", "l2", "l3"});
  per_section("vclamp", {"l1", "l2", "l3"});
  per_section("lclamp", {"l1", "l2", "l3"});
  return h;
}

inline void write_csv(std::ostream& os, const TrajectoryLog& log) {
  const auto header = csv_header(log.sections);
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << '\n';
  using detail::fmt_double;
  for (const auto& r : log.records) {
    os << r.step << ',' << fmt_double(r.time) << ',' << r.ref_index << ',' << to_string(r.event);
    for (const auto& c : r.cables) os << ',' << fmt_double(c.l1) << ',' << fmt_double(c.l2) << ',' << fmt_double(c.l3);
    for (const auto& a : r.arcs) {
      os << ',' << fmt_double(a.length) << ',' << fmt_double(a.curvature) << ',' << fmt_double(a.direction);
    }
    for (const auto* fv : {&r.features, &r.reference}) {
      for (const auto& f : *fv) os << ',' << fmt_double(f.x) << ',' << fmt_double(f.y) << ',' << fmt_double(f.log_depth);
    }
    for (Eigen::Index k = 0; k < r.error.size(); ++k) os << ',' << fmt_double(r.error(k));
    os << ',' << fmt_double(r.error_norm);
    for (Eigen::Index k = 0; k < r.command.size(); ++k) os << ',' << fmt_double(r.command(k));
    for (bool b : r.speed_clamped) os << ',' << (b ? 1 : 0);
    for (bool b : r.limit_clamped) os << ',' << (b ? 1 : 0);
    os << '\n';
  }
}

/// Inverse of write_csv. Episode termination is not stored in the CSV; a
/// log containing a completion event reads back as Completed.
inline TrajectoryLog read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DomainError("csv: empty input");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  const auto header = split(line);
  if (header.size() < 29 || (header.size() - 5) % 24 != 0) throw DomainError("csv: unexpected column count");
  TrajectoryLog log;
  log.sections = (header.size() - 5) / 24;
  if (header != csv_header(log.sections)) throw DomainError("csv: unexpected header");
  const std::size_t n = log.sections;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw DomainError("csv: ragged row");
    std::size_t k = 0;
    auto num = [&]() { return detail::parse_double(cells[k++]); };
    TrajectoryRecord r;
    r.step = static_cast<int>(num());
    r.time = num();
    r.ref_index = static_cast<std::size_t>(num());
    r.event = cycle_event_from_string(cells[k++]);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = num(), b = num(), c = num();
      r.cables.push_back({a, b, c});
    }
    for (std::size_t i = 0; i < n; ++i) {
      ArcParams arc;
      arc.length = num();
      arc.curvature = num();
      arc.direction = num();
      r.arcs.push_back(arc);
    }
    for (auto* fv : {&r.features, &r.reference}) {
      for (std::size_t i = 0; i < n; ++i) {
        const double x = num(), y = num(), z = num();
        fv->push_back({x, y, z});
      }
    }
    r.error.resize(3 * static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < r.error.size(); ++j) r.error(j) = num();
    r.error_norm = num();
    r.command.resize(3 * static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < r.command.size(); ++j) r.command(j) = num();
    for (std::size_t j = 0; j < 3 * n; ++j) r.speed_clamped.push_back(num() != 0.0);
    for (std::size_t j = 0; j < 3 * n; ++j) r.limit_clamped.push_back(num() != 0.0);
    log.records.push_back(std::move(r));
  }
  log.termination = log.completed() ? Termination::Completed : Termination::MaxSteps;
  return log;
}

inline void write_csv_file(const std::string& path, const TrajectoryLog& log) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  write_csv(os, log);
}

inline TrajectoryLog read_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  return read_csv(is);
}

// --- JSON -----------------------------------------------------------------

inline nlohmann::json to_json(const FeatureVector& f) {
  auto out = nlohmann::json::array();
  for (const auto& x : f) out.push_back({x.x, x.y, x.log_depth});
  return out;
}

inline nlohmann::json to_json(std::span<const ArcParams> arcs) {
  auto out = nlohmann::json::array();
  for (const auto& a : arcs) out.push_back({{"s", a.length}, {"kappa", a.curvature}, {"phi", a.direction}});
  return out;
}

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline nlohmann::json to_json(const TrajectoryRecord& r) {
  auto cables = nlohmann::json::array();
  for (const auto& c : r.cables) cables.push_back({c.l1, c.l2, c.l3});
  const Eigen::Vector3d task = task_error(r.error);
  return {{"step", r.step},
          {"time", r.time},
          {"ref_index", r.ref_index},
          {"event", to_string(r.event)},
          {"cables", cables},
          {"arcs", to_json(std::span<const ArcParams>(r.arcs))},
          {"features", to_json(r.features)},
          {"reference", to_json(r.reference)},
          {"error", to_json(r.error)},
          {"error_norm", r.error_norm},
          {"task_error_norm", task.norm()},
          {"command", to_json(r.command)},
          {"speed_clamped", r.speed_clamped},
          {"limit_clamped", r.limit_clamped}};
}

inline nlohmann::json to_json(const TrajectoryLog& log) {
  auto records = nlohmann::json::array();
  for (const auto& r : log.records) records.push_back(to_json(r));
  nlohmann::json j{{"schema", "shapeservo.log/1"},
                   {"sections", log.sections},
                   {"termination", to_string(log.termination)},
                   {"records", records}};
  if (log.termination == Termination::Aborted) {
    j["abort_reason"] = log.abort_reason;
    j["abort_step"] = log.abort_step;
  }
  return j;
}

}  // namespace shapeservo
