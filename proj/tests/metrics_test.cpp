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

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "shapeservo/log_io.hpp"
#include "shapeservo/metrics.hpp"
#include "test_util.hpp"

namespace shapeservo {
namespace {

/// Log whose every cycle carries the same error against a 1 m reference.
TrajectoryLog constant_error_log(std::size_t sections, const Eigen::VectorXd& e, std::size_t cycles) {
  TrajectoryLog log;
  log.sections = sections;
  for (std::size_t k = 0; k < cycles; ++k) {
    TrajectoryRecord r;
    r.step = static_cast<int>(k);
    r.time = 0.1 * static_cast<double>(k);
    r.reference.assign(sections, ShapeFeature{640, 360, 0.0});
    r.error = e;
    r.error_norm = e.norm();
    log.records.push_back(r);
  }
  return log;
}

TEST(SteadyState, ConvergedLogIsZero) {
  const auto m = steady_state_metrics(constant_error_log(2, Eigen::VectorXd::Zero(6), 20));
  EXPECT_EQ(m.task.image_px, 0.0);
  EXPECT_EQ(m.task.depth_mm, 0.0);
  EXPECT_EQ(m.configuration.image_px, 0.0);
  EXPECT_EQ(m.configuration.depth_mm, 0.0);
}

TEST(SteadyState, ConstantEndEffectorOffset) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(6);
  e(3) = 3.0;
  e(5) = 0.002;  // 2 mm at 1 m
  const auto m = steady_state_metrics(constant_error_log(2, e, 20));
  EXPECT_DOUBLE_EQ(m.task.image_px, 3.0);
  EXPECT_NEAR(m.task.depth_mm, 2.0, 1e-12);
}

TEST(SteadyState, ConfigurationBoundsTask) {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd e(9);
    for (int k = 0; k < 9; ++k) e(k) = g(rng);
    const auto m = steady_state_metrics(constant_error_log(3, e, 10));
    EXPECT_GE(m.configuration.image_px, m.task.image_px);
    EXPECT_GE(m.configuration.depth_mm, m.task.depth_mm);
  }
}

TEST(SteadyState, WindowAndShortLog) {
  EXPECT_EQ(steady_window(10), 1u);
  EXPECT_EQ(steady_window(11), 2u);
  EXPECT_EQ(steady_window(100), 10u);
  EXPECT_THROW(steady_state_metrics(constant_error_log(1, Eigen::VectorXd::Zero(3), 1)), DomainError);
}

struct Exponential {
  std::vector<double> t, e;
  explicit Exponential(double dt, double horizon = 10.0) {
    for (double time = 0.0; time <= horizon; time += dt) {
      t.push_back(time);
      e.push_back(5.0 * std::exp(-time));
    }
  }
};

TEST(Transient, ExponentialFixture) {
  for (double dt : {0.1, 0.01}) {
    const Exponential x(dt);
    const auto s = transient_metrics(x.t, x.e, TransientCriterion::Stringent);
    ASSERT_TRUE(s.rise_time && s.settle_time);
    EXPECT_NEAR(*s.rise_time, 2.1972245773362196, dt);
    EXPECT_NEAR(*s.settle_time, 2.995732273553991, dt);
    const auto r = transient_metrics(x.t, x.e, TransientCriterion::Relaxed);
    ASSERT_TRUE(r.rise_time && r.settle_time);
    EXPECT_NEAR(*r.rise_time, 1.3862943611198906, dt);
    EXPECT_NEAR(*r.settle_time, std::log(10.0), dt);
  }
}

TEST(Transient, NeverSettles) {
  std::vector<double> t, e;
  for (int k = 0; k < 50; ++k) {
    t.push_back(0.1 * k);
    e.push_back(1.0 - 0.01 * k);  // ends at 0.51
  }
  const auto m = transient_metrics(t, e, TransientCriterion::Stringent);
  EXPECT_FALSE(m.settle_time.has_value());
  EXPECT_FALSE(m.rise_time.has_value());
}

TEST(Transient, ZeroInitialError) {
  const std::vector<double> t{0, 0.1}, e{0, 0};
  const auto m = transient_metrics(t, e, TransientCriterion::Relaxed);
  EXPECT_EQ(m.rise_time, 0.0);
  EXPECT_EQ(m.settle_time, 0.0);
}

TEST(Overshoot, DetectsSignCrossing) {
  auto log = constant_error_log(1, Eigen::Vector3d(10, 0, 0), 3);
  log.records[1].error = Eigen::Vector3d(-1, 0, 0);
  log.records[2].error = Eigen::Vector3d(-0.2, 0, 0);
  EXPECT_DOUBLE_EQ(overshoot_ratio(log), 0.1);
  log.records[1].error_norm = 1.0;
  log.records[2].error_norm = 2.0;
  EXPECT_FALSE(error_norm_non_increasing(log));
  EXPECT_TRUE(error_norm_non_increasing(log, 2));
}

// --- logs from real episodes ---------------------------------------------

TrajectoryLog sample_episode(std::uint64_t seed, double sigma_px = 1.0) {
  const auto config = testing::make_robot(2);
  std::mt19937_64 rng(seed);
  const auto arcs = cables_to_arcs(config, testing::random_admissible_cables(config, rng));
  Scenario s;
  s.references.push_back({extract_shape_features(config, arcs, default_camera()), 4.0, arcs, ""});
  return run_episode(config, default_camera(), {}, s, {}, NoiseConfig{sigma_px, 1e-3, seed});
}

TEST(LogCsv, RoundTripIsBitExact) {
  const auto log = sample_episode(71);
  std::stringstream a;
  write_csv(a, log);
  const auto back = read_csv(a);
  std::stringstream b;
  write_csv(b, back);
  EXPECT_EQ(a.str(), b.str());
  ASSERT_EQ(back.records.size(), log.records.size());
  for (std::size_t k = 0; k < log.records.size(); ++k) {
    EXPECT_EQ(back.records[k].error, log.records[k].error);
    EXPECT_EQ(back.records[k].time, log.records[k].time);
    EXPECT_EQ(back.records[k].event, log.records[k].event);
  }
}

TEST(LogCsv, MetricsFromCsvMatchReport) {
  const auto log = sample_episode(72);
  std::stringstream csv;
  write_csv(csv, log);
  const auto a = to_json(compute_report(log, TransientCriterion::Stringent)).dump();
  const auto b = to_json(compute_report(read_csv(csv), TransientCriterion::Stringent)).dump();
  EXPECT_EQ(a, b);
}

TEST(LogCsv, RejectsMalformed) {
  std::stringstream empty;
  EXPECT_THROW(read_csv(empty), DomainError);
  std::stringstream bad("a,b,c\n");
  EXPECT_THROW(read_csv(bad), DomainError);
}

TEST(LogJson, RecordShape) {
  const auto log = sample_episode(73, 0.0);
  const auto j = to_json(log);
  EXPECT_EQ(j["schema"], "shapeservo.log/1");
  EXPECT_EQ(j["sections"], 2);
  EXPECT_EQ(j["records"].size(), log.records.size());
  EXPECT_EQ(j["records"][0]["features"].size(), 2u);
  EXPECT_EQ(j["records"][0]["error"].size(), 6u);
}

}  // namespace
}  // namespace shapeservo
