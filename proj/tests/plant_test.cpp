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

#include "shapeservo/plant.hpp"
#include "test_util.hpp"

namespace shapeservo {
namespace {

using testing::make_robot;

PlantState state_at(std::vector<CableLengths> cables) {
  PlantState s;
  s.applied_velocity = Eigen::VectorXd::Zero(3 * static_cast<Eigen::Index>(cables.size()));
  s.cables = std::move(cables);
  return s;
}

TEST(StepPlant, ZeroVelocityOnlyAdvancesTime) {
  const auto config = make_robot(2);
  const PlantState s = state_at({{100, 110, 95}, {120, 120, 120}});
  const PlantState n = step_plant(s, Eigen::VectorXd::Zero(6), config, SimConfig{});
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(n.cables[i].vec(), s.cables[i].vec());
  EXPECT_DOUBLE_EQ(n.time, 0.1);
  for (bool b : n.limit_clamped) EXPECT_FALSE(b);
}

TEST(StepPlant, SaturatesAtMaxLength) {
  const auto config = make_robot(1);
  const PlantState s = state_at({{200, 200, 200}});
  Eigen::VectorXd v(3);
  v << 10, 0, 0;
  const PlantState n = step_plant(s, v, config, SimConfig{});
  EXPECT_EQ(n.cables[0].l1, 200.0);
  EXPECT_TRUE(n.limit_clamped[0]);
  EXPECT_FALSE(n.limit_clamped[1]);
}

TEST(StepPlant, ConstantRateIntegratesExactly) {
  const auto config = make_robot(2);
  PlantState s = state_at({{100, 100, 100}, {150, 150, 150}});
  Eigen::VectorXd v(6);
  v << 1, -2, 0.5, 3, 0, -1;
  const SimConfig sim;
  for (int k = 0; k < 20; ++k) s = step_plant(s, v, config, sim);
  EXPECT_LT((s.cables[0].vec() - (Vec3(100, 100, 100) + 20 * sim.dt * v.head<3>())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((s.cables[1].vec() - (Vec3(150, 150, 150) + 20 * sim.dt * v.tail<3>())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(s.time, 2.0, 1e-12);
}

TEST(StepPlant, ActuatorLagIsFirstOrder) {
  const auto config = make_robot(1);
  SimConfig sim;
  sim.actuator_lag = 0.5;
  PlantState s = state_at({{100, 100, 100}});
  const Eigen::VectorXd v = Eigen::Vector3d(1, 1, 1);
  s = step_plant(s, v, config, sim);
  EXPECT_NEAR(s.applied_velocity(0), 1.0 - std::exp(-0.2), 1e-15);
  for (int k = 0; k < 200; ++k) s = step_plant(s, v, config, sim);
  EXPECT_NEAR(s.applied_velocity(0), 1.0, 1e-12);
}

TEST(StepPlant, BendCap) {
  const auto config = make_robot(1);
  SimConfig sim;
  const PlantState s = state_at({{80, 200, 200}});  // bend ~4 rad after clamp
  const PlantState n = step_plant(s, Eigen::VectorXd::Zero(3), config, sim);
  const ArcParams arc = cables_to_arc(n.cables[0], 20.0);
  EXPECT_NEAR(arc.bend_angle(), sim.max_bend, 1e-9);
  EXPECT_NEAR(arc.length, 160.0, 1e-9);
  EXPECT_TRUE(n.limit_clamped[0]);
}

TEST(StepPlant, WrongSize) {
  EXPECT_THROW(step_plant(state_at({{100, 100, 100}}), Eigen::VectorXd::Zero(6), make_robot(1), {}),
               SizeMismatch);
}

TEST(PlantTips, StraightStack) {
  const auto config = make_robot(3);
  const auto tips = plant_tips(state_at({{100, 100, 100}, {100, 100, 100}, {100, 100, 100}}), config);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LT((tips[i] - Vec3(0, 0, 100.0 * (i + 1))).norm(), 1e-12);
}

TEST(PlantTips, WorkedExampleSection) {
  const auto config = make_robot(1);
  const auto tips = plant_tips(state_at({{100.0, 108.66025403784438, 91.33974596215562}}), config);
  EXPECT_LT((tips[0] - Vec3(24.48348762192545, 0, 95.8851077208406)).norm(), 1e-9);
}

TEST(PlantTips, DistalChangeLeavesProximalTip) {
  const auto config = make_robot(2);
  const auto a = plant_tips(state_at({{100, 110, 95}, {120, 120, 120}}), config);
  const auto b = plant_tips(state_at({{100, 110, 95}, {130, 115, 125}}), config);
  EXPECT_EQ(a[0], b[0]);
  EXPECT_NE(a[1], b[1]);
}

TEST(CycleSeed, DistinctAndStable) {
  EXPECT_EQ(cycle_seed(5, 7), cycle_seed(5, 7));
  EXPECT_NE(cycle_seed(5, 7), cycle_seed(5, 8));
  EXPECT_NE(cycle_seed(5, 7), cycle_seed(6, 7));
}

// --- episodes --------------------------------------------------------------

Scenario single_reference(const RobotConfig& config, const std::vector<ArcParams>& arcs,
                          double threshold = 0.1) {
  Scenario s;
  s.references.push_back({extract_shape_features(config, arcs, default_camera()), threshold, arcs, "r"});
  return s;
}

std::vector<ArcParams> reachable_arcs(const RobotConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return cables_to_arcs(config, testing::random_admissible_cables(config, rng));
}

TEST(Episode, ReferenceAtInitialPoseCompletesImmediately) {
  const auto config = make_robot(2);
  const std::vector<ArcParams> start(2, ArcParams{80, 0, 0});
  const auto log = run_episode(config, default_camera(), {}, single_reference(config, start));
  ASSERT_FALSE(log.records.empty());
  EXPECT_EQ(log.records[0].event, CycleEvent::Complete);
  EXPECT_EQ(log.termination, Termination::Completed);
  for (const auto& r : log.records) EXPECT_EQ(r.command, Eigen::VectorXd::Zero(6));
}

TEST(Episode, ConvergesToReachableReference) {
  const auto config = make_robot(2);
  const auto arcs = reachable_arcs(config, 41);
  const auto log = run_episode(config, default_camera(), {}, single_reference(config, arcs));
  ASSERT_EQ(log.termination, Termination::Completed) << log.abort_reason;
  const auto& last = log.records.back();
  const Eigen::Vector3d task = task_error(last.error);
  EXPECT_LT(std::hypot(task(0), task(1)), 1.0);
  EXPECT_LT(std::abs(task(2)) * last.reference.back().depth_mm(), 1.0);
  // logged time strictly increasing, cables always within limits
  for (std::size_t k = 1; k < log.records.size(); ++k) {
    EXPECT_GT(log.records[k].time, log.records[k - 1].time);
    for (const auto& c : log.records[k].cables) {
      EXPECT_GE(c.vec().minCoeff(), 80.0);
      EXPECT_LE(c.vec().maxCoeff(), 200.0);
    }
  }
}

TEST(Episode, Deterministic) {
  const auto config = make_robot(3);
  const auto scenario = single_reference(config, reachable_arcs(config, 42), 4.0);
  const NoiseConfig noise{1.0, 1e-3, 99};
  const auto a = run_episode(config, default_camera(), {}, scenario, {}, noise);
  const auto b = run_episode(config, default_camera(), {}, scenario, {}, noise);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_EQ(a.records[k].error, b.records[k].error);
    EXPECT_EQ(a.records[k].command, b.records[k].command);
  }
}

TEST(Episode, ThreeReferencesInOrder) {
  const auto config = make_robot(2);
  Scenario s;
  for (std::uint64_t seed : {51u, 52u, 53u}) {
    s.references.push_back(single_reference(config, reachable_arcs(config, seed)).references[0]);
  }
  const auto log = run_episode(config, default_camera(), {}, s);
  ASSERT_EQ(log.termination, Termination::Completed) << log.abort_reason;
  std::vector<std::size_t> advances;
  for (const auto& r : log.records) {
    if (r.event == CycleEvent::AutoAdvance) advances.push_back(r.ref_index);
  }
  EXPECT_EQ(advances, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(log.records.back().ref_index, 2u);
}

TEST(Episode, ManualAdvanceIsLoggedDistinctly) {
  const auto config = make_robot(2);
  Scenario s;
  for (std::uint64_t seed : {51u, 52u}) {
    s.references.push_back(single_reference(config, reachable_arcs(config, seed)).references[0]);
  }
  Episode ep(config, default_camera(), {}, s);
  for (int k = 0; k < 5; ++k) ep.step();
  ep.request_manual_advance();
  const auto* rec = ep.step();
  ASSERT_NE(rec, nullptr);
  EXPECT_EQ(rec->event, CycleEvent::ManualAdvance);
  EXPECT_EQ(rec->ref_index, 1u);
  while (!ep.finished()) ep.step();
  EXPECT_EQ(ep.log().termination, Termination::Completed);
  for (const auto& r : ep.log().records) EXPECT_NE(r.event, CycleEvent::AutoAdvance);
}

TEST(Episode, AbortCarriesCycleIndex) {
  const auto config = make_robot(2);
  Camera cam = default_camera();
  const auto scenario = single_reference(config, reachable_arcs(config, 43));
  cam.extrinsics.world_to_camera = RigidTransform::Identity();
  cam.extrinsics.world_to_camera.translation() = Vec3(0, 0, -120);  // tip 1 behind the camera
  const auto log = run_episode(config, cam, {}, scenario);
  EXPECT_EQ(log.termination, Termination::Aborted);
  EXPECT_EQ(log.abort_step, 0);
  EXPECT_NE(log.abort_reason.find("section"), std::string::npos);
}

TEST(Episode, NewReferenceReopensCompletedEpisode) {
  const auto config = make_robot(2);
  Episode ep(config, default_camera(), {}, single_reference(config, reachable_arcs(config, 44)));
  while (!ep.finished()) ep.step();
  ASSERT_EQ(ep.log().termination, Termination::Completed);
  ep.replace_reference(single_reference(config, reachable_arcs(config, 45)).references[0]);
  EXPECT_FALSE(ep.finished());
  while (!ep.finished()) ep.step();
  EXPECT_EQ(ep.log().termination, Termination::Completed);
  ep.reset();
  EXPECT_TRUE(ep.log().records.empty());
  for (const auto& c : ep.plant().cables) EXPECT_EQ(c.vec(), Vec3::Constant(80.0));
}

}  // namespace
}  // namespace shapeservo
