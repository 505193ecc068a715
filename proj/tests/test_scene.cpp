#include <gtest/gtest.h>

#include <map>

#include "kora9/scene.hpp"

using namespace kora9;

namespace {

TrafficScenario busy(std::uint64_t seed) {
  TrafficScenario s;
  s.duration = 60.0;
  s.seed = seed;
  s.lanes = {LaneTraffic{0.5, 0.4, {30, 4}, {24, 2}}, LaneTraffic{0.4, 0.1, {33, 3}, {24, 2}},
             LaneTraffic{0.3, 0.0, {38, 3}, {24, 2}}};
  return s;
}

}  // namespace

TEST(Road, LaneCentersCountOutwardFromSensors) {
  RoadSpec road;
  EXPECT_DOUBLE_EQ(road.lane_center(1), 5.25);
  EXPECT_DOUBLE_EQ(road.lane_center(3), 12.25);
  EXPECT_EQ(road.nearest_lane(5.0), 1);
  EXPECT_EQ(road.nearest_lane(-3.0), 1);
  EXPECT_EQ(road.nearest_lane(40.0), 3);
  road.emergency_lane = false;
  EXPECT_DOUBLE_EQ(road.lane_center(1), 1.75);
}

TEST(Road, RejectsBadGeometry) {
  RoadSpec road;
  road.lane_count = 0;
  EXPECT_THROW(road.validate(), ConfigError);
  road = {};
  road.lane_width = 0.0;
  EXPECT_THROW(road.validate(), ConfigError);
}

TEST(Traffic, ScriptedCarAdvancesAtConstantSpeed) {
  TrafficScenario s;
  s.duration = 5.0;
  s.scripted = {ScriptedVehicle{0.0, 2, VehicleClass::car, 30.0, 10.0, {}}};
  const auto gt = generate_traffic(s, RoadSpec{});
  ASSERT_EQ(gt.frames.size(), 101u);
  const auto& v = gt.at(2.0).vehicles.at(0);
  EXPECT_NEAR(v.s, 70.0, 1e-9);
  EXPECT_DOUBLE_EQ(v.d, RoadSpec{}.lane_center(2));
  EXPECT_EQ(v.lane_index, 2);
}

TEST(Traffic, VehiclesLeaveAtSegmentEnd) {
  TrafficScenario s;
  s.duration = 12.0;
  s.scripted = {ScriptedVehicle{0.0, 1, VehicleClass::car, 30.0, 0.0, {}}};
  const auto gt = generate_traffic(s, RoadSpec{});
  EXPECT_EQ(gt.at(10.0).vehicles.size(), 1u);
  EXPECT_TRUE(gt.at(10.05).vehicles.empty());
}

TEST(Traffic, SameSeedSameTruth) {
  const auto a = generate_traffic(busy(3), RoadSpec{});
  const auto b = generate_traffic(busy(3), RoadSpec{});
  const auto c = generate_traffic(busy(4), RoadSpec{});
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_NE(a.frames, c.frames);
}

TEST(Traffic, NoOverlapOrOvertakingWithinLane) {
  RoadSpec road;
  const auto scn = busy(11);
  const auto gt = generate_traffic(scn, road);
  std::size_t checked = 0;
  for (const auto& f : gt.frames) {
    std::map<int, std::vector<Vehicle>> lanes;
    for (const auto& v : f.vehicles) lanes[v.lane_index].push_back(v);
    for (auto& [lane, vs] : lanes) {
      std::sort(vs.begin(), vs.end(), [](const auto& a, const auto& b) { return a.s < b.s; });
      for (std::size_t i = 1; i < vs.size(); ++i) {
        EXPECT_GE(vs[i].rear() - vs[i - 1].front(), scn.min_gap - 1e-9);
        EXPECT_LE(vs[i - 1].speed, vs[i].speed + 1e-12);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(Traffic, SpeedsStayInsideObservedRange) {
  const auto gt = generate_traffic(busy(5), RoadSpec{});
  for (const auto& f : gt.frames)
    for (const auto& v : f.vehicles) {
      EXPECT_GE(v.speed, 0.0);
      EXPECT_LE(v.speed, kMaxVehicleSpeed);
    }
}

TEST(Traffic, EmptyScenarioHasEmptyFrames) {
  TrafficScenario s;
  s.duration = 2.0;
  const auto gt = generate_traffic(s, RoadSpec{});
  ASSERT_EQ(gt.frames.size(), 41u);
  for (const auto& f : gt.frames) EXPECT_TRUE(f.vehicles.empty());
}

TEST(Traffic, LookupOutsideRunThrows) {
  TrafficScenario s;
  s.duration = 1.0;
  const auto gt = generate_traffic(s, RoadSpec{});
  EXPECT_THROW(gt.at(-0.1), RangeError);
  EXPECT_THROW(gt.at(1.5), RangeError);
  EXPECT_NO_THROW(gt.at(1.0));
}

TEST(Traffic, PropagateMatchesClosedForm) {
  TrafficScenario s;
  s.duration = 4.0;
  s.scripted = {ScriptedVehicle{0.0, 1, VehicleClass::truck, 24.0, 5.0, {}}};
  RoadSpec road;
  const auto gt = generate_traffic(s, road);
  const auto next = propagate(gt.at(1.0), 0.5, road);
  EXPECT_NEAR(next.vehicles.at(0).s, gt.at(1.5).vehicles.at(0).s, 1e-9);
}

TEST(Traffic, InvalidScenarioRejected) {
  TrafficScenario s;
  s.lanes.resize(4);
  EXPECT_THROW(generate_traffic(s, RoadSpec{}), ConfigError);
  s.lanes.resize(1);
  s.lanes[0].truck_fraction = 1.5;
  EXPECT_THROW(generate_traffic(s, RoadSpec{}), ConfigError);
}
