#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include <Eigen/Eigenvalues>

#include "kora9/fusion.hpp"

using namespace kora9;

namespace {

Mat4 random_spd(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat4 a;
  for (int i = 0; i < 16; ++i) a(i / 4, i % 4) = n(rng);
  return scale * (a * a.transpose() + 0.05 * Mat4::Identity());
}

Track confirmed(std::uint64_t id, int sensor, double s, double d, double vs, double pl = 0.8) {
  Track t;
  t.id = id;
  t.sensor_id = sensor;
  t.x << s, d, vs, 0.0;
  t.P = Vec4(0.25, 0.25, 0.5, 0.1).asDiagonal();
  t.plausibility = pl;
  t.status = TrackStatus::confirmed;
  return t;
}

FusedObject object(std::uint64_t id, double s, int lane, double vs, std::set<int> sensors) {
  FusedObject o;
  o.id = id;
  o.x << s, RoadSpec{}.lane_center(lane), vs, 0.0;
  o.P = Mat4::Identity() * 0.5;
  o.lane_index = lane;
  o.sensors = std::move(sensors);
  o.plausibility = 0.9;
  return o;
}

FusionConfig merge_cfg() {
  FusionConfig c;
  c.sensor_facing = {{1, Facing::upstream}, {2, Facing::downstream}};
  return c;
}

}  // namespace

TEST(FuseStates, ScalarMidpoint) {
  using V1 = Eigen::Matrix<double, 1, 1>;
  const auto [x, p] = fuse_states<1>(V1(0.0), V1(1.0), V1(2.0), V1(1.0));
  EXPECT_NEAR(x(0), 1.0, 1e-12);
  EXPECT_NEAR(p(0), 0.5, 1e-12);
}

TEST(FuseStates, IdenticalInputsHalveCovariance) {
  auto rng = make_stream(1, StreamTag::test);
  const Mat4 P = random_spd(rng);
  const Vec4 x(1.0, 2.0, 3.0, 4.0);
  const auto [xf, pf] = fuse_states<4>(x, P, x, P);
  EXPECT_LT((xf - x).norm(), 1e-9);
  EXPECT_LT((pf - 0.5 * P).norm(), 1e-9);
}

TEST(FuseStates, NonInformativeLimit) {
  auto rng = make_stream(2, StreamTag::test);
  const Mat4 P2 = random_spd(rng);
  const Vec4 x1(9.0, 9.0, 9.0, 9.0), x2(1.0, -1.0, 2.0, 0.5);
  const auto [xf, pf] = fuse_states<4>(x1, Mat4(Mat4::Identity() * 1e6), x2, P2);
  EXPECT_LT((xf - x2).norm() / x2.norm(), 1e-3);
  EXPECT_LT((pf - P2).norm() / P2.norm(), 1e-3);
}

TEST(FuseStates, PsdOrdering) {
  auto rng = make_stream(3, StreamTag::test);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat4 P1 = random_spd(rng), P2 = random_spd(rng, 3.0);
    const auto [xf, pf] = fuse_states<4>(Vec4::Zero(), P1, Vec4::Ones(), P2);
    for (int k = 0; k < 100; ++k) {
      Vec4 v;
      for (int i = 0; i < 4; ++i) v(i) = n(rng);
      const double f = v.dot(pf * v);
      EXPECT_LE(f, std::min(v.dot(P1 * v), v.dot(P2 * v)) * (1.0 + 1e-9));
    }
  }
}

TEST(FuseStates, SingularCovarianceRegularisedOrRejected) {
  Mat4 z = Mat4::Zero();
  z(0, 0) = 1.0;
  EXPECT_NO_THROW(fuse_states<4>(Vec4::Zero(), z, Vec4::Zero(), Mat4::Identity()));
  Mat4 bad = Mat4::Identity();
  bad(1, 1) = -1.0;
  EXPECT_THROW(fuse_states<4>(Vec4::Zero(), bad, Vec4::Zero(), Mat4::Identity()), NumericError);
}

TEST(SpatialAlign, IdentityAndTranslation) {
  auto rng = make_stream(4, StreamTag::test);
  Track t = confirmed(1, 1, 3.0, 1.0, 20.0);
  t.P = random_spd(rng);
  SensorPose id;
  id.yaw = 0.0;
  const auto a = spatial_align(t, id);
  EXPECT_LT((a.x - t.x).norm(), 1e-12);
  EXPECT_LT((a.P - t.P).norm(), 1e-12);
  SensorPose shift = id;
  shift.s_position = 100.0;
  shift.lateral_offset = 2.0;
  const auto b = spatial_align(t, shift);
  EXPECT_NEAR(b.x(0), 103.0, 1e-12);
  EXPECT_NEAR(b.x(1), -1.0, 1e-12);
  EXPECT_LT((b.P - t.P).norm(), 1e-12);
}

TEST(SpatialAlign, RotationPreservesEigenvalues) {
  auto rng = make_stream(5, StreamTag::test);
  Track t = confirmed(1, 1, 3.0, 1.0, 20.0);
  t.P = random_spd(rng);
  SensorPose p;
  p.yaw = 15.0;
  const auto a = spatial_align(t, p);
  Eigen::SelfAdjointEigenSolver<Mat4> e0(t.P), e1(a.P);
  EXPECT_LT((e0.eigenvalues() - e1.eigenvalues()).norm(), 1e-9);
  EXPECT_NEAR(a.x.head<2>().norm(), t.x.head<2>().norm(), 1e-9);
}

TEST(SpatialAlign, UnknownSensorIsConfigError) {
  std::map<int, SensorPose> poses{{1, SensorPose{}}};
  EXPECT_THROW(spatial_align(confirmed(1, 7, 0, 0, 0), poses), ConfigError);
  EXPECT_NO_THROW(spatial_align(confirmed(1, 1, 0, 0, 0), poses));
}

TEST(Engine, SingleSensorPassthrough) {
  FusionEngine eng(FusionConfig{});
  eng.submit({1, 1.0, {confirmed(5, 1, 50.0, 5.25, 30.0), confirmed(6, 1, 80.0, 8.75, 30.0)}});
  const auto out = eng.epoch(1.15);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out[0].x(0), 50.0 + 30.0 * 0.15, 1e-9);
  EXPECT_EQ(out[0].sensors, std::set<int>{1});
  EXPECT_DOUBLE_EQ(out[0].plausibility, 0.8);
}

TEST(Engine, TentativeTracksDoNotSpawn) {
  FusionEngine eng(FusionConfig{});
  Track t = confirmed(5, 1, 50.0, 5.25, 30.0);
  t.status = TrackStatus::tentative;
  eng.submit({1, 1.0, {t}});
  EXPECT_TRUE(eng.epoch(1.2).empty());
}

TEST(Engine, TwoSensorsFuseToSmallerCovariance) {
  FusionEngine eng(FusionConfig{});
  eng.submit({1, 1.0, {confirmed(1, 1, 50.0, 5.25, 30.0, 0.6)}});
  eng.submit({2, 1.0, {confirmed(1, 2, 50.3, 5.35, 30.0, 0.7)}});
  const auto out = eng.epoch(1.15);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].sensors, (std::set<int>{1, 2}));
  Track ref = confirmed(1, 1, 0, 0, 0);
  Vec4 x = ref.x;
  Mat4 p = ref.P;
  kf_predict(x, p, 0.15, 1.0, 0.1);
  EXPECT_NEAR(out[0].P(0, 0), 0.5 * p(0, 0), 1e-9);
  EXPECT_NEAR(out[0].x(0), 50.15 + 30.0 * 0.15, 1e-9);
  // Combined plausibility is at least the best contributor.
  EXPECT_NEAR(out[0].plausibility, 1.0 - 0.4 * 0.3, 1e-12);
}

TEST(Engine, ArrivalOrderInsideWindowDoesNotMatter) {
  auto rng = make_stream(9, StreamTag::test);
  std::normal_distribution<double> n(0.0, 0.3);
  std::vector<SensorTrackMessage> msgs;
  for (int k = 0; k < 3; ++k)
    for (int s = 1; s <= 4; ++s) {
      const double t = 2.0 + 0.05 * k;
      msgs.push_back({s, t, {confirmed(1, s, 30.0 * t + n(rng), 5.25 + n(rng), 30.0),
                             confirmed(2, s, 30.0 * t + 40.0 + n(rng), 8.75 + n(rng), 28.0)}});
    }
  auto run = [&](std::vector<SensorTrackMessage> order) {
    FusionEngine eng(FusionConfig{});
    for (auto& m : order) eng.submit(m);
    return eng.epoch(2.3);
  };
  const auto ref = run(msgs);
  ASSERT_EQ(ref.size(), 2u);
  for (int trial = 0; trial < 20; ++trial) {
    auto shuffled = msgs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto got = run(shuffled);
    ASSERT_EQ(got.size(), ref.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].id, ref[i].id);
      EXPECT_LT((got[i].x - ref[i].x).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LT((got[i].P - ref[i].P).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_NEAR(got[i].plausibility, ref[i].plausibility, 1e-9);
    }
  }
}

TEST(Engine, LateMessagesAreCountedAndDiscarded) {
  FusionEngine eng(FusionConfig{});
  eng.submit({1, 1.0, {confirmed(1, 1, 30.0, 5.25, 30.0)}});
  eng.epoch(1.2);
  EXPECT_FALSE(eng.submit({2, 1.0, {confirmed(1, 2, 30.0, 5.25, 30.0)}}));
  EXPECT_FALSE(eng.submit({2, 0.5, {}}));
  EXPECT_TRUE(eng.submit({2, 1.1, {}}));
  EXPECT_EQ(eng.stats().oosm_discarded, 2u);
}

TEST(Engine, PlausibilityDecaysThenObjectGoesStale) {
  FusionConfig cfg;
  FusionEngine eng(cfg);
  eng.submit({1, 1.0, {confirmed(1, 1, 30.0, 5.25, 30.0, 0.9)}});
  auto out = eng.epoch(1.15);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].plausibility, 0.9, 1e-12);
  out = eng.epoch(1.2);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].plausibility, 0.9 * (1.0 - cfg.beta), 1e-12);
  EXPECT_TRUE(eng.epoch(2.0).empty());
}

TEST(Engine, HistoryKeepsPairingThroughAmbiguity) {
  // Two fused objects 1.5 m apart; sensor 2's track drifts toward the other
  // one but keeps its prior pairing thanks to the history bonus.
  FusionEngine eng(FusionConfig{});
  for (int k = 0; k < 6; ++k) {
    const double t = 1.0 + 0.05 * k;
    eng.submit({1, t, {confirmed(1, 1, 30.0 * t, 5.25, 30.0), confirmed(2, 1, 30.0 * t + 1.5, 5.25, 30.0)}});
    eng.submit({2, t, {confirmed(7, 2, 30.0 * t + (k < 5 ? 0.0 : 0.9), 5.25, 30.0)}});
    eng.epoch(t + 0.15);
  }
  const auto out = eng.epoch(1.5);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out[0].sensors.count(2));
  EXPECT_FALSE(out[1].sensors.count(2));
}

TEST(Engine, EpochsMustNotGoBackwards) {
  FusionEngine eng(FusionConfig{});
  eng.epoch(2.0);
  EXPECT_THROW(eng.epoch(1.0), ContractError);
}

TEST(Merge, TwelveMetreGapMerges) {
  const auto out = merge_long_objects({object(1, 112.0, 1, 25.0, {1}), object(2, 100.0, 1, 25.0, {2})}, merge_cfg());
  ASSERT_EQ(out.size(), 1u);
  EXPECT_GE(out[0].length_estimate, 12.0);
  EXPECT_LE(out[0].length_estimate, 20.0);
  EXPECT_EQ(out[0].sensors, (std::set<int>{1, 2}));
}

TEST(Merge, DistantOrAdjacentLaneNeverMerge) {
  EXPECT_EQ(merge_long_objects({object(1, 125.0, 1, 25.0, {1}), object(2, 100.0, 1, 25.0, {2})}, merge_cfg()).size(), 2u);
  EXPECT_EQ(merge_long_objects({object(1, 105.0, 2, 25.0, {1}), object(2, 100.0, 1, 25.0, {2})}, merge_cfg()).size(), 2u);
}

TEST(Merge, RequiresOppositeFacingProvenanceAndSimilarSpeed) {
  // Front seen only from behind: two separate vehicles.
  EXPECT_EQ(merge_long_objects({object(1, 112.0, 1, 25.0, {2}), object(2, 100.0, 1, 25.0, {2})}, merge_cfg()).size(), 2u);
  EXPECT_EQ(merge_long_objects({object(1, 112.0, 1, 28.0, {1}), object(2, 100.0, 1, 25.0, {2})}, merge_cfg()).size(), 2u);
}

TEST(Merge, LengthNeverExceedsCap) {
  auto rng = make_stream(10, StreamTag::test);
  std::uniform_real_distribution<double> s(0.0, 60.0);
  std::uniform_int_distribution<int> lane(1, 2), sensor(1, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<FusedObject> objs;
    for (int i = 0; i < 6; ++i) objs.push_back(object(static_cast<std::uint64_t>(i + 1), s(rng), lane(rng), 25.0, {sensor(rng)}));
    for (const auto& o : merge_long_objects(objs, merge_cfg())) {
      EXPECT_LE(o.length_estimate, 20.0);
      EXPECT_GE(o.length_estimate, 0.0);
    }
  }
}
