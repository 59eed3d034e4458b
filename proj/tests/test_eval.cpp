#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "spike/errors.hpp"
#include "spike/eval.hpp"

using namespace spike;

namespace {

struct Case {
  std::vector<std::vector<Vec3>> preds;
  std::vector<SkeletonFrame> targets;
};

Case random_case(std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  Case c;
  for (std::size_t f = 0; f < frames; ++f) {
    SkeletonFrame t = fixtures::random_target(kNumItopJoints, seed * 7919 + f);
    std::vector<Vec3> p;
    for (std::size_t j = 0; j < kNumItopJoints; ++j) {
      t.valid[j] = uniform01(rng) < 0.8;
      p.push_back(t.joints[j] + Vec3{uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)});
    }
    c.targets.push_back(t);
    c.preds.push_back(p);
  }
  return c;
}

}  // namespace

TEST(MapAtThreshold, PerfectPredictions) {
  const Case c = random_case(10, 1);
  std::vector<std::vector<Vec3>> exact;
  for (const auto& t : c.targets) exact.push_back(t.joints);
  const EvalReport r = map_at_threshold(exact, c.targets);
  EXPECT_EQ(r.mean_ap(), 100.0);
  for (const ApRow& row : r.groups) EXPECT_EQ(*row.ap(), 100.0);
}

TEST(MapAtThreshold, TwoJointsHalf) {
  SkeletonFrame t = SkeletonFrame::all_valid({{0, 0, 0}, {1, 1, 1}});
  const EvalReport r = map_at_threshold({{{0.05, 0, 0}, {1.2, 1, 1}}}, {t});
  EXPECT_EQ(r.mean_ap(), 50.0);
  EXPECT_EQ(r.pooled.hits, 1u);
  EXPECT_EQ(r.pooled.total, 2u);
}

TEST(MapAtThreshold, StrictInequality) {
  SkeletonFrame t = SkeletonFrame::all_valid({{0, 0, 0}});
  EXPECT_EQ(map_at_threshold({{{0.5, 0, 0}}}, {t}, 0.5).mean_ap(), 0.0);
}

TEST(MapAtThreshold, MatchesRecount) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Case c = random_case(1000, seed);
    const EvalReport r = map_at_threshold(c.preds, c.targets);
    const auto [per, all] = oracle::recount(c.preds, c.targets, 0.10);
    EXPECT_EQ(r.pooled.hits, all.hits);
    EXPECT_EQ(r.pooled.total, all.total);
    for (std::size_t j = 0; j < per.size(); ++j) {
      EXPECT_EQ(r.per_joint[j].hits, per[j].hits);
      EXPECT_EQ(r.per_joint[j].total, per[j].total);
    }
    const ApRow* hands = r.group("hands");
    ASSERT_NE(hands, nullptr);
    EXPECT_EQ(hands->hits, per[index(Joint::kLeftHand)].hits + per[index(Joint::kRightHand)].hits);
    std::size_t lower = 0;
    for (Joint j : {Joint::kRightHip, Joint::kLeftHip, Joint::kRightKnee, Joint::kLeftKnee, Joint::kRightFoot, Joint::kLeftFoot})
      lower += per[index(j)].total;
    EXPECT_EQ(r.group("lower_body")->total, lower);
    EXPECT_EQ(r.group("upper_body")->total + lower, all.total);
  }
}

TEST(MapAtThreshold, RigidTransformInvariant) {
  const Case c = random_case(200, 3);
  const double a = 0.7, ca = std::cos(a), sa = std::sin(a);
  auto move = [&](Vec3 p) { return Vec3{ca * p.x + sa * p.z, p.y, -sa * p.x + ca * p.z} + Vec3{0.5, -1, 2}; };
  Case m = c;
  for (auto& f : m.preds)
    for (Vec3& p : f) p = move(p);
  for (auto& t : m.targets)
    for (Vec3& p : t.joints) p = move(p);
  const EvalReport r0 = map_at_threshold(c.preds, c.targets), r1 = map_at_threshold(m.preds, m.targets);
  EXPECT_EQ(r0.pooled.hits, r1.pooled.hits);
}

TEST(MapAtThreshold, MonotoneInThreshold) {
  const Case c = random_case(300, 4);
  double previous = -1.0;
  for (double th : {0.01, 0.02, 0.05, 0.08, 0.10, 0.15, 0.3}) {
    const double ap = map_at_threshold(c.preds, c.targets, th).mean_ap();
    EXPECT_GE(ap, previous);
    previous = ap;
  }
}

TEST(MapAtThreshold, ReportsBothMeans) {
  // Joint 0 valid in 3 frames (all hits), joint 1 valid in one frame (miss).
  std::vector<SkeletonFrame> targets;
  std::vector<std::vector<Vec3>> preds;
  for (int f = 0; f < 3; ++f) {
    SkeletonFrame t = SkeletonFrame::all_valid({{0, 0, 0}, {0, 0, 0}});
    t.valid[1] = f == 0;
    targets.push_back(t);
    preds.push_back({{0, 0, 0}, {1, 0, 0}});
  }
  const EvalReport r = map_at_threshold(preds, targets);
  EXPECT_EQ(r.mean_ap(), 75.0);
  EXPECT_EQ(r.mean_of_joints_ap, 50.0);
}

TEST(MapAtThreshold, NoValidJointsRaises) {
  SkeletonFrame t = SkeletonFrame::all_valid({{0, 0, 0}});
  t.valid[0] = false;
  EXPECT_THROW(map_at_threshold({{{0, 0, 0}}}, {t}), DataError);
}

TEST(EvalReport, TableRowsInOrder) {
  const Case c = random_case(20, 5);
  const std::string table = map_at_threshold(c.preds, c.targets).table();
  std::size_t at = 0;
  for (const char* row : {"head", "neck", "shoulders", "elbows", "hands", "torso", "hips", "knees", "feet",
                          "upper_body", "lower_body", "mean"}) {
    const auto found = table.find(row, at);
    ASSERT_NE(found, std::string::npos) << row;
    at = found;
  }
}

TEST(EvalReport, RecordsAreLineDelimited) {
  const Case c = random_case(20, 6);
  const std::string rec = map_at_threshold(c.preds, c.targets).records();
  EXPECT_NE(rec.find("joint=l_hand ap="), std::string::npos);
  EXPECT_NE(rec.find("joint=mean ap="), std::string::npos);
  EXPECT_NE(rec.find("joint=mean_of_joints ap="), std::string::npos);
  std::size_t lines = 0;
  for (char ch : rec) lines += ch == '\n';
  EXPECT_EQ(lines, 15u + 11u + 2u);
}

TEST(Latency, OrderStatistics) {
  const LatencyStats s = summarize_latency({5, 1, 3, 2, 4});
  EXPECT_EQ(s.median_ms, 3.0);
  EXPECT_EQ(s.p95_ms, 5.0);
  const LatencyStats even = summarize_latency({1, 2, 3, 4});
  EXPECT_EQ(even.median_ms, 2.5);
  EXPECT_EQ(s.record(), "median_ms=3.0000 p95_ms=5.0000");
}

TEST(Latency, MedianNeverAboveP95) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::vector<double> v(1 + uniform_index(rng, 40));
    for (double& x : v) x = uniform(rng, 0, 10);
    const LatencyStats s = summarize_latency(v);
    EXPECT_LE(s.median_ms, s.p95_ms);
  }
}

TEST(Latency, BenchmarkCountsIterations) {
  int calls = 0;
  const LatencyStats s = benchmark_inference([&] { ++calls; }, 5, 50);
  EXPECT_EQ(calls, 55);
  EXPECT_EQ(s.samples_ms.size(), 50u);
  EXPECT_EQ(benchmark_inference([] {}, 0, 1).samples_ms.size(), 1u);
  EXPECT_THROW(benchmark_inference([] {}, 0, 0), ConfigError);
}
