#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "ihpe/errors.hpp"
#include "ihpe/geometry.hpp"
#include "ihpe/parallel.hpp"
#include "ihpe/rng.hpp"
#include "test_support.hpp"

namespace ihpe {
namespace {

const CameraIntrinsics kUnit{100.0, 100.0, 160.0, 120.0};

TEST(Backproject, PrincipalPointMapsToOpticalAxis) {
  DepthImage img(320, 240);
  img.set(160, 120, 100.0f);
  const Vec3 p = backproject(img, {160, 120}, kUnit);
  EXPECT_EQ(p, (Vec3{0.0, 0.0, 100.0}));
}

TEST(Backproject, UnitFocalOffset) {
  DepthImage img(320, 240);
  img.set(260, 120, 100.0f);
  const Vec3 p = backproject(img, {260, 120}, kUnit);
  EXPECT_DOUBLE_EQ(p.x, 100.0);
  EXPECT_DOUBLE_EQ(p.y, 0.0);
  EXPECT_DOUBLE_EQ(p.z, 100.0);
}

TEST(Backproject, Errors) {
  DepthImage img(10, 10);
  img.set(2, 2, 300.0f);
  EXPECT_THROW(backproject(img, {10, 0}, kUnit), BoundsError);
  EXPECT_THROW(backproject(img, {-1, 3}, kUnit), BoundsError);
  EXPECT_THROW(backproject(img, {3, 3}, kUnit), BackgroundError);
}

TEST(Project, Examples) {
  const PixelF c = project({0.0, 0.0, 100.0}, kUnit);
  EXPECT_DOUBLE_EQ(c.u, 160.0);
  EXPECT_DOUBLE_EQ(c.v, 120.0);
  EXPECT_DOUBLE_EQ(project({50.0, 0.0, 100.0}, kUnit).u, 210.0);
  EXPECT_THROW(project({1.0, 1.0, 0.0}, kUnit), DegenerateError);
  EXPECT_THROW(project({1.0, 1.0, -5.0}, kUnit), DegenerateError);
}

TEST(Project, RoundTripThroughBackproject) {
  Rng rng(11);
  const CameraIntrinsics cam;
  DepthImage img(320, 240);
  for (int i = 0; i < 500; ++i) {
    const Pixel p{static_cast<int>(rng.below(320)), static_cast<int>(rng.below(240))};
    img.set(p.u, p.v, static_cast<float>(rng.uniform(150.0, 900.0)));
    const PixelF q = project(backproject(img, p, cam), cam);
    EXPECT_LE(std::abs(q.u - p.u), 0.5);
    EXPECT_LE(std::abs(q.v - p.v), 0.5);
  }
  for (int i = 0; i < 500; ++i) {
    const Vec3 pt{rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(100, 800)};
    const PixelF q = project(pt, cam);
    const Vec3 back = backproject(q.u, q.v, pt.z, cam);
    EXPECT_LE(distance(back, pt), 1e-6 * pt.norm());
  }
}

TEST(ForegroundMask, Examples) {
  DepthImage empty(8, 6);
  EXPECT_EQ(foreground_mask(empty).count(), 0u);
  DepthImage one(8, 6);
  one.set(3, 4, 250.0f);
  const Mask m = foreground_mask(one);
  EXPECT_EQ(m.count(), 1u);
  EXPECT_TRUE(m(3, 4));
}

TEST(ForegroundMask, MatchesRecountAndIsIdempotent) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const DepthImage img = test::random_depth_image(rng, 40, 30, rng.uniform());
    std::size_t expected = 0;
    for (float d : img.depths()) expected += d < img.background() ? 1 : 0;
    const Mask m = foreground_mask(img);
    EXPECT_EQ(m.count(), expected);
    DepthImage again(40, 30);
    for (int v = 0; v < 30; ++v)
      for (int u = 0; u < 40; ++u)
        if (m(u, v)) again.set(u, v, 1.0f);
    EXPECT_EQ(foreground_mask(again), m);
  }
}

TEST(DepthImage, InvalidDepthsBecomeBackground) {
  DepthImage img(4, 1, {0.0f, -3.0f, NAN, 12000.0f});
  for (int u = 0; u < 4; ++u) EXPECT_EQ(img(u, 0), img.background());
  img.set(1, 0, 500.0f);
  EXPECT_TRUE(img.is_foreground(1, 0));
  EXPECT_THROW(img.at({4, 0}), BoundsError);
  EXPECT_EQ(img.at_or_background(-1, 0), img.background());
}

TEST(ForegroundCentroid, MeanOfPoints) {
  DepthImage img(320, 240);
  img.set(100, 100, 200.0f);
  img.set(200, 150, 300.0f);
  const CameraIntrinsics cam;
  const Vec3 c = foreground_centroid(img, cam);
  const Vec3 expected = (backproject(img, {100, 100}, cam) + backproject(img, {200, 150}, cam)) / 2.0;
  EXPECT_LE(distance(c, expected), 1e-9);
  EXPECT_THROW(foreground_centroid(DepthImage(5, 5), cam), NoHandError);
}

TEST(Camera, Validate) {
  EXPECT_NO_THROW(CameraIntrinsics{}.validate());
  EXPECT_THROW((CameraIntrinsics{0.0, 1.0, 0, 0}.validate()), ConfigError);
  EXPECT_THROW((CameraIntrinsics{1.0, -1.0, 0, 0}.validate()), ConfigError);
  EXPECT_THROW((CameraIntrinsics{INFINITY, 1.0, 0, 0}.validate()), ConfigError);
}

class SkeletonLayouts : public ::testing::TestWithParam<std::string> {};

TEST_P(SkeletonLayouts, Invariants) {
  const SkeletonSpec s = SkeletonSpec::by_name(GetParam());
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.palm_joints.size(), 6u);
  std::vector<int> owners(s.joint_count, 0);
  for (int j : s.palm_joints) ++owners[j];
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& chain = s.finger_chains[f];
    EXPECT_EQ(s.fingertip(f), chain.back());
    EXPECT_EQ(s.fingertip_indices()[f], chain.back());
    EXPECT_TRUE(s.is_palm_joint(chain.front()));
    for (std::size_t k = 1; k < chain.size(); ++k) {
      ++owners[chain[k]];
      EXPECT_EQ(s.finger_of(chain[k]), f);
    }
    EXPECT_EQ(s.finger_joints_without_root(f), std::vector<int>(chain.begin() + 1, chain.end()));
  }
  for (int j = 0; j < s.joint_count; ++j) EXPECT_EQ(owners[j], 1) << "joint " << j;
  EXPECT_EQ(s.finger_of(s.wrist()), -1);
}

INSTANTIATE_TEST_SUITE_P(BuiltIn, SkeletonLayouts, ::testing::Values("msra21", "icvl16"));

TEST(Skeleton, JointCounts) {
  EXPECT_EQ(SkeletonSpec::msra21().joint_count, 21);
  EXPECT_EQ(SkeletonSpec::icvl16().joint_count, 16);
  EXPECT_THROW(SkeletonSpec::by_name("nope"), ConfigError);
  EXPECT_EQ(shared_skeleton("msra21").get(), shared_skeleton("msra21").get());
}

TEST(Skeleton, ValidateRejectsBrokenLayouts) {
  SkeletonSpec s = SkeletonSpec::msra21();
  s.finger_chains[1].push_back(s.finger_chains[2].back());
  EXPECT_THROW(s.validate(), ConfigError);
  SkeletonSpec t = SkeletonSpec::msra21();
  t.joint_count = 22;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(HandPose, Validate) {
  const auto skel = shared_skeleton("msra21");
  HandPose p(skel);
  EXPECT_EQ(p.size(), 21u);
  EXPECT_NO_THROW(p.validate());
  p[3].y = NAN;
  EXPECT_THROW(p.validate("sample 7"), DataError);
  EXPECT_THROW(HandPose(skel, std::vector<Vec3>(20)).validate(), DataError);
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    differs |= x != c.uniform();
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
    EXPECT_LT(a.below(7), 7u);
    b.below(7);
  }
  EXPECT_TRUE(differs);
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2, 0), derive_seed(1, 2, 1));
}

TEST(ParallelFor, CoversEveryIndexAndRethrows) {
  for (int threads : {1, 3, 8}) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
  }
  EXPECT_THROW(parallel_for(50, 4, [](std::size_t i) { if (i == 17) throw DataError("boom"); }), DataError);
}

}  // namespace
}  // namespace ihpe
