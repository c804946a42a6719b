#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ihpe/errors.hpp"
#include "ihpe/finger_detect.hpp"
#include "ihpe/synth.hpp"
#include "test_support.hpp"

namespace ihpe {
namespace {

const SkeletonPtr kMsra = shared_skeleton("msra21");

SynthHand hand_with(const FingerFlags& stretched, double noise = 0.0, double rotation = 0.0) {
  SynthHandSpec spec = SynthHandSpec::open_hand();
  for (int f = 0; f < kFingerCount; ++f) spec.fingers[f].stretched = stretched[f];
  spec.noise_mm = noise;
  spec.rotation_rad = rotation;
  return generate_synth(spec, 1);
}

Mask solid(int w, int h) {
  Mask m(w, h);
  std::fill(m.bits.begin(), m.bits.end(), 1);
  return m;
}

TEST(DistanceTransform, SinglePixelAndSquare) {
  Mask one(5, 5);
  one.set(2, 2, true);
  const DistanceMap d1 = distance_transform(one);
  EXPECT_EQ(d1(2, 2), 1.0f);
  EXPECT_EQ(d1(0, 0), 0.0f);

  const DistanceMap d3 = distance_transform(solid(3, 3));
  EXPECT_EQ(d3(1, 1), 2.0f);
  EXPECT_EQ(d3(0, 1), 1.0f);
  EXPECT_THROW(distance_transform(Mask(4, 4)), DegenerateError);
}

TEST(DistanceTransform, DiskMaximumNearRadius) {
  const Mask disk = test::disk_mask(80, 80, 40, 40, 20);
  const DistanceMap d = distance_transform(disk);
  const PalmEstimate palm = palm_center(d);
  EXPECT_NEAR(palm.radius, 20.0, 1.0);
  EXPECT_LE(std::hypot(palm.center.u - 40, palm.center.v - 40), 1.0);
  EXPECT_EQ(d.values, test::brute_force_distance(disk));
}

TEST(DistanceTransform, MatchesBruteForceOnRandomMasks) {
  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    const Mask m = test::random_mask(rng, 32, 32);
    if (m.count() == 0) continue;
    EXPECT_EQ(distance_transform(m).values, test::brute_force_distance(m)) << "mask " << t;
  }
}

TEST(DistanceTransform, ZeroOffMaskAndLipschitz) {
  Rng rng(22);
  for (int t = 0; t < 30; ++t) {
    const Mask m = test::random_mask(rng, 48, 40);
    if (m.count() == 0) continue;
    const DistanceMap d = distance_transform(m);
    for (int v = 0; v < m.height; ++v) {
      for (int u = 0; u < m.width; ++u) {
        if (!m(u, v)) {
          EXPECT_EQ(d(u, v), 0.0f);
        }
        if (u + 1 < m.width) {
          EXPECT_LE(std::abs(d(u, v) - d(u + 1, v)), 1.0f + 1e-6f);
        }
        if (v + 1 < m.height) {
          EXPECT_LE(std::abs(d(u, v) - d(u, v + 1)), 1.0f + 1e-6f);
        }
      }
    }
  }
}

TEST(PalmCenter, LargerOfTwoDisks) {
  Mask m(80, 40);
  const Mask a = test::disk_mask(80, 40, 15, 20, 6);
  const Mask b = test::disk_mask(80, 40, 55, 20, 10);
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = a.bits[i] | b.bits[i];
  const PalmEstimate palm = palm_center(distance_transform(m));
  EXPECT_LE(std::hypot(palm.center.u - 55, palm.center.v - 20), 1.0);
}

TEST(PalmCenter, TieBreakSmallestRowThenColumn) {
  // A 4x2 block: all interior values tie, the first in raster order wins.
  Mask m(10, 10);
  for (int v = 3; v < 5; ++v)
    for (int u = 2; u < 6; ++u) m.set(u, v, true);
  const PalmEstimate palm = palm_center(distance_transform(m));
  EXPECT_EQ(palm.center, (Pixel{2, 3}));
  EXPECT_EQ(palm.radius, 1.0);
  DistanceMap zero{3, 3, std::vector<float>(9, 0.0f)};
  EXPECT_THROW(palm_center(zero), DegenerateError);
}

TEST(PalmCenter, MatchesArgmaxOnSyntheticHands) {
  for (int k = 0; k < 32; ++k) {
    FingerFlags flags{};
    for (int f = 0; f < kFingerCount; ++f) flags[f] = (k >> f) & 1;
    const SynthHand hand = hand_with(flags, 0.0, 0.1 * k - 1.5);
    const DistanceMap d = distance_transform(foreground_mask(hand.image));
    float best = -1;
    Pixel arg{};
    for (int v = 0; v < d.height; ++v)
      for (int u = 0; u < d.width; ++u)
        if (d(u, v) > best) {
          best = d(u, v);
          arg = {u, v};
        }
    const PalmEstimate palm = palm_center(d);
    EXPECT_EQ(palm.center, arg);
    EXPECT_EQ(palm.radius, best);
  }
}

TEST(TraceBoundary, SquareLoop) {
  Mask m(5, 5);
  for (int v = 1; v < 4; ++v)
    for (int u = 1; u < 4; ++u) m.set(u, v, true);
  const auto loop = trace_boundary(m);
  ASSERT_EQ(loop.size(), 8u);
  EXPECT_EQ(std::set<Pixel>(loop.begin(), loop.end()).count(Pixel{2, 2}), 0u);
  EXPECT_THROW(trace_boundary(Mask(3, 3)), DegenerateError);
}

TEST(TraceBoundary, ClosedAndMatchesFourNeighbourBoundary) {
  for (int k = 0; k < 32; ++k) {
    FingerFlags flags{};
    for (int f = 0; f < kFingerCount; ++f) flags[f] = (k >> f) & 1;
    const Mask m = foreground_mask(hand_with(flags, 0.0, 0.05 * k).image);
    const auto loop = trace_boundary(m);
    ASSERT_GE(loop.size(), 3u);
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const Pixel a = loop[i], b = loop[(i + 1) % loop.size()];
      EXPECT_LE(std::max(std::abs(a.u - b.u), std::abs(a.v - b.v)), 1) << "step " << i;
    }
    const auto expected = test::brute_force_boundary(m);
    const std::set<Pixel> traced(loop.begin(), loop.end());
    EXPECT_EQ(traced, std::set<Pixel>(expected.begin(), expected.end()));
    EXPECT_EQ(traced.size(), loop.size());
  }
}

TEST(TraceBoundary, UsesLargestComponent) {
  Mask m = test::disk_mask(60, 30, 40, 15, 10);
  m.set(3, 3, true);
  const auto loop = trace_boundary(m);
  for (const Pixel& p : loop) EXPECT_GT(p.u, 20);
  EXPECT_EQ(largest_component(m), test::disk_mask(60, 30, 40, 15, 10));
}

TEST(DetectFingertips, DiskHasNone) {
  const Mask disk = test::disk_mask(120, 120, 60, 60, 30);
  const DistanceMap d = distance_transform(disk);
  const PalmEstimate palm = palm_center(d);
  EXPECT_TRUE(detect_fingertips(trace_boundary(disk), palm.center, palm.radius, DetectConfig{}).empty());
}

TEST(DetectFingertips, FindsEveryStretchedFingerWithinThreePixels) {
  for (int k = 1; k < 32; ++k) {
    FingerFlags flags{};
    int expected = 0;
    for (int f = 0; f < kFingerCount; ++f) expected += (flags[f] = (k >> f) & 1);
    const SynthHand hand = hand_with(flags);
    const FingerDetection det = detect_stretched_fingers(hand.image, *kMsra, DetectConfig{});
    ASSERT_EQ(static_cast<int>(det.fingers.size()), expected) << "flags " << k;
    std::set<int> matched;
    for (const auto& finger : det.fingers) {
      int best = -1;
      double best_d = 1e9;
      for (int f = 0; f < kFingerCount; ++f) {
        if (!flags[f]) continue;
        const double d = std::hypot(finger.tip.u - hand.tip_pixels[f].u, finger.tip.v - hand.tip_pixels[f].v);
        if (d < best_d) {
          best_d = d;
          best = f;
        }
      }
      EXPECT_LE(best_d, 3.0);
      matched.insert(best);
      EXPECT_GE(finger.tip_distance, DetectConfig{}.distance_threshold_ratio * det.palm.radius);
      EXPECT_EQ(finger.joints.size(), kMsra->finger_chains[0].size());
    }
    EXPECT_EQ(static_cast<int>(matched.size()), expected);
  }
}

TEST(DetectFingertips, TranslationInvariant) {
  const SynthHand hand = hand_with({true, true, false, true, false});
  const Mask m = foreground_mask(hand.image);
  Mask shifted(m.width, m.height);
  for (int v = 0; v + 7 < m.height; ++v)
    for (int u = 0; u + 11 < m.width; ++u) shifted.set(u + 11, v + 7, m(u, v));
  auto tips_of = [](const Mask& mask) {
    const DistanceMap d = distance_transform(mask);
    const PalmEstimate palm = palm_center(d);
    auto tips = detect_fingertips(trace_boundary(mask), palm.center, palm.radius, DetectConfig{});
    std::sort(tips.begin(), tips.end());
    return tips;
  };
  auto a = tips_of(m);
  for (auto& p : a) p = {p.u + 11, p.v + 7};
  EXPECT_EQ(a, tips_of(shifted));
}

TEST(LocateRoot, NearRenderedRootAndOnSegment) {
  const SynthHand hand = hand_with({true, true, true, true, true});
  const Mask m = foreground_mask(hand.image);
  const DistanceMap d = distance_transform(m);
  const PalmEstimate palm = palm_center(d);
  for (int f = 0; f < kFingerCount; ++f) {
    const Pixel tip = hand.tip_pixels[f].rounded();
    const Pixel root = locate_root(tip, palm.center, d);
    // Root is on the tip-centre segment up to rounding.
    const double du = palm.center.u - tip.u, dv = palm.center.v - tip.v;
    const double cross = std::abs(du * (root.v - tip.v) - dv * (root.u - tip.u)) / std::hypot(du, dv);
    EXPECT_LE(cross, 0.75);
    // The rendered finger base is where the capsule leaves the palm disk.
    const PixelF base = hand.chain_pixels[f].front();
    const double ux = hand.chain_pixels[f].back().u - base.u, vy = hand.chain_pixels[f].back().v - base.v;
    const double t = ((root.u - base.u) * ux + (root.v - base.v) * vy) / (ux * ux + vy * vy);
    EXPECT_GE(t, -0.1) << "finger " << f;
    EXPECT_LE(t, 0.6) << "finger " << f;
  }
}

TEST(LocateRoot, FallbackOnDisk) {
  const Mask disk = test::disk_mask(100, 100, 50, 50, 20);
  const DistanceMap d = distance_transform(disk);
  const PalmEstimate palm = palm_center(d);
  DetectConfig cfg;
  cfg.root_radius_fraction = 5.0;  // unreachable
  const Pixel root = locate_root({50 + 30, 50}, palm.center, d, cfg);
  const Pixel expected = PixelF{palm.center.u + (80.0 - palm.center.u) / std::abs(80.0 - palm.center.u) * palm.radius,
                                static_cast<double>(palm.center.v)}
                             .rounded();
  EXPECT_EQ(root, expected);
  EXPECT_EQ(locate_root(palm.center, palm.center, d), palm.center);
  EXPECT_THROW(locate_root({100, 0}, palm.center, d), BoundsError);
}

TEST(InterpolateJoints, LinearPlacement) {
  SkeletonSpec s = SkeletonSpec::msra21();
  DetectConfig cfg;
  cfg.interpolation_fractions = {0.25, 0.5};
  const auto joints = interpolate_joints({40, 0}, {0, 0}, s, 1, cfg);
  ASSERT_EQ(joints.size(), 4u);
  EXPECT_EQ(joints[0], (PixelF{0, 0}));
  EXPECT_EQ(joints[1], (PixelF{10, 0}));
  EXPECT_EQ(joints[2], (PixelF{20, 0}));
  EXPECT_EQ(joints[3], (PixelF{40, 0}));

  // Equal spacing by default: thirds on a 4-joint chain.
  const auto even = interpolate_joints({30, 0}, {0, 0}, s, 1, DetectConfig{});
  EXPECT_DOUBLE_EQ(even[1].u, 10.0);
  EXPECT_DOUBLE_EQ(even[2].u, 20.0);

  for (const auto& j : interpolate_joints({7, 9}, {7, 9}, s, 0, DetectConfig{})) EXPECT_EQ(j, (PixelF{7, 9}));
  const SkeletonSpec icvl = SkeletonSpec::icvl16();
  EXPECT_EQ(interpolate_joints({5, 5}, {0, 0}, icvl, 2, DetectConfig{}).size(), icvl.finger_chains[2].size());
}

TEST(DetectConfig, Validate) {
  EXPECT_NO_THROW(DetectConfig{}.validate());
  DetectConfig a;
  a.distance_threshold_ratio = 1.0;
  EXPECT_THROW(a.validate(), ConfigError);
  DetectConfig b;
  b.curvature_window = 1;
  EXPECT_THROW(b.validate(), ConfigError);
  DetectConfig c;
  c.curvature_min = 4.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

std::vector<Vec3> chain_of(const HandPose& pose, int f) {
  std::vector<Vec3> out;
  for (int j : pose.skeleton->finger_chains[f]) out.push_back(pose[j]);
  return out;
}

TEST(MatchIdentity, ExactChainGetsItsFinger) {
  Rng rng(31);
  const HandPose base = test::random_pose(rng, kMsra);
  const std::vector<std::vector<Vec3>> det{chain_of(base, 2)};
  EXPECT_EQ(match_identity(det, base), std::vector<int>{2});
  EXPECT_EQ(identity_cost(det[0], base, 2), 0.0);
}

TEST(MatchIdentity, CostEqualsResummation) {
  Rng rng(32);
  for (int t = 0; t < 50; ++t) {
    const HandPose base = test::random_pose(rng, kMsra);
    std::vector<Vec3> det;
    for (int k = 0; k < 4; ++k) det.push_back({rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(250, 350)});
    for (int f = 0; f < kFingerCount; ++f) {
      double s = 0;
      const auto& chain = kMsra->finger_chains[f];
      for (std::size_t k = 0; k < chain.size(); ++k) {
        const double dx = det[k].x - base[chain[k]].x, dy = det[k].y - base[chain[k]].y,
                     dz = det[k].z - base[chain[k]].z;
        s += dx * dx + dy * dy + dz * dz;
      }
      EXPECT_NEAR(identity_cost(det, base, f), s, 1e-9 * s);
    }
  }
}

TEST(MatchIdentity, CrossedCostsStayExclusive) {
  // Both detections are closest to finger 1; detection 0 is closer, so it
  // takes finger 1 and detection 1 falls back to its next best, finger 3.
  HandPose base(kMsra);
  for (int f = 0; f < kFingerCount; ++f)
    for (int j : kMsra->finger_chains[f]) base[j] = {100.0 * f, 0, 300};
  auto shifted = [&](int f, double dx) {
    auto c = chain_of(base, f);
    for (auto& p : c) p.x += dx;
    return c;
  };
  const std::vector<std::vector<Vec3>> det{shifted(1, 5), shifted(1, 60)};
  const auto ids = match_identity(det, base);
  // Exhaustive assignment over distinct finger pairs.
  double best = 1e18;
  std::vector<int> best_ids;
  for (int a = 0; a < kFingerCount; ++a)
    for (int b = 0; b < kFingerCount; ++b) {
      if (a == b) continue;
      const double c = identity_cost(det[0], base, a) + identity_cost(det[1], base, b);
      if (c < best) {
        best = c;
        best_ids = {a, b};
      }
    }
  EXPECT_EQ(ids, best_ids);
  EXPECT_EQ(ids, (std::vector<int>{1, 2}));
}

TEST(MatchIdentity, NeverDuplicates) {
  Rng rng(33);
  for (int t = 0; t < 100; ++t) {
    const HandPose base = test::random_pose(rng, kMsra);
    std::vector<std::vector<Vec3>> det(1 + rng.below(7));
    for (auto& c : det)
      for (int k = 0; k < 4; ++k) c.push_back({rng.uniform(-80, 80), rng.uniform(-80, 80), rng.uniform(250, 350)});
    const auto ids = match_identity(det, base);
    std::set<int> seen;
    int assigned = 0;
    for (int id : ids) {
      if (id < 0) continue;
      ++assigned;
      EXPECT_TRUE(seen.insert(id).second);
    }
    EXPECT_EQ(assigned, std::min<int>(static_cast<int>(det.size()), kFingerCount));
  }
}

TEST(MatchIdentity, SyntheticHandAgainstTruePose) {
  for (int k = 1; k < 32; ++k) {
    FingerFlags flags{};
    for (int f = 0; f < kFingerCount; ++f) flags[f] = (k >> f) & 1;
    const SynthHand hand = hand_with(flags);
    FingerDetection det = detect_stretched_fingers(hand.image, *kMsra, DetectConfig{});
    const auto ids = match_identity(det.fingers, hand.pose, hand.image, CameraIntrinsics{});
    for (std::size_t i = 0; i < det.fingers.size(); ++i) {
      EXPECT_EQ(det.fingers[i].identity, ids[i]);
      ASSERT_GE(ids[i], 0);
      EXPECT_TRUE(flags[ids[i]]) << "flags " << k;
      const PixelF t = hand.tip_pixels[ids[i]];
      EXPECT_LE(std::hypot(det.fingers[i].tip.u - t.u, det.fingers[i].tip.v - t.v), 3.0);
    }
  }
}

TEST(NearestForegroundDepth, SearchesOutward) {
  DepthImage img(20, 20);
  img.set(10, 10, 321.0f);
  img.set(14, 10, 500.0f);
  EXPECT_EQ(nearest_foreground_depth(img, {10, 10}), 321.0f);
  EXPECT_EQ(nearest_foreground_depth(img, {11, 10}), 321.0f);
  EXPECT_EQ(nearest_foreground_depth(img, {13, 11}), 500.0f);
  EXPECT_FALSE(nearest_foreground_depth(DepthImage(5, 5), {2, 2}).has_value());
}

TEST(DetectStretchedFingers, EmptyImageThrows) {
  EXPECT_THROW(detect_stretched_fingers(DepthImage(32, 32), *kMsra, DetectConfig{}), NoHandError);
}

}  // namespace
}  // namespace ihpe
