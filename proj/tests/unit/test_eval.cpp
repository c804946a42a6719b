#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "ihpe/errors.hpp"
#include "ihpe/eval.hpp"
#include "ihpe/synth.hpp"
#include "test_support.hpp"

namespace ihpe {
namespace {

const SkeletonPtr kMsra = shared_skeleton("msra21");

std::vector<HandPose> random_poses(Rng& rng, std::size_t n) {
  std::vector<HandPose> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(test::random_pose(rng, kMsra));
  return out;
}

std::vector<HandPose> perturbed(Rng& rng, const std::vector<HandPose>& gt, double sigma) {
  std::vector<HandPose> out = gt;
  for (auto& p : out)
    for (auto& j : p.joints) j += Vec3{sigma * rng.gaussian(), sigma * rng.gaussian(), sigma * rng.gaussian()};
  return out;
}

std::vector<std::optional<FingerFlags>> random_flags(Rng& rng, std::size_t n) {
  std::vector<std::optional<FingerFlags>> out(n);
  for (auto& f : out) {
    FingerFlags x{};
    for (auto& b : x) b = rng.uniform() < 0.5;
    f = x;
  }
  return out;
}

TEST(MeanJointError, ZeroAndThreeFourFive) {
  Rng rng(1);
  const auto gt = random_poses(rng, 3);
  for (double e : mean_joint_error(gt, gt)) EXPECT_EQ(e, 0.0);
  auto pred = gt;
  pred[0][6] += Vec3{3, 4, 0};
  pred[1][6] += Vec3{0, 3, 4};
  pred[2][6] += Vec3{4, 0, 3};
  const auto e = mean_joint_error(pred, gt);
  EXPECT_NEAR(e[6], 5.0, 1e-12);
  EXPECT_EQ(e[5], 0.0);
}

TEST(MeanJointError, MatchesSingleLoopRecomputation) {
  Rng rng(2);
  const auto gt = random_poses(rng, 200);
  const auto pred = perturbed(rng, gt, 8.0);
  const auto e = mean_joint_error(pred, gt);
  for (int j = 0; j < 21; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const double dx = pred[i][j].x - gt[i][j].x, dy = pred[i][j].y - gt[i][j].y, dz = pred[i][j].z - gt[i][j].z;
      s += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    EXPECT_NEAR(e[j], s / 200.0, 1e-9);
  }
}

TEST(MeanJointError, Mismatches) {
  Rng rng(3);
  const auto gt = random_poses(rng, 3);
  EXPECT_THROW(mean_joint_error(std::span(gt).first(2), gt), DataError);
  std::vector<HandPose> icvl{test::random_pose(rng, shared_skeleton("icvl16"))};
  EXPECT_THROW(mean_joint_error(icvl, std::span(gt).first(1)), DataError);
  EXPECT_TRUE(mean_joint_error({}, {}).empty());
}

TEST(FingerErrors, ConsistentWithPerJointErrors) {
  Rng rng(4);
  const auto gt = random_poses(rng, 50);
  const auto pred = perturbed(rng, gt, 5.0);
  const auto per_joint = mean_joint_error(pred, gt);
  const FingerErrors fe = finger_and_tip_errors(pred, gt);
  double mf = 0, mt = 0;
  for (int f = 0; f < kFingerCount; ++f) {
    EXPECT_NEAR(fe.tip[f], per_joint[kMsra->fingertip(f)], 1e-12);
    double s = 0;
    for (int j : kMsra->finger_chains[f]) s += per_joint[j];
    EXPECT_NEAR(fe.finger[f], s / kMsra->finger_chains[f].size(), 1e-9);
    mf += fe.finger[f];
    mt += fe.tip[f];
  }
  EXPECT_NEAR(fe.mean_finger, mf / 5, 1e-9);
  EXPECT_NEAR(fe.mean_tip, mt / 5, 1e-9);
  const FingerErrors zero = finger_and_tip_errors(gt, gt);
  for (int f = 0; f < kFingerCount; ++f) EXPECT_EQ(zero.finger[f], 0.0);
}

TEST(StretchedErrors, AllStretchedEqualsAllFingers) {
  Rng rng(5);
  const auto gt = random_poses(rng, 40);
  const auto pred = perturbed(rng, gt, 5.0);
  std::vector<std::optional<FingerFlags>> all(gt.size(), FingerFlags{true, true, true, true, true});
  const StretchedErrors st = stretched_errors(pred, gt, all);
  const FingerErrors fe = finger_and_tip_errors(pred, gt);
  for (int f = 0; f < kFingerCount; ++f) {
    EXPECT_NEAR(*st.finger[f], fe.finger[f], 1e-9);
    EXPECT_NEAR(*st.tip[f], fe.tip[f], 1e-9);
    EXPECT_EQ(st.count[f], gt.size());
  }
  EXPECT_NEAR(*st.mean_tip, fe.mean_tip, 1e-9);
}

TEST(StretchedErrors, MatchesFilteredRecomputation) {
  const auto data = test::synth_samples(60, 6);
  Rng rng(6);
  std::vector<HandPose> gt;
  std::vector<std::optional<FingerFlags>> flags;
  for (const auto& s : data) {
    gt.push_back(s.pose);
    flags.push_back(s.stretched);
  }
  const auto pred = perturbed(rng, gt, 6.0);
  const StretchedErrors st = stretched_errors(pred, gt, flags);
  double tip_sum_all = 0;
  int present = 0;
  for (int f = 0; f < kFingerCount; ++f) {
    double tsum = 0, fsum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (!(*flags[i])[f]) continue;
      ++n;
      tsum += distance(pred[i][kMsra->fingertip(f)], gt[i][kMsra->fingertip(f)]);
      double c = 0;
      for (int j : kMsra->finger_chains[f]) c += distance(pred[i][j], gt[i][j]);
      fsum += c / kMsra->finger_chains[f].size();
    }
    EXPECT_EQ(st.count[f], n);
    if (n == 0) {
      EXPECT_FALSE(st.tip[f].has_value());
      continue;
    }
    EXPECT_NEAR(*st.tip[f], tsum / n, 1e-9);
    EXPECT_NEAR(*st.finger[f], fsum / n, 1e-9);
    tip_sum_all += tsum / n;
    ++present;
  }
  EXPECT_NEAR(*st.mean_tip, tip_sum_all / present, 1e-9);
}

TEST(StretchedErrors, EmptySubsetIsExplicit) {
  Rng rng(7);
  const auto gt = random_poses(rng, 5);
  std::vector<std::optional<FingerFlags>> none(gt.size(), FingerFlags{});
  const StretchedErrors st = stretched_errors(gt, gt, none);
  EXPECT_TRUE(st.empty());
  EXPECT_FALSE(st.mean_finger.has_value());
  const EvalReport r = evaluate("x", gt, gt, none);
  ASSERT_TRUE(r.stretched.has_value());
  EXPECT_TRUE(r.stretched->empty());
  EXPECT_NE(report_csv(r).find("stretched_mean_fingertip,0,,0"), std::string::npos);
  EXPECT_FALSE(evaluate("x", gt, gt).stretched.has_value());
  EXPECT_THROW(stretched_errors(gt, gt, std::span(none).first(2)), DataError);
}

TEST(Evaluate, ZeroErrorSampleNeverIncreasesMeans) {
  Rng rng(8);
  auto gt = random_poses(rng, 30);
  auto pred = perturbed(rng, gt, 7.0);
  auto flags = random_flags(rng, gt.size());
  const EvalReport before = evaluate("m", pred, gt, flags);
  const HandPose extra = test::random_pose(rng, kMsra);
  gt.push_back(extra);
  pred.push_back(extra);
  flags.push_back(FingerFlags{true, true, true, true, true});
  const EvalReport after = evaluate("m", pred, gt, flags);
  EXPECT_LE(after.mean_joint, before.mean_joint);
  for (int j = 0; j < 21; ++j) EXPECT_LE(after.per_joint[j], before.per_joint[j]);
  for (int f = 0; f < kFingerCount; ++f) {
    EXPECT_LE(after.fingers.tip[f], before.fingers.tip[f]);
    EXPECT_LE(after.fingers.finger[f], before.fingers.finger[f]);
    if (before.stretched->tip[f]) {
      EXPECT_LE(*after.stretched->tip[f], *before.stretched->tip[f]);
    }
  }
}

TEST(ReportCsv, RoundTripsNumbers) {
  Rng rng(9);
  const auto gt = random_poses(rng, 25);
  const auto pred = perturbed(rng, gt, 4.0);
  const EvalReport r = evaluate("refined", pred, gt, random_flags(rng, gt.size()));
  const auto rows = report_rows(r);
  const auto parsed = parse_report_csv(report_csv(r));
  ASSERT_EQ(parsed.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(parsed[i].section, rows[i].section);
    EXPECT_EQ(parsed[i].name, rows[i].name);
    EXPECT_EQ(parsed[i].index, rows[i].index);
    EXPECT_EQ(parsed[i].count, rows[i].count);
    ASSERT_EQ(parsed[i].mean_mm.has_value(), rows[i].mean_mm.has_value());
    if (rows[i].mean_mm) {
      EXPECT_NEAR(*parsed[i].mean_mm, *rows[i].mean_mm, 1e-9 * std::max(1.0, *rows[i].mean_mm));
    }
  }
  EXPECT_THROW(parse_report_csv("wrong,header\n"), FormatError);
  try {
    parse_report_csv("section,name,index,mean_mm,count\njoint,j,0,1.5,3\njoint,j,x,1,1\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 3u);
  }
}

TEST(ReportJson, FieldsAndEmit) {
  Rng rng(10);
  const auto gt = random_poses(rng, 4);
  const auto pred = perturbed(rng, gt, 2.0);
  const EvalReport r = evaluate("baseline", pred, gt, random_flags(rng, gt.size()));
  const std::string json = report_json(r);
  EXPECT_NE(json.find("\"method\": \"baseline\""), std::string::npos);
  EXPECT_NE(json.find("\"mean_fingertip_mm\""), std::string::npos);
  test::TempDir dir;
  emit_report(r, dir / "r.json");
  emit_report(r, dir / "r.csv");
  std::stringstream a, b;
  a << std::ifstream(dir / "r.json").rdbuf();
  b << std::ifstream(dir / "r.csv").rdbuf();
  EXPECT_EQ(a.str(), json);
  EXPECT_EQ(b.str(), report_csv(r));
  EXPECT_THROW(emit_report(r, dir / "no" / "r.json"), IoError);
}

TEST(RenderTables, LayoutAndNumbers) {
  Rng rng(11);
  const auto gt = random_poses(rng, 10);
  const auto flags = random_flags(rng, gt.size());
  const std::vector<EvalReport> reports{evaluate("baseline", perturbed(rng, gt, 9.0), gt, flags),
                                        evaluate("refined", perturbed(rng, gt, 3.0), gt, flags)};
  const std::string t = render_tables(reports);
  EXPECT_NE(t.find("| method | baseline | refined |"), std::string::npos);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *reports[1].stretched->mean_tip);
  EXPECT_NE(t.find("| stretching-out fingertips (mm) |"), std::string::npos);
  EXPECT_NE(t.find(buf), std::string::npos);
  const std::vector<EvalReport> no_flags{evaluate("b", gt, gt)};
  EXPECT_NE(render_tables(no_flags).find("| stretching-out fingertips (mm) | n/a |"), std::string::npos);
}

TEST(Overlay, MarkersLandOnProjectedJoints) {
  const SynthHand hand = generate_synth(SynthHandSpec::open_hand(), 1);
  const CameraIntrinsics cam;
  const RgbImage img = render_overlay(hand.image, hand.pose, cam);
  ASSERT_EQ(img.width, hand.image.width());
  const int n = static_cast<int>(hand.pose.size());
  int checked = 0;
  for (int j = 0; j < n; ++j) {
    const PixelF p = project(hand.pose[j], cam);
    bool covered = false;
    for (int k = j + 1; k < n; ++k) {
      const PixelF q = project(hand.pose[k], cam);
      covered |= std::max(std::abs(q.rounded().u - p.rounded().u), std::abs(q.rounded().v - p.rounded().v)) <= 2;
    }
    if (covered) continue;
    const auto color = joint_color(j, n);
    double su = 0, sv = 0;
    int count = 0;
    for (int v = 0; v < img.height; ++v)
      for (int u = 0; u < img.width; ++u)
        if (img.get(u, v) == color) {
          su += u;
          sv += v;
          ++count;
        }
    ASSERT_EQ(count, 9) << "joint " << j;
    EXPECT_LE(std::abs(su / count - p.u), 1.0);
    EXPECT_LE(std::abs(sv / count - p.v), 1.0);
    ++checked;
  }
  EXPECT_GE(checked, 15);

  test::TempDir dir;
  write_overlay(dir / "o.png", hand.image, hand.pose, cam);
  EXPECT_EQ(read_rgb_png(dir / "o.png").data, img.data);
}

TEST(JointColor, DistinctPerJoint) {
  std::set<std::array<std::uint8_t, 3>> seen;
  for (int j = 0; j < 21; ++j) seen.insert(joint_color(j, 21));
  EXPECT_EQ(seen.size(), 21u);
  EXPECT_EQ(seen.count({255, 255, 255}), 0u);
}

// Writes sample reports for schema validation when IHPE_REPORT_DIR is set.
TEST(ReportJson, SchemaSamples) {
  const char* dir = std::getenv("IHPE_REPORT_DIR");
  if (dir == nullptr) GTEST_SKIP() << "IHPE_REPORT_DIR not set";
  Rng rng(12);
  const auto gt = random_poses(rng, 8);
  const auto pred = perturbed(rng, gt, 3.0);
  const std::filesystem::path out(dir);
  emit_report(evaluate("with_flags", pred, gt, random_flags(rng, gt.size())), out / "with_flags.json");
  emit_report(evaluate("no_flags", pred, gt), out / "no_flags.json");
  std::vector<std::optional<FingerFlags>> none(gt.size(), FingerFlags{});
  emit_report(evaluate("empty_subset", pred, gt, none), out / "empty_subset.json");
  const std::vector<HandPose> icvl_gt{test::random_pose(rng, shared_skeleton("icvl16"))};
  emit_report(evaluate("icvl", icvl_gt, icvl_gt), out / "icvl.json");
}

}  // namespace
}  // namespace ihpe
