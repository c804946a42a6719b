#include <gtest/gtest.h>

#include <cmath>

#include "ihpe/cascade.hpp"
#include "ihpe/errors.hpp"
#include "test_support.hpp"

namespace ihpe {
namespace {

const SkeletonPtr kMsra = shared_skeleton("msra21");

CascadeConfig tiny_config(int trees = 2, int depth = 8) {
  CascadeConfig c;
  c.forest.tree_count = trees;
  c.forest.max_depth = depth;
  c.forest.features_per_split = 40;
  c.forest.thresholds_per_feature = 10;
  return c;
}

std::vector<PoseExample> examples_of(const std::vector<LabeledImage>& s) { return pose_examples(s); }

CascadeModel zero_model(SkeletonPtr skel, const CascadeConfig& cfg, CascadeInit init) {
  std::vector<Forest> palm;
  for (int t = 0; t < cfg.palm_stages; ++t)
    palm.push_back(Forest::constant(std::vector<double>(3 * skel->palm_joints.size(), 0.0)));
  std::vector<std::vector<Forest>> fingers(cfg.finger_stages);
  for (auto& stage : fingers)
    for (int f = 0; f < kFingerCount; ++f)
      stage.push_back(Forest::constant(std::vector<double>(3 * skel->finger_joints_without_root(f).size(), 0.0)));
  return CascadeModel(skel, cfg, std::move(init), std::move(palm), std::move(fingers));
}

TEST(InitPalmPose, SinglePoseIsItsOwnMean) {
  Rng rng(1);
  const DepthImage img = test::plane_image(4, 4, 300.0f);
  const HandPose p = test::random_pose(rng, kMsra);
  const PoseExample e{&img, &p};
  const auto mean = init_palm_pose(std::span(&e, 1));
  ASSERT_EQ(mean.size(), kMsra->palm_joints.size());
  for (std::size_t k = 0; k < mean.size(); ++k) EXPECT_EQ(mean[k], p[kMsra->palm_joints[k]]);
}

TEST(InitPalmPose, SymmetricPosesGiveMidpoints) {
  Rng rng(2);
  const DepthImage img = test::plane_image(4, 4, 300.0f);
  HandPose a = test::random_pose(rng, kMsra), b(kMsra);
  for (std::size_t j = 0; j < a.size(); ++j) b[j] = a[j] * -1.0;
  const std::vector<PoseExample> ex{{&img, &a}, {&img, &b}};
  for (const auto& m : init_palm_pose(ex)) EXPECT_LE(m.norm(), 1e-12);
}

TEST(InitPalmPose, MatchesIndependentSummation) {
  Rng rng(3);
  const DepthImage img = test::plane_image(4, 4, 300.0f);
  std::vector<HandPose> poses;
  for (int i = 0; i < 100; ++i) poses.push_back(test::random_pose(rng, kMsra));
  std::vector<PoseExample> ex;
  for (const auto& p : poses) ex.push_back({&img, &p});
  const auto mean = init_palm_pose(ex);
  for (std::size_t k = 0; k < mean.size(); ++k) {
    double sx = 0, sy = 0, sz = 0;
    for (int i = 99; i >= 0; --i) {
      const Vec3& q = poses[i][kMsra->palm_joints[k]];
      sx += q.x;
      sy += q.y;
      sz += q.z;
    }
    EXPECT_NEAR(mean[k].x, sx / 100, 1e-9);
    EXPECT_NEAR(mean[k].y, sy / 100, 1e-9);
    EXPECT_NEAR(mean[k].z, sz / 100, 1e-9);
  }
  EXPECT_THROW(init_palm_pose({}), EmptyTrainingError);
}

TEST(PlacePalm, CentroidMovesToForeground) {
  DepthImage img(320, 240);
  img.set(160, 120, 300.0f);
  const std::vector<Vec3> mean{{10, 0, 0}, {-10, 4, 20}, {0, -4, -20}};
  const auto placed = place_palm(mean, img, CameraIntrinsics{});
  Vec3 c;
  for (const auto& p : placed) c += p;
  c = c / 3.0;
  EXPECT_LE(distance(c, {0, 0, 300}), 1e-9);
  EXPECT_LE(distance(placed[0] - placed[1], mean[0] - mean[1]), 1e-12);
}

TEST(InitFingerPoses, FollowWristToMiddleRootDirection) {
  HandPose pose(kMsra);
  pose[kMsra->wrist()] = {0, 0, 0};
  pose[kMsra->root(2)] = {0, -10, 0};
  pose[kMsra->root(0)] = {-20, -5, 3};
  pose[kMsra->root(1)] = {-8, -10, 0};
  pose[kMsra->root(3)] = {8, -10, 1};
  pose[kMsra->root(4)] = {16, -8, 2};
  const std::array<double, kFingerCount> spacing{15, 15, 15, 15, 15};
  init_finger_poses(pose, spacing);
  const Vec3 dir{0, -1, 0};
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& chain = kMsra->finger_chains[f];
    const Vec3 root = pose[chain.front()];
    for (std::size_t k = 1; k < chain.size(); ++k) {
      const Vec3 expected = root + dir * (15.0 * k);
      EXPECT_LE(distance(pose[chain[k]], expected), 1e-12);
      EXPECT_LE((pose[chain[k]] - root).cross(dir).norm(), 1e-12);
    }
  }
}

TEST(InitFingerPoses, DegenerateDirectionThrows) {
  HandPose pose(kMsra);
  EXPECT_THROW(init_finger_poses(pose, {10, 10, 10, 10, 10}), DegenerateError);
}

TEST(Stages, UpdateAddsForestPrediction) {
  const auto samples = test::synth_samples(1, 5);
  const auto& img = samples[0].image;
  HandPose pose = samples[0].pose;
  const HandPose before = pose;
  std::vector<double> palm_value(3 * kMsra->palm_joints.size());
  for (std::size_t i = 0; i < palm_value.size(); ++i) palm_value[i] = 0.5 * static_cast<double>(i) - 3.0;
  apply_palm_stage(Forest::constant(palm_value), img, CameraIntrinsics{}, *kMsra, pose);
  for (std::size_t j = 0; j < pose.size(); ++j) {
    const auto& palm = kMsra->palm_joints;
    const auto it = std::find(palm.begin(), palm.end(), static_cast<int>(j));
    if (it == palm.end()) {
      EXPECT_EQ(pose[j], before[j]);
      continue;
    }
    const std::size_t k = static_cast<std::size_t>(it - palm.begin());
    const Vec3 expected = before[j] + Vec3{palm_value[3 * k], palm_value[3 * k + 1], palm_value[3 * k + 2]};
    EXPECT_LE(distance(pose[j], expected), 1e-12);
  }

  // A finger stage moves only that finger's non-root joints.
  const HandPose mid = pose;
  apply_finger_stage(Forest::constant(std::vector<double>(9, 2.0)), img, CameraIntrinsics{}, *kMsra, 1, pose);
  const auto moved = kMsra->finger_joints_without_root(1);
  for (std::size_t j = 0; j < pose.size(); ++j) {
    if (std::find(moved.begin(), moved.end(), static_cast<int>(j)) != moved.end()) {
      EXPECT_LE(distance(pose[j], mid[j] + Vec3{2, 2, 2}), 1e-12);
    } else {
      EXPECT_EQ(pose[j], mid[j]);
    }
  }
  EXPECT_THROW(apply_finger_stage(Forest::constant({1.0}), img, CameraIntrinsics{}, *kMsra, 1, pose), DataError);
}

TEST(PredictCascade, ZeroForestsReturnInitialisation) {
  const auto samples = test::synth_samples(4, 6);
  const auto ex = examples_of(samples);
  CascadeInit init{init_palm_pose(ex), mean_phalanx_lengths(ex)};
  const CascadeConfig cfg = tiny_config();
  const CascadeModel model = zero_model(kMsra, cfg, init);
  for (const auto& s : samples) {
    HandPose expected(kMsra);
    const auto palm = place_palm(init.mean_palm, s.image, cfg.camera);
    for (std::size_t k = 0; k < palm.size(); ++k) expected[kMsra->palm_joints[k]] = palm[k];
    init_finger_poses(expected, init.phalanx_length);
    EXPECT_EQ(predict_cascade(model, s.image).joints, expected.joints);
  }
  EXPECT_THROW(predict_cascade(model, DepthImage(320, 240)), NoHandError);
}

TEST(TrainCascade, ZeroResidualFixedPoint) {
  // One foreground pixel on the optical axis, so the placed mean palm equals
  // the ground truth, and fingers built by the initialisation rule itself.
  DepthImage img(320, 240);
  img.set(160, 120, 300.0f);
  HandPose gt(kMsra);
  const std::vector<Vec3> palm{{0, 40, 300}, {-24, -8, 300}, {-8, -16, 300}, {8, -16, 300}, {24, -8, 300}, {0, 8, 300}};
  for (std::size_t k = 0; k < palm.size(); ++k) gt[kMsra->palm_joints[k]] = palm[k];
  const std::array<double, kFingerCount> spacing{20, 22, 24, 22, 18};
  init_finger_poses(gt, spacing);
  std::vector<PoseExample> ex(6, PoseExample{&img, &gt});
  CascadeConfig cfg = tiny_config(2, 6);
  cfg.forest.min_samples_leaf = 1;
  const CascadeModel model = train_cascade(ex, kMsra, cfg, 3);
  for (const auto& f : model.palm_forests())
    for (double v : f.predict(img, {160, 120})) EXPECT_LE(std::abs(v), 1e-9);
  const HandPose out = predict_cascade(model, img);
  for (std::size_t j = 0; j < out.size(); ++j) EXPECT_LE(distance(out[j], gt[j]), 1e-9) << "joint " << j;
}

TEST(TrainCascade, SingleImageIsMemorised) {
  const auto samples = test::synth_samples(1, 8);
  const auto ex = examples_of(samples);
  CascadeConfig cfg = tiny_config(1, 10);
  cfg.forest.min_samples_leaf = 1;
  const CascadeModel model = train_cascade(ex, kMsra, cfg, 1);
  const HandPose out = predict_cascade(model, samples[0].image);
  for (std::size_t j = 0; j < out.size(); ++j) EXPECT_LE(distance(out[j], samples[0].pose[j]), 1.0) << "joint " << j;
}

class TrainedCascade : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    samples_ = new std::vector<LabeledImage>(test::synth_samples(60, 9));
    model_ = new CascadeModel(train_cascade(pose_examples(*samples_), kMsra, tiny_config(3, 10), 77));
  }
  static void TearDownTestSuite() {
    delete model_;
    delete samples_;
  }
  static std::vector<LabeledImage>* samples_;
  static CascadeModel* model_;
};
std::vector<LabeledImage>* TrainedCascade::samples_ = nullptr;
CascadeModel* TrainedCascade::model_ = nullptr;

TEST_F(TrainedCascade, ForestGridShape) {
  EXPECT_EQ(model_->palm_forests().size(), 3u);
  EXPECT_EQ(model_->finger_stage_count(), 3);
  for (int t = 0; t < 3; ++t)
    for (int f = 0; f < kFingerCount; ++f)
      EXPECT_EQ(model_->finger_forest(t, f).target_dim(), 3 * static_cast<int>(kMsra->finger_joints_without_root(f).size()));
  EXPECT_EQ(model_->palm_forests()[0].target_dim(), 18);
}

TEST_F(TrainedCascade, TrainingErrorDoesNotIncrease) {
  const auto& st = model_->stats;
  double prev = st.palm_initial_error;
  for (double e : st.palm_stage_error) {
    EXPECT_LE(e, prev + 1e-9);
    prev = e;
  }
  auto mean5 = [](const std::array<double, kFingerCount>& a) {
    double s = 0;
    for (double v : a) s += v;
    return s / kFingerCount;
  };
  prev = mean5(st.finger_initial_error);
  for (const auto& e : st.finger_stage_error) {
    EXPECT_LE(mean5(e), prev + 1e-9);
    prev = mean5(e);
  }
}

TEST_F(TrainedCascade, FingerStagesLeavePalmFixed) {
  const CascadeModel& m = *model_;
  for (const auto& s : *samples_) {
    HandPose pose(kMsra);
    const auto palm = place_palm(m.init().mean_palm, s.image, m.config().camera);
    for (std::size_t k = 0; k < palm.size(); ++k) pose[kMsra->palm_joints[k]] = palm[k];
    for (const auto& f : m.palm_forests()) apply_palm_stage(f, s.image, m.config().camera, *kMsra, pose);
    const HandPose full = predict_cascade(m, s.image);
    for (int j : kMsra->palm_joints) EXPECT_EQ(full[j], pose[j]);
  }
}

TEST_F(TrainedCascade, SaveLoadRoundTrip) {
  test::TempDir dir;
  save_cascade(*model_, dir.path());
  const CascadeModel loaded = load_cascade(dir.path());
  EXPECT_EQ(loaded.skeleton().name, kMsra->name);
  EXPECT_EQ(loaded.init().mean_palm, model_->init().mean_palm);
  for (const auto& s : *samples_) EXPECT_EQ(predict_cascade(loaded, s.image).joints, predict_cascade(*model_, s.image).joints);
  EXPECT_THROW(load_cascade(dir / "missing"), IoError);
}

TEST_F(TrainedCascade, DeterministicTraining) {
  const CascadeModel again = train_cascade(pose_examples(*samples_), kMsra, tiny_config(3, 10), 77);
  for (int t = 0; t < 3; ++t) EXPECT_TRUE(again.palm_forests()[t] == model_->palm_forests()[t]);
  for (int t = 0; t < 3; ++t)
    for (int f = 0; f < kFingerCount; ++f) EXPECT_TRUE(again.finger_forest(t, f) == model_->finger_forest(t, f));
  CascadeTrainOptions threaded;
  threaded.threads = 3;
  const CascadeModel par = train_cascade(pose_examples(*samples_), kMsra, tiny_config(3, 10), 77, threaded);
  for (int t = 0; t < 3; ++t) EXPECT_TRUE(par.palm_forests()[t] == model_->palm_forests()[t]);
}

TEST(TrainCascade, RejectsBadInput) {
  EXPECT_THROW(train_cascade({}, kMsra, tiny_config(), 1), EmptyTrainingError);
  const auto samples = test::synth_samples(2, 10);
  HandPose broken = samples[1].pose;
  broken[4].x = NAN;
  std::vector<PoseExample> ex{{&samples[0].image, &samples[0].pose}, {&samples[1].image, &broken}};
  EXPECT_THROW(train_cascade(ex, kMsra, tiny_config(), 1), DataError);
  CascadeConfig cfg = tiny_config();
  cfg.palm_stages = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace ihpe
