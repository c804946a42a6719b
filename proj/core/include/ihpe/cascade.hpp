#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ihpe/forest.hpp"
#include "ihpe/geometry.hpp"

namespace ihpe {

struct CascadeConfig {
  int palm_stages = 3;
  int finger_stages = 3;
  ForestConfig forest;
  FeatureConfig features = FeatureConfig::cascade_defaults();
  CameraIntrinsics camera;

  void validate() const;
};

/// Mean palm pose and per-finger default phalanx spacing learned from the training set.
struct CascadeInit {
  /// Palm joints in skeleton palm order.
  std::vector<Vec3> mean_palm;
  std::array<double, kFingerCount> phalanx_length{};
};

/// Training error after each stage: mean per-joint distance (mm) between the
/// ground truth and the updated estimate.
struct CascadeTrainingStats {
  double palm_initial_error = 0.0;
  std::vector<double> palm_stage_error;
  std::array<double, kFingerCount> finger_initial_error{};
  /// finger_stage_error[t][f]
  std::vector<std::array<double, kFingerCount>> finger_stage_error;
};

class CascadeModel {
 public:
  CascadeModel(SkeletonPtr skeleton, CascadeConfig config, CascadeInit init, std::vector<Forest> palm_forests,
               std::vector<std::vector<Forest>> finger_forests);

  const SkeletonSpec& skeleton() const { return *skeleton_; }
  const SkeletonPtr& skeleton_ptr() const { return skeleton_; }
  const CascadeConfig& config() const { return config_; }
  const CascadeInit& init() const { return init_; }
  std::span<const Forest> palm_forests() const { return palm_forests_; }
  const Forest& finger_forest(int stage, int finger) const { return finger_forests_[stage][finger]; }
  int finger_stage_count() const { return static_cast<int>(finger_forests_.size()); }

  CascadeTrainingStats stats;

 private:
  SkeletonPtr skeleton_;
  CascadeConfig config_;
  CascadeInit init_;
  std::vector<Forest> palm_forests_;
  // [stage][finger]
  std::vector<std::vector<Forest>> finger_forests_;
};

/// Per-joint mean of the ground-truth palm joints. Throws EmptyTrainingError.
std::vector<Vec3> init_palm_pose(std::span<const PoseExample> examples);

/// Mean palm translated so the centroid of its joints sits on the foreground
/// point-cloud centroid of `img`. Throws NoHandError.
std::vector<Vec3> place_palm(std::span<const Vec3> mean_palm, const DepthImage& img, const CameraIntrinsics& camera);

/// Mean ground-truth distance between consecutive chain joints, per finger.
std::array<double, kFingerCount> mean_phalanx_lengths(std::span<const PoseExample> examples);

/// Places every finger's non-root joints along normalize(middle root - wrist),
/// joint k of a chain at root + k * spacing * dir. Palm joints are untouched.
/// Throws DegenerateError when the direction has zero length.
void init_finger_poses(HandPose& pose, const std::array<double, kFingerCount>& spacing);

/// Image pixel nearest to the projection of `joint`, clamped into the image.
Pixel reference_pixel(const Vec3& joint, const DepthImage& img, const CameraIntrinsics& camera);

/// One palm update: the stage forest is evaluated at every palm joint's
/// reference pixel and the mean prediction is added to the palm joints.
void apply_palm_stage(const Forest& forest, const DepthImage& img, const CameraIntrinsics& camera,
                      const SkeletonSpec& skeleton, HandPose& pose);
/// Same for the non-root joints of one finger.
void apply_finger_stage(const Forest& forest, const DepthImage& img, const CameraIntrinsics& camera,
                        const SkeletonSpec& skeleton, int finger, HandPose& pose);

struct CascadeTrainOptions {
  int threads = 1;
  /// Called with a short description before each stage is trained.
  std::function<void(const std::string&)> progress;
};

/// Algorithm: T1 palm stages regressing palm residuals, then T2 stages of five
/// finger forests regressing finger residuals with the palm fixed.
CascadeModel train_cascade(std::span<const PoseExample> examples, SkeletonPtr skeleton, const CascadeConfig& config,
                           std::uint64_t seed, const CascadeTrainOptions& options = {});

/// Baseline pose of one image. Throws NoHandError for an empty image.
HandPose predict_cascade(const CascadeModel& model, const DepthImage& img);

/// Writes manifest.json plus one forest file per stage into `dir`.
void save_cascade(const CascadeModel& model, const std::filesystem::path& dir);
CascadeModel load_cascade(const std::filesystem::path& dir);

}  // namespace ihpe
