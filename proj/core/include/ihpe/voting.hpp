#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "ihpe/finger_detect.hpp"
#include "ihpe/forest.hpp"
#include "ihpe/geometry.hpp"

namespace ihpe {

struct VotingConfig {
  std::size_t training_image_count = 10000;
  double distance_threshold_mm = 10.0;
  /// Foreground pixels drawn per training image; 0 keeps every pixel.
  std::size_t pixels_per_image = 0;
  ForestConfig forest;
  FeatureConfig features = FeatureConfig::voting_defaults();
  CameraIntrinsics camera;

  void validate() const;
};

/// One labelled training pixel: `offset` runs from the pixel's 3D point to its nearest ground-truth joint.
struct VotingSample {
  std::size_t example = 0;
  Pixel pixel;
  int joint = -1;
  Vec3 offset;
};

/// Index of the joint nearest to `point`, lowest index on ties.
int nearest_joint(const Vec3& point, std::span<const Vec3> joints, double* dist = nullptr);

/// Indices of the training images: `count` draws without replacement, or with
/// replacement when the dataset is smaller.
std::vector<std::size_t> draw_training_images(std::size_t dataset_size, std::size_t count, std::uint64_t seed);

/// Labels the foreground pixels of the drawn images against their ground truth.
std::vector<VotingSample> collect_training_samples(std::span<const PoseExample> examples, const VotingConfig& config,
                                                   std::uint64_t seed);

Forest train_voting_forest(std::span<const PoseExample> examples, std::span<const VotingSample> samples,
                           const VotingConfig& config, std::uint64_t seed, const TrainOptions& options = {});

/// Per-pixel 3D offset prediction.
using OffsetPredictor = std::function<Vec3(const DepthImage&, Pixel)>;

/// Wraps a 3-output forest. The forest must outlive the predictor.
OffsetPredictor forest_predictor(const Forest& forest);

struct Voter {
  Pixel pixel;
  int joint = -1;
  Vec3 position;
};

/// Foreground pixels whose nearest joint of `theta0` is in `joints_to_update`
/// and lies closer than `threshold_mm`, in raster order.
std::vector<Voter> select_voters(const DepthImage& img, const HandPose& theta0, std::span<const int> joints_to_update,
                                 double threshold_mm, const CameraIntrinsics& camera);

struct Vote {
  Pixel voter;
  int joint = -1;
  Vec3 location;
};

struct InterpolatedPose {
  HandPose pose;
  /// Non-root joints of the identified fingers, ascending.
  std::vector<int> joints_to_update;
};

/// Baseline pose with the non-root joints of every identified finger replaced
/// by its interpolated chain, lifted to 3D at the nearest foreground depth.
InterpolatedPose interpolate_pose(const HandPose& baseline, std::span<const DetectedFinger> fingers,
                                  const DepthImage& img, const CameraIntrinsics& camera);

struct RefineResult {
  HandPose pose;
  HandPose interpolated;
  /// 1 for joints whose value may differ from the baseline.
  std::vector<std::uint8_t> updated;
  std::vector<int> vote_counts;
  /// Filled only when requested.
  std::vector<Vote> votes;
};

/// Each joint to update moves to the mean of its voters' (3D position +
/// prediction); joints without voters keep their interpolated location and every
/// other joint keeps its baseline value.
RefineResult refine(const DepthImage& img, const HandPose& baseline, std::span<const DetectedFinger> fingers,
                    const OffsetPredictor& predictor, const VotingConfig& config, bool keep_votes = false);

struct VotingModel {
  SkeletonPtr skeleton;
  VotingConfig config;
  Forest forest;
};

VotingModel train_voting(std::span<const PoseExample> examples, SkeletonPtr skeleton, const VotingConfig& config,
                         std::uint64_t seed, const TrainOptions& options = {});

/// Writes manifest.json and voting.forest into `dir`.
void save_voting(const VotingModel& model, const std::filesystem::path& dir);
VotingModel load_voting(const std::filesystem::path& dir);

}  // namespace ihpe
