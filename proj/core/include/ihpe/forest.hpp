#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ihpe/features.hpp"
#include "ihpe/geometry.hpp"

namespace ihpe {

struct ForestConfig {
  int tree_count = 8;
  int max_depth = 20;
  int features_per_split = 200;
  int thresholds_per_feature = 50;
  double min_info_gain = 1e-6;
  int min_samples_leaf = 5;

  void validate() const;
  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

/// One reference pixel of one image. The image must outlive training.
struct TrainingSample {
  const DepthImage* image = nullptr;
  Pixel pixel;
};

/// Samples plus a flat row-major target matrix (size() x target_dim()).
class TrainingSet {
 public:
  explicit TrainingSet(int target_dim);

  void reserve(std::size_t n);
  void add(const DepthImage& image, Pixel pixel, std::span<const double> target);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  int target_dim() const { return target_dim_; }
  const TrainingSample& sample(std::size_t i) const { return samples_[i]; }
  std::span<const double> target(std::size_t i) const {
    return {targets_.data() + i * target_dim_, static_cast<std::size_t>(target_dim_)};
  }

 private:
  int target_dim_;
  std::vector<TrainingSample> samples_;
  std::vector<double> targets_;
};

/// Binary regression tree stored in pre-order: a split's left child is the
/// next node, its right child is at `right`. Leaves are numbered in pre-order.
class Tree {
 public:
  struct Node {
    OffsetPair offsets;
    float threshold = 0.0f;
    std::int32_t right = -1;
    std::int32_t leaf = -1;
    bool is_leaf() const { return leaf >= 0; }
  };

  explicit Tree(int target_dim) : target_dim_(target_dim) {}

  /// Appends a split node; its right child index must be set once known.
  int add_split(const OffsetPair& offsets, float threshold);
  void set_right(int node, int right);
  int add_leaf(std::span<const double> mean, std::uint32_t sample_count);

  /// Leaf index reached by `ref`: goes left when the feature is below the threshold.
  int route(const DepthImage& img, Pixel ref, const FeatureConfig& cfg) const;

  int target_dim() const { return target_dim_; }
  std::span<const Node> nodes() const { return nodes_; }
  std::size_t leaf_count() const { return leaf_counts_.size(); }
  std::span<const double> leaf_mean(int leaf) const {
    return {leaf_means_.data() + static_cast<std::size_t>(leaf) * target_dim_,
            static_cast<std::size_t>(target_dim_)};
  }
  std::uint32_t leaf_samples(int leaf) const { return leaf_counts_[leaf]; }
  /// Number of edges on the longest root-to-leaf path.
  int depth() const;

  friend bool operator==(const Tree&, const Tree&);

 private:
  int target_dim_;
  std::vector<Node> nodes_;
  std::vector<double> leaf_means_;
  std::vector<std::uint32_t> leaf_counts_;
};

class Forest {
 public:
  Forest(FeatureConfig features, ForestConfig config, int target_dim, std::vector<Tree> trees);

  /// `tree_count` single-leaf trees predicting `value` everywhere.
  static Forest constant(std::vector<double> value, int tree_count = 1,
                         FeatureConfig features = FeatureConfig::voting_defaults());

  /// Mean of the leaf means reached in every tree. `out` must hold target_dim() values.
  void predict(const DepthImage& img, Pixel ref, std::span<double> out) const;
  std::vector<double> predict(const DepthImage& img, Pixel ref) const;
  /// Leaf mean of a single tree.
  std::span<const double> predict_tree(std::size_t tree, const DepthImage& img, Pixel ref) const;

  int target_dim() const { return target_dim_; }
  const FeatureConfig& feature_config() const { return features_; }
  const ForestConfig& config() const { return config_; }
  std::span<const Tree> trees() const { return trees_; }

  friend bool operator==(const Forest&, const Forest&);

 private:
  FeatureConfig features_;
  ForestConfig config_;
  int target_dim_;
  std::vector<Tree> trees_;
};

/// Per-tree training trace: the bootstrap draw and the gain of each accepted
/// split (indexed by node; NaN at leaves).
struct TreeTrainingRecord {
  std::vector<std::uint32_t> bootstrap;
  std::vector<double> split_gain;
};

struct TrainOptions {
  int threads = 1;
  std::vector<TreeTrainingRecord>* records = nullptr;
};

/// Bagged variance-reduction regression forest over depth-difference features.
/// Throws EmptyTrainingError for an empty set and DataError for fewer than
/// min_samples_leaf samples or non-finite targets.
Forest train_forest(const TrainingSet& samples, const FeatureConfig& features, const ForestConfig& config,
                    std::uint64_t seed, const TrainOptions& options = {});

// Binary model format (little-endian), see docs/formats.md.
inline constexpr std::uint32_t kForestFormatVersion = 1;

std::vector<std::uint8_t> serialize_forest(const Forest& forest);
/// Throws FormatError (with byte offset) or VersionError.
Forest deserialize_forest(std::span<const std::uint8_t> bytes);
void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

}  // namespace ihpe
