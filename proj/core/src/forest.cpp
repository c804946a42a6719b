#include "ihpe/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ihpe/parallel.hpp"
#include "ihpe/rng.hpp"

namespace ihpe {

void ForestConfig::validate() const {
  if (tree_count < 1 || max_depth < 0 || features_per_split < 1 || thresholds_per_feature < 1 ||
      min_samples_leaf < 1) {
    throw ConfigError("forest: tree_count, features_per_split, thresholds_per_feature and "
                      "min_samples_leaf must be positive, max_depth non-negative");
  }
  if (!(min_info_gain >= 0.0)) throw ConfigError("forest: min_info_gain must be >= 0");
}

TrainingSet::TrainingSet(int target_dim) : target_dim_(target_dim) {
  if (target_dim < 1) throw DataError("training targets need at least one dimension");
}

void TrainingSet::reserve(std::size_t n) {
  samples_.reserve(n);
  targets_.reserve(n * target_dim_);
}

void TrainingSet::add(const DepthImage& image, Pixel pixel, std::span<const double> target) {
  if (static_cast<int>(target.size()) != target_dim_) {
    throw DataError("target has dimension " + std::to_string(target.size()) + ", expected " +
                    std::to_string(target_dim_));
  }
  if (!image.in_bounds(pixel)) throw BoundsError("training pixel outside its image");
  samples_.push_back({&image, pixel});
  targets_.insert(targets_.end(), target.begin(), target.end());
}

int Tree::add_split(const OffsetPair& offsets, float threshold) {
  nodes_.push_back({offsets, threshold, -1, -1});
  return static_cast<int>(nodes_.size()) - 1;
}

void Tree::set_right(int node, int right) { nodes_[node].right = right; }

int Tree::add_leaf(std::span<const double> mean, std::uint32_t sample_count) {
  if (static_cast<int>(mean.size()) != target_dim_) throw DataError("leaf mean has wrong dimension");
  Node n;
  n.leaf = static_cast<std::int32_t>(leaf_counts_.size());
  nodes_.push_back(n);
  leaf_means_.insert(leaf_means_.end(), mean.begin(), mean.end());
  leaf_counts_.push_back(sample_count);
  return static_cast<int>(nodes_.size()) - 1;
}

int Tree::route(const DepthImage& img, Pixel ref, const FeatureConfig& cfg) const {
  if (!img.in_bounds(ref)) throw BoundsError("reference pixel outside image");
  const float scale = detail::offset_scale(img(ref.u, ref.v), cfg);
  std::size_t i = 0;
  for (;;) {
    const Node& n = nodes_[i];
    if (n.leaf >= 0) return n.leaf;
    const float a = img.at_or_background(ref.u + detail::round_offset(n.offsets.first.x * scale),
                                         ref.v + detail::round_offset(n.offsets.first.y * scale));
    const float b = img.at_or_background(ref.u + detail::round_offset(n.offsets.second.x * scale),
                                         ref.v + detail::round_offset(n.offsets.second.y * scale));
    i = (a - b < n.threshold) ? i + 1 : static_cast<std::size_t>(n.right);
  }
}

int Tree::depth() const {
  int best = 0;
  // (node, depth) walk over the pre-order layout.
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    if (nodes_.empty()) break;
    const Node& n = nodes_[i];
    if (n.is_leaf()) {
      best = std::max(best, d);
    } else {
      stack.push_back({i + 1, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return best;
}

bool operator==(const Tree& a, const Tree& b) {
  if (a.target_dim_ != b.target_dim_ || a.nodes_.size() != b.nodes_.size()) return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const auto& x = a.nodes_[i];
    const auto& y = b.nodes_[i];
    if (!(x.offsets == y.offsets) || x.threshold != y.threshold || x.right != y.right || x.leaf != y.leaf) {
      return false;
    }
  }
  return a.leaf_means_ == b.leaf_means_ && a.leaf_counts_ == b.leaf_counts_;
}

Forest::Forest(FeatureConfig features, ForestConfig config, int target_dim, std::vector<Tree> trees)
    : features_(features), config_(config), target_dim_(target_dim), trees_(std::move(trees)) {
  if (trees_.empty()) throw DataError("forest needs at least one tree");
  for (const Tree& t : trees_) {
    if (t.target_dim() != target_dim_) throw DataError("tree target dimension disagrees with forest");
  }
}

Forest Forest::constant(std::vector<double> value, int tree_count, FeatureConfig features) {
  const int dim = static_cast<int>(value.size());
  std::vector<Tree> trees;
  for (int t = 0; t < tree_count; ++t) {
    Tree tree(dim);
    tree.add_leaf(value, 1);
    trees.push_back(std::move(tree));
  }
  ForestConfig cfg;
  cfg.tree_count = tree_count;
  cfg.max_depth = 0;
  return Forest(features, cfg, dim, std::move(trees));
}

void Forest::predict(const DepthImage& img, Pixel ref, std::span<double> out) const {
  if (static_cast<int>(out.size()) != target_dim_) throw DataError("prediction buffer has wrong size");
  std::fill(out.begin(), out.end(), 0.0);
  for (const Tree& t : trees_) {
    const auto mean = t.leaf_mean(t.route(img, ref, features_));
    for (int d = 0; d < target_dim_; ++d) out[d] += mean[d];
  }
  const double inv = 1.0 / static_cast<double>(trees_.size());
  for (double& v : out) v *= inv;
}

std::vector<double> Forest::predict(const DepthImage& img, Pixel ref) const {
  std::vector<double> out(target_dim_);
  predict(img, ref, out);
  return out;
}

std::span<const double> Forest::predict_tree(std::size_t tree, const DepthImage& img, Pixel ref) const {
  const Tree& t = trees_.at(tree);
  return t.leaf_mean(t.route(img, ref, features_));
}

bool operator==(const Forest& a, const Forest& b) {
  return a.features_.max_offset_radius == b.features_.max_offset_radius &&
         a.features_.depth_normalize == b.features_.depth_normalize &&
         a.features_.focal_px == b.features_.focal_px && a.config_ == b.config_ &&
         a.target_dim_ == b.target_dim_ && a.trees_ == b.trees_;
}

namespace {

class TreeTrainer {
 public:
  TreeTrainer(const TrainingSet& set, const FeatureConfig& features, const ForestConfig& config,
              std::span<const float> scales, std::uint64_t seed, TreeTrainingRecord* record)
      : set_(set),
        features_(features),
        config_(config),
        scales_(scales),
        dim_(set.target_dim()),
        rng_(seed),
        record_(record),
        tree_(set.target_dim()) {}

  Tree train() {
    const std::size_t n = set_.size();
    index_.resize(n);
    for (auto& i : index_) i = static_cast<std::uint32_t>(rng_.below(n));
    if (record_) {
      record_->bootstrap = index_;
      record_->split_gain.clear();
    }
    responses_.resize(n);
    centered_.resize(n * dim_);
    const int bins = config_.thresholds_per_feature + 1;
    bin_count_.resize(bins);
    bin_sum_.resize(static_cast<std::size_t>(bins) * dim_);
    bin_sq_.resize(bins);
    thresholds_.resize(config_.thresholds_per_feature);
    build(0, n, 0);
    return std::move(tree_);
  }

 private:
  float response(std::uint32_t s, const OffsetPair& p) const {
    const TrainingSample& smp = set_.sample(s);
    const float scale = scales_[s];
    const DepthImage& img = *smp.image;
    const float a = img.at_or_background(smp.pixel.u + detail::round_offset(p.first.x * scale),
                                         smp.pixel.v + detail::round_offset(p.first.y * scale));
    const float b = img.at_or_background(smp.pixel.u + detail::round_offset(p.second.x * scale),
                                         smp.pixel.v + detail::round_offset(p.second.y * scale));
    return a - b;
  }

  void record_gain(int node, double gain) {
    if (!record_) return;
    if (static_cast<int>(record_->split_gain.size()) <= node) {
      record_->split_gain.resize(node + 1, std::numeric_limits<double>::quiet_NaN());
    }
    record_->split_gain[node] = gain;
  }

  int make_leaf(std::size_t begin, std::size_t end) {
    std::vector<double> mean(dim_, 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      const auto t = set_.target(index_[i]);
      for (int d = 0; d < dim_; ++d) mean[d] += t[d];
    }
    const double n = static_cast<double>(end - begin);
    for (double& m : mean) m /= n;
    const int node = tree_.add_leaf(mean, static_cast<std::uint32_t>(end - begin));
    record_gain(node, std::numeric_limits<double>::quiet_NaN());
    return node;
  }

  int build(std::size_t begin, std::size_t end, int depth) {
    const std::size_t n = end - begin;
    const std::size_t min_leaf = static_cast<std::size_t>(config_.min_samples_leaf);
    if (depth >= config_.max_depth || n < 2 * min_leaf) return make_leaf(begin, end);

    // Centre the node's targets once; every candidate split reuses them.
    std::vector<double> mean(dim_, 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      const auto t = set_.target(index_[i]);
      for (int d = 0; d < dim_; ++d) mean[d] += t[d];
    }
    for (double& m : mean) m /= static_cast<double>(n);
    double parent_sse = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto t = set_.target(index_[i]);
      double* c = &centered_[(i - begin) * dim_];
      for (int d = 0; d < dim_; ++d) {
        c[d] = t[d] - mean[d];
        parent_sse += c[d] * c[d];
      }
    }
    if (!(parent_sse > 0.0)) return make_leaf(begin, end);

    const int nthr = config_.thresholds_per_feature;
    double best_gain = -std::numeric_limits<double>::infinity();
    OffsetPair best_pair;
    float best_threshold = 0.0f;

    for (int c = 0; c < config_.features_per_split; ++c) {
      const OffsetPair pair = sample_offset_pair(rng_, features_);
      float lo = std::numeric_limits<float>::infinity();
      float hi = -std::numeric_limits<float>::infinity();
      for (std::size_t i = begin; i < end; ++i) {
        const float r = response(index_[i], pair);
        responses_[i - begin] = r;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
      if (!(hi > lo)) continue;
      for (int k = 0; k < nthr; ++k) {
        thresholds_[k] = static_cast<float>(rng_.uniform(lo, hi));
      }
      std::sort(thresholds_.begin(), thresholds_.end());

      std::fill(bin_count_.begin(), bin_count_.end(), 0);
      std::fill(bin_sum_.begin(), bin_sum_.end(), 0.0);
      std::fill(bin_sq_.begin(), bin_sq_.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        // Bin b holds responses with exactly b thresholds <= r; they go left of thresholds k >= b.
        const int b = static_cast<int>(std::upper_bound(thresholds_.begin(), thresholds_.end(), responses_[i]) -
                                       thresholds_.begin());
        const double* t = &centered_[i * dim_];
        double* s = &bin_sum_[static_cast<std::size_t>(b) * dim_];
        double sq = 0.0;
        for (int d = 0; d < dim_; ++d) {
          s[d] += t[d];
          sq += t[d] * t[d];
        }
        bin_sq_[b] += sq;
        ++bin_count_[b];
      }

      std::size_t left_n = 0;
      double left_sq = 0.0;
      left_sum_.assign(dim_, 0.0);
      for (int k = 0; k < nthr; ++k) {
        left_n += bin_count_[k];
        left_sq += bin_sq_[k];
        const double* s = &bin_sum_[static_cast<std::size_t>(k) * dim_];
        for (int d = 0; d < dim_; ++d) left_sum_[d] += s[d];
        const std::size_t right_n = n - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        // Centred sums: the right side's sum is the negated left sum.
        double sum2 = 0.0;
        for (int d = 0; d < dim_; ++d) sum2 += left_sum_[d] * left_sum_[d];
        const double left_sse = left_sq - sum2 / static_cast<double>(left_n);
        const double right_sse = (parent_sse - left_sq) - sum2 / static_cast<double>(right_n);
        const double gain = (parent_sse - left_sse - right_sse) / static_cast<double>(n);
        if (gain > best_gain) {
          best_gain = gain;
          best_pair = pair;
          best_threshold = thresholds_[k];
        }
      }
    }

    if (!(best_gain >= config_.min_info_gain)) return make_leaf(begin, end);

    // Stable partition keeps the sample order, and hence the leaf sums, deterministic.
    auto mid_it = std::stable_partition(index_.begin() + begin, index_.begin() + end,
                                        [&](std::uint32_t s) { return response(s, best_pair) < best_threshold; });
    const std::size_t mid = static_cast<std::size_t>(mid_it - index_.begin());
    if (mid - begin < min_leaf || end - mid < min_leaf) return make_leaf(begin, end);

    const int node = tree_.add_split(best_pair, best_threshold);
    record_gain(node, best_gain);
    build(begin, mid, depth + 1);
    tree_.set_right(node, static_cast<int>(tree_.nodes().size()));
    build(mid, end, depth + 1);
    return node;
  }

  const TrainingSet& set_;
  const FeatureConfig& features_;
  const ForestConfig& config_;
  std::span<const float> scales_;
  int dim_;
  Rng rng_;
  TreeTrainingRecord* record_;
  Tree tree_;

  std::vector<std::uint32_t> index_;
  std::vector<float> responses_;
  std::vector<double> centered_;
  std::vector<float> thresholds_;
  std::vector<std::size_t> bin_count_;
  std::vector<double> bin_sum_;
  std::vector<double> bin_sq_;
  std::vector<double> left_sum_;
};

}  // namespace

Forest train_forest(const TrainingSet& samples, const FeatureConfig& features, const ForestConfig& config,
                    std::uint64_t seed, const TrainOptions& options) {
  features.validate();
  config.validate();
  if (samples.empty()) throw EmptyTrainingError("cannot train a forest on an empty sample set");
  if (samples.size() < static_cast<std::size_t>(config.min_samples_leaf)) {
    throw DataError("forest training needs at least min_samples_leaf (" +
                    std::to_string(config.min_samples_leaf) + ") samples, got " +
                    std::to_string(samples.size()));
  }
  std::vector<float> scales(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples.sample(i);
    scales[i] = detail::offset_scale((*s.image)(s.pixel.u, s.pixel.v), features);
    for (double t : samples.target(i)) {
      if (!std::isfinite(t)) throw DataError("training target " + std::to_string(i) + " is not finite");
    }
  }

  if (options.records) options.records->assign(config.tree_count, {});
  std::vector<Tree> trees(config.tree_count, Tree(samples.target_dim()));
  parallel_for(static_cast<std::size_t>(config.tree_count), options.threads, [&](std::size_t t) {
    TreeTrainingRecord* rec = options.records ? &(*options.records)[t] : nullptr;
    TreeTrainer trainer(samples, features, config, scales, derive_seed(seed, t), rec);
    trees[t] = trainer.train();
  });
  return Forest(features, config, samples.target_dim(), std::move(trees));
}

}  // namespace ihpe
