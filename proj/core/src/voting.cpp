#include "ihpe/voting.hpp"

#include <algorithm>
#include <numeric>

#include "ihpe/rng.hpp"
#include "json_codec.hpp"

namespace ihpe {

namespace {

constexpr int kVotingManifestVersion = 1;

std::vector<Pixel> foreground_pixels(const DepthImage& img) {
  std::vector<Pixel> out;
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      if (img.is_foreground(u, v)) out.push_back({u, v});
    }
  }
  return out;
}

}  // namespace

void VotingConfig::validate() const {
  if (training_image_count < 1) throw ConfigError("voting training_image_count must be at least 1");
  if (!(distance_threshold_mm > 0.0)) throw ConfigError("voting distance threshold must be positive");
  forest.validate();
  features.validate();
  camera.validate();
}

int nearest_joint(const Vec3& point, std::span<const Vec3> joints, double* dist) {
  int best = -1;
  double best_d2 = 0.0;
  for (std::size_t k = 0; k < joints.size(); ++k) {
    const double d2 = squared_distance(point, joints[k]);
    if (best < 0 || d2 < best_d2) {
      best = static_cast<int>(k);
      best_d2 = d2;
    }
  }
  if (dist) *dist = std::sqrt(best_d2);
  return best;
}

std::vector<std::size_t> draw_training_images(std::size_t dataset_size, std::size_t count, std::uint64_t seed) {
  if (dataset_size == 0) throw EmptyTrainingError("voting training set is empty");
  Rng rng(derive_seed(seed, 3));
  std::vector<std::size_t> out;
  out.reserve(count);
  if (dataset_size >= count) {
    std::vector<std::size_t> pool(dataset_size);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + rng.below(dataset_size - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) out.push_back(rng.below(dataset_size));
  }
  return out;
}

std::vector<VotingSample> collect_training_samples(std::span<const PoseExample> examples, const VotingConfig& config,
                                                   std::uint64_t seed) {
  config.validate();
  const auto drawn = draw_training_images(examples.size(), config.training_image_count, seed);
  std::vector<VotingSample> out;
  for (std::size_t d = 0; d < drawn.size(); ++d) {
    const std::size_t i = drawn[d];
    const PoseExample& e = examples[i];
    e.pose->validate("voting sample " + std::to_string(i));
    std::vector<Pixel> pixels = foreground_pixels(*e.image);
    if (config.pixels_per_image > 0 && pixels.size() > config.pixels_per_image) {
      Rng rng(derive_seed(seed, 4, d));
      for (std::size_t k = 0; k < config.pixels_per_image; ++k) {
        std::swap(pixels[k], pixels[k + rng.below(pixels.size() - k)]);
      }
      pixels.resize(config.pixels_per_image);
      std::sort(pixels.begin(), pixels.end(), [](Pixel a, Pixel b) { return a.v != b.v ? a.v < b.v : a.u < b.u; });
    }
    for (const Pixel p : pixels) {
      const Vec3 x = backproject(*e.image, p, config.camera);
      const int k = nearest_joint(x, e.pose->joints);
      out.push_back({i, p, k, (*e.pose)[k] - x});
    }
  }
  return out;
}

Forest train_voting_forest(std::span<const PoseExample> examples, std::span<const VotingSample> samples,
                           const VotingConfig& config, std::uint64_t seed, const TrainOptions& options) {
  TrainingSet set(3);
  set.reserve(samples.size());
  for (const auto& s : samples) {
    const double t[3] = {s.offset.x, s.offset.y, s.offset.z};
    set.add(*examples[s.example].image, s.pixel, t);
  }
  return train_forest(set, config.features, config.forest, derive_seed(seed, 5), options);
}

OffsetPredictor forest_predictor(const Forest& forest) {
  if (forest.target_dim() != 3) throw DataError("voting forest must predict 3D offsets");
  return [&forest](const DepthImage& img, Pixel p) {
    double out[3];
    forest.predict(img, p, out);
    return Vec3{out[0], out[1], out[2]};
  };
}

std::vector<Voter> select_voters(const DepthImage& img, const HandPose& theta0, std::span<const int> joints_to_update,
                                 double threshold_mm, const CameraIntrinsics& camera) {
  std::vector<std::uint8_t> wanted(theta0.size(), 0);
  for (int j : joints_to_update) wanted.at(j) = 1;
  std::vector<Voter> out;
  if (joints_to_update.empty()) return out;
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      if (!img.is_foreground(u, v)) continue;
      const Vec3 x = backproject(u, v, img(u, v), camera);
      double d = 0.0;
      const int k = nearest_joint(x, theta0.joints, &d);
      if (wanted[k] && d < threshold_mm) out.push_back({{u, v}, k, x});
    }
  }
  return out;
}

InterpolatedPose interpolate_pose(const HandPose& baseline, std::span<const DetectedFinger> fingers,
                                  const DepthImage& img, const CameraIntrinsics& camera) {
  const SkeletonSpec& s = *baseline.skeleton;
  InterpolatedPose out{baseline, {}};
  for (const auto& finger : fingers) {
    if (finger.identity < 0) continue;
    const auto& chain = s.finger_chains.at(finger.identity);
    const auto pts = detected_joints_3d(finger, img, camera);
    if (pts.size() != chain.size()) throw DataError("detected chain length differs from skeleton chain");
    for (std::size_t k = 1; k < chain.size(); ++k) {
      out.pose[chain[k]] = pts[k];
      out.joints_to_update.push_back(chain[k]);
    }
  }
  std::sort(out.joints_to_update.begin(), out.joints_to_update.end());
  out.joints_to_update.erase(std::unique(out.joints_to_update.begin(), out.joints_to_update.end()),
                             out.joints_to_update.end());
  return out;
}

RefineResult refine(const DepthImage& img, const HandPose& baseline, std::span<const DetectedFinger> fingers,
                    const OffsetPredictor& predictor, const VotingConfig& config, bool keep_votes) {
  baseline.validate("baseline pose");
  InterpolatedPose theta0 = interpolate_pose(baseline, fingers, img, config.camera);
  RefineResult r;
  r.pose = baseline;
  r.interpolated = theta0.pose;
  r.updated.assign(baseline.size(), 0);
  r.vote_counts.assign(baseline.size(), 0);

  const auto voters =
      select_voters(img, theta0.pose, theta0.joints_to_update, config.distance_threshold_mm, config.camera);
  std::vector<Vec3> sum(baseline.size());
  for (const auto& voter : voters) {
    const Vec3 location = voter.position + predictor(img, voter.pixel);
    sum[voter.joint] += location;
    ++r.vote_counts[voter.joint];
    if (keep_votes) r.votes.push_back({voter.pixel, voter.joint, location});
  }
  for (int j : theta0.joints_to_update) {
    r.updated[j] = 1;
    r.pose[j] = r.vote_counts[j] > 0 ? sum[j] / static_cast<double>(r.vote_counts[j]) : theta0.pose[j];
  }
  return r;
}

VotingModel train_voting(std::span<const PoseExample> examples, SkeletonPtr skeleton, const VotingConfig& config,
                         std::uint64_t seed, const TrainOptions& options) {
  if (!skeleton) throw ConfigError("train_voting needs a skeleton");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!examples[i].pose->skeleton->same_layout(*skeleton)) {
      throw DataError("training sample " + std::to_string(i) + " uses a different skeleton");
    }
  }
  const auto samples = collect_training_samples(examples, config, seed);
  if (samples.empty()) throw EmptyTrainingError("voting training images hold no foreground pixels");
  return {std::move(skeleton), config, train_voting_forest(examples, samples, config, seed, options)};
}

void save_voting(const VotingModel& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  save_forest(model.forest, dir / "voting.forest");
  codec::json j;
  j["format"] = "ihpe-voting";
  j["version"] = kVotingManifestVersion;
  j["skeleton"] = codec::skeleton(*model.skeleton);
  j["camera"] = codec::camera(model.config.camera);
  j["training_image_count"] = model.config.training_image_count;
  j["pixels_per_image"] = model.config.pixels_per_image;
  j["distance_threshold_mm"] = model.config.distance_threshold_mm;
  j["forest"] = codec::forest_config(model.config.forest);
  j["features"] = codec::feature_config(model.config.features);
  j["forest_file"] = "voting.forest";
  codec::write_file(dir / "manifest.json", j);
}

VotingModel load_voting(const std::filesystem::path& dir) {
  const auto manifest = dir / "manifest.json";
  const codec::json j = codec::read_file(manifest);
  try {
    if (j.at("format").get<std::string>() != "ihpe-voting") {
      throw FormatError("'" + manifest.string() + "' is not a voting manifest", 0);
    }
    const int version = j.at("version").get<int>();
    if (version != kVotingManifestVersion) {
      throw VersionError("voting manifest version " + std::to_string(version) + " is not supported", version);
    }
    VotingConfig cfg;
    cfg.camera = codec::camera(j.at("camera"));
    cfg.training_image_count = j.at("training_image_count").get<std::size_t>();
    cfg.pixels_per_image = j.at("pixels_per_image").get<std::size_t>();
    cfg.distance_threshold_mm = j.at("distance_threshold_mm").get<double>();
    cfg.forest = codec::forest_config(j.at("forest"));
    cfg.features = codec::feature_config(j.at("features"));
    cfg.validate();
    Forest forest = load_forest(dir / j.at("forest_file").get<std::string>());
    if (forest.target_dim() != 3) throw FormatError("voting forest must predict 3D offsets", 0);
    return {codec::skeleton(j.at("skeleton")), cfg, std::move(forest)};
  } catch (const codec::json::exception& e) {
    throw FormatError("'" + manifest.string() + "': " + e.what(), 0);
  }
}

}  // namespace ihpe
