#include "ihpe/cascade.hpp"

#include <algorithm>

#include "ihpe/parallel.hpp"
#include "json_codec.hpp"

namespace ihpe {

namespace {

constexpr int kCascadeManifestVersion = 1;

void check_examples(std::span<const PoseExample> examples, const SkeletonSpec& skeleton) {
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    const std::string where = "training sample " + std::to_string(i);
    if (e.image == nullptr || e.pose == nullptr) throw DataError(where + " is missing its image or pose");
    e.pose->validate(where);
    if (!e.pose->skeleton->same_layout(skeleton)) throw DataError(where + " uses a different skeleton");
  }
}

std::vector<int> non_root_joints(const SkeletonSpec& s, int finger) { return s.finger_joints_without_root(finger); }

double mean_error(std::span<const PoseExample> examples, const std::vector<HandPose>& est, std::span<const int> joints) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    for (int j : joints) {
      sum += distance((*examples[i].pose)[j], est[i][j]);
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

void apply_stage(const Forest& forest, const DepthImage& img, const CameraIntrinsics& camera,
                 std::span<const int> joints, HandPose& pose) {
  const std::size_t dim = 3 * joints.size();
  if (static_cast<std::size_t>(forest.target_dim()) != dim) {
    throw DataError("stage forest predicts " + std::to_string(forest.target_dim()) + " values, stage needs " +
                    std::to_string(dim));
  }
  std::vector<double> acc(dim, 0.0);
  std::vector<double> out(dim);
  for (int j : joints) {
    forest.predict(img, reference_pixel(pose[j], img, camera), out);
    for (std::size_t d = 0; d < dim; ++d) acc[d] += out[d];
  }
  const double inv = 1.0 / static_cast<double>(joints.size());
  for (std::size_t k = 0; k < joints.size(); ++k) {
    pose[joints[k]] += Vec3{acc[3 * k] * inv, acc[3 * k + 1] * inv, acc[3 * k + 2] * inv};
  }
}

// Reference pixels at the current estimates, target the stacked residual of the stage joints.
TrainingSet stage_samples(std::span<const PoseExample> examples, const std::vector<HandPose>& est,
                          std::span<const int> joints, const CameraIntrinsics& camera) {
  const int dim = static_cast<int>(3 * joints.size());
  TrainingSet set(dim);
  set.reserve(examples.size() * joints.size());
  std::vector<double> target(dim);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const HandPose& gt = *examples[i].pose;
    for (std::size_t k = 0; k < joints.size(); ++k) {
      const Vec3 r = gt[joints[k]] - est[i][joints[k]];
      target[3 * k] = r.x;
      target[3 * k + 1] = r.y;
      target[3 * k + 2] = r.z;
    }
    for (int j : joints) set.add(*examples[i].image, reference_pixel(est[i][j], *examples[i].image, camera), target);
  }
  return set;
}

std::string palm_file(int t) { return "palm_" + std::to_string(t) + ".forest"; }
std::string finger_file(int t, int f) {
  return "finger_" + std::to_string(t) + "_" + finger_name(f) + ".forest";
}

}  // namespace

void CascadeConfig::validate() const {
  if (palm_stages < 1 || finger_stages < 1) throw ConfigError("cascade needs at least one palm and one finger stage");
  forest.validate();
  features.validate();
  camera.validate();
}

CascadeModel::CascadeModel(SkeletonPtr skeleton, CascadeConfig config, CascadeInit init,
                           std::vector<Forest> palm_forests, std::vector<std::vector<Forest>> finger_forests)
    : skeleton_(std::move(skeleton)),
      config_(config),
      init_(std::move(init)),
      palm_forests_(std::move(palm_forests)),
      finger_forests_(std::move(finger_forests)) {
  if (!skeleton_) throw ConfigError("cascade model needs a skeleton");
  if (static_cast<int>(palm_forests_.size()) != config_.palm_stages ||
      static_cast<int>(finger_forests_.size()) != config_.finger_stages) {
    throw DataError("cascade stage count disagrees with its config");
  }
  if (init_.mean_palm.size() != skeleton_->palm_joints.size()) throw DataError("mean palm pose has wrong joint count");
  for (const auto& f : palm_forests_) {
    if (f.target_dim() != static_cast<int>(3 * skeleton_->palm_joints.size())) {
      throw DataError("palm forest has wrong target dimension");
    }
  }
  for (const auto& stage : finger_forests_) {
    if (stage.size() != kFingerCount) throw DataError("finger stage must hold five forests");
    for (int f = 0; f < kFingerCount; ++f) {
      if (stage[f].target_dim() != static_cast<int>(3 * skeleton_->finger_joints_without_root(f).size())) {
        throw DataError("finger forest has wrong target dimension");
      }
    }
  }
}

std::vector<Vec3> init_palm_pose(std::span<const PoseExample> examples) {
  if (examples.empty()) throw EmptyTrainingError("cannot build a mean palm pose from an empty training set");
  const SkeletonSpec& s = *examples.front().pose->skeleton;
  std::vector<Vec3> mean(s.palm_joints.size());
  for (const auto& e : examples) {
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += (*e.pose)[s.palm_joints[k]];
  }
  for (auto& m : mean) m = m / static_cast<double>(examples.size());
  return mean;
}

std::vector<Vec3> place_palm(std::span<const Vec3> mean_palm, const DepthImage& img, const CameraIntrinsics& camera) {
  const Vec3 target = foreground_centroid(img, camera);
  Vec3 c;
  for (const auto& p : mean_palm) c += p;
  c = c / static_cast<double>(mean_palm.size());
  std::vector<Vec3> out(mean_palm.begin(), mean_palm.end());
  for (auto& p : out) p += target - c;
  return out;
}

std::array<double, kFingerCount> mean_phalanx_lengths(std::span<const PoseExample> examples) {
  if (examples.empty()) throw EmptyTrainingError("cannot measure phalanx lengths on an empty training set");
  const SkeletonSpec& s = *examples.front().pose->skeleton;
  std::array<double, kFingerCount> out{};
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& chain = s.finger_chains[f];
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& e : examples) {
      for (std::size_t k = 1; k < chain.size(); ++k) {
        sum += distance((*e.pose)[chain[k]], (*e.pose)[chain[k - 1]]);
        ++count;
      }
    }
    out[f] = count ? sum / static_cast<double>(count) : 0.0;
  }
  return out;
}

void init_finger_poses(HandPose& pose, const std::array<double, kFingerCount>& spacing) {
  const SkeletonSpec& s = *pose.skeleton;
  const Vec3 axis = pose[s.root(static_cast<int>(Finger::Middle))] - pose[s.wrist()];
  const double len = axis.norm();
  if (!(len > 0.0)) throw DegenerateError("wrist and middle finger root coincide; finger direction undefined");
  const Vec3 dir = axis / len;
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& chain = s.finger_chains[f];
    const Vec3 root = pose[chain.front()];
    for (std::size_t k = 1; k < chain.size(); ++k) {
      pose[chain[k]] = root + dir * (static_cast<double>(k) * spacing[f]);
    }
  }
}

Pixel reference_pixel(const Vec3& joint, const DepthImage& img, const CameraIntrinsics& camera) {
  const Pixel p = project(joint, camera).rounded();
  return {std::clamp(p.u, 0, img.width() - 1), std::clamp(p.v, 0, img.height() - 1)};
}

void apply_palm_stage(const Forest& forest, const DepthImage& img, const CameraIntrinsics& camera,
                      const SkeletonSpec& skeleton, HandPose& pose) {
  apply_stage(forest, img, camera, skeleton.palm_joints, pose);
}

void apply_finger_stage(const Forest& forest, const DepthImage& img, const CameraIntrinsics& camera,
                        const SkeletonSpec& skeleton, int finger, HandPose& pose) {
  apply_stage(forest, img, camera, non_root_joints(skeleton, finger), pose);
}

CascadeModel train_cascade(std::span<const PoseExample> examples, SkeletonPtr skeleton, const CascadeConfig& config,
                           std::uint64_t seed, const CascadeTrainOptions& options) {
  config.validate();
  if (!skeleton) throw ConfigError("train_cascade needs a skeleton");
  skeleton->validate();
  if (examples.empty()) throw EmptyTrainingError("cascade training set is empty");
  check_examples(examples, *skeleton);
  auto report = [&](const std::string& msg) {
    if (options.progress) options.progress(msg);
  };

  const CameraIntrinsics& cam = config.camera;
  CascadeInit init;
  init.mean_palm = init_palm_pose(examples);
  init.phalanx_length = mean_phalanx_lengths(examples);

  const std::size_t n = examples.size();
  std::vector<HandPose> est(n, HandPose(skeleton));
  parallel_for(n, options.threads, [&](std::size_t i) {
    const auto palm = place_palm(init.mean_palm, *examples[i].image, cam);
    for (std::size_t k = 0; k < palm.size(); ++k) est[i][skeleton->palm_joints[k]] = palm[k];
  });

  CascadeTrainingStats stats;
  const auto& palm_joints = skeleton->palm_joints;
  stats.palm_initial_error = mean_error(examples, est, palm_joints);
  TrainOptions topt;
  topt.threads = options.threads;

  std::vector<Forest> palm_forests;
  for (int t = 0; t < config.palm_stages; ++t) {
    report("palm stage " + std::to_string(t + 1) + "/" + std::to_string(config.palm_stages));
    const TrainingSet set = stage_samples(examples, est, palm_joints, cam);
    palm_forests.push_back(train_forest(set, config.features, config.forest, derive_seed(seed, 1, t), topt));
    const Forest& forest = palm_forests.back();
    parallel_for(n, options.threads,
                 [&](std::size_t i) { apply_palm_stage(forest, *examples[i].image, cam, *skeleton, est[i]); });
    stats.palm_stage_error.push_back(mean_error(examples, est, palm_joints));
  }

  parallel_for(n, options.threads, [&](std::size_t i) { init_finger_poses(est[i], init.phalanx_length); });
  for (int f = 0; f < kFingerCount; ++f) {
    stats.finger_initial_error[f] = mean_error(examples, est, non_root_joints(*skeleton, f));
  }

  std::vector<std::vector<Forest>> finger_forests;
  for (int t = 0; t < config.finger_stages; ++t) {
    std::vector<Forest> stage;
    std::array<double, kFingerCount> err{};
    for (int f = 0; f < kFingerCount; ++f) {
      report("finger stage " + std::to_string(t + 1) + "/" + std::to_string(config.finger_stages) + " " +
             finger_name(f));
      const auto joints = non_root_joints(*skeleton, f);
      const TrainingSet set = stage_samples(examples, est, joints, cam);
      stage.push_back(train_forest(set, config.features, config.forest, derive_seed(seed, 2, t, f), topt));
      const Forest& forest = stage.back();
      parallel_for(n, options.threads,
                   [&](std::size_t i) { apply_finger_stage(forest, *examples[i].image, cam, *skeleton, f, est[i]); });
      err[f] = mean_error(examples, est, joints);
    }
    stats.finger_stage_error.push_back(err);
    finger_forests.push_back(std::move(stage));
  }

  CascadeModel model(std::move(skeleton), config, std::move(init), std::move(palm_forests), std::move(finger_forests));
  model.stats = std::move(stats);
  return model;
}

HandPose predict_cascade(const CascadeModel& model, const DepthImage& img) {
  const SkeletonSpec& s = model.skeleton();
  const CameraIntrinsics& cam = model.config().camera;
  HandPose pose(model.skeleton_ptr());
  const auto palm = place_palm(model.init().mean_palm, img, cam);
  for (std::size_t k = 0; k < palm.size(); ++k) pose[s.palm_joints[k]] = palm[k];
  for (const Forest& forest : model.palm_forests()) apply_palm_stage(forest, img, cam, s, pose);
  init_finger_poses(pose, model.init().phalanx_length);
  for (int t = 0; t < model.finger_stage_count(); ++t) {
    for (int f = 0; f < kFingerCount; ++f) apply_finger_stage(model.finger_forest(t, f), img, cam, s, f, pose);
  }
  return pose;
}

void save_cascade(const CascadeModel& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  using codec::json;
  const auto& cfg = model.config();
  json j;
  j["format"] = "ihpe-cascade";
  j["version"] = kCascadeManifestVersion;
  j["skeleton"] = codec::skeleton(model.skeleton());
  j["camera"] = codec::camera(cfg.camera);
  j["palm_stages"] = cfg.palm_stages;
  j["finger_stages"] = cfg.finger_stages;
  j["forest"] = codec::forest_config(cfg.forest);
  j["features"] = codec::feature_config(cfg.features);
  json palm = json::array();
  for (const auto& p : model.init().mean_palm) palm.push_back(codec::vec3(p));
  j["mean_palm"] = palm;
  j["phalanx_length"] = model.init().phalanx_length;

  json palm_files = json::array();
  for (int t = 0; t < cfg.palm_stages; ++t) {
    save_forest(model.palm_forests()[t], dir / palm_file(t));
    palm_files.push_back(palm_file(t));
  }
  j["palm_forests"] = palm_files;
  json finger_files = json::array();
  for (int t = 0; t < cfg.finger_stages; ++t) {
    json row = json::array();
    for (int f = 0; f < kFingerCount; ++f) {
      save_forest(model.finger_forest(t, f), dir / finger_file(t, f));
      row.push_back(finger_file(t, f));
    }
    finger_files.push_back(row);
  }
  j["finger_forests"] = finger_files;

  const auto& st = model.stats;
  j["training_error"] = {{"palm_initial", st.palm_initial_error},
                         {"palm_stages", st.palm_stage_error},
                         {"finger_initial", st.finger_initial_error},
                         {"finger_stages", st.finger_stage_error}};
  codec::write_file(dir / "manifest.json", j);
}

CascadeModel load_cascade(const std::filesystem::path& dir) {
  const auto manifest = dir / "manifest.json";
  const codec::json j = codec::read_file(manifest);
  try {
    if (j.at("format").get<std::string>() != "ihpe-cascade") {
      throw FormatError("'" + manifest.string() + "' is not a cascade manifest", 0);
    }
    const int version = j.at("version").get<int>();
    if (version != kCascadeManifestVersion) {
      throw VersionError("cascade manifest version " + std::to_string(version) + " is not supported", version);
    }
    SkeletonPtr skeleton = codec::skeleton(j.at("skeleton"));
    CascadeConfig cfg;
    cfg.camera = codec::camera(j.at("camera"));
    cfg.palm_stages = j.at("palm_stages").get<int>();
    cfg.finger_stages = j.at("finger_stages").get<int>();
    cfg.forest = codec::forest_config(j.at("forest"));
    cfg.features = codec::feature_config(j.at("features"));
    cfg.validate();
    CascadeInit init;
    for (const auto& p : j.at("mean_palm")) init.mean_palm.push_back(codec::vec3(p));
    init.phalanx_length = j.at("phalanx_length").get<std::array<double, kFingerCount>>();

    std::vector<Forest> palm;
    for (const auto& name : j.at("palm_forests")) palm.push_back(load_forest(dir / name.get<std::string>()));
    std::vector<std::vector<Forest>> fingers;
    for (const auto& row : j.at("finger_forests")) {
      std::vector<Forest> stage;
      for (const auto& name : row) stage.push_back(load_forest(dir / name.get<std::string>()));
      fingers.push_back(std::move(stage));
    }
    CascadeModel model(std::move(skeleton), cfg, std::move(init), std::move(palm), std::move(fingers));
    if (j.contains("training_error")) {
      const auto& te = j["training_error"];
      model.stats.palm_initial_error = te.at("palm_initial").get<double>();
      model.stats.palm_stage_error = te.at("palm_stages").get<std::vector<double>>();
      model.stats.finger_initial_error = te.at("finger_initial").get<std::array<double, kFingerCount>>();
      model.stats.finger_stage_error =
          te.at("finger_stages").get<std::vector<std::array<double, kFingerCount>>>();
    }
    return model;
  } catch (const codec::json::exception& e) {
    throw FormatError("'" + manifest.string() + "': " + e.what(), 0);
  }
}

}  // namespace ihpe
