#include "ihpe/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace ihpe {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    throw ConfigError("camera intrinsics need positive finite focal lengths");
  }
}

DepthImage::DepthImage(int width, int height, float background)
    : width_(width),
      height_(height),
      background_(background),
      depths_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), background) {
  if (width < 0 || height < 0) throw BoundsError("negative image dimensions");
  if (!(background > 0.0f)) throw ConfigError("background sentinel must be positive");
}

DepthImage::DepthImage(int width, int height, std::vector<float> depths, float background)
    : width_(width), height_(height), background_(background), depths_(std::move(depths)) {
  if (width < 0 || height < 0) throw BoundsError("negative image dimensions");
  if (!(background > 0.0f)) throw ConfigError("background sentinel must be positive");
  if (depths_.size() != static_cast<std::size_t>(width) * height) {
    throw BoundsError("depth buffer holds " + std::to_string(depths_.size()) + " values, expected " +
                      std::to_string(static_cast<std::size_t>(width) * height));
  }
  for (float& d : depths_) {
    if (!(d > 0.0f) || !std::isfinite(d) || d >= background_) d = background_;
  }
}

float DepthImage::at(Pixel p) const {
  if (!in_bounds(p)) {
    throw BoundsError("pixel (" + std::to_string(p.u) + "," + std::to_string(p.v) +
                      ") outside " + std::to_string(width_) + "x" + std::to_string(height_));
  }
  return (*this)(p.u, p.v);
}

void DepthImage::set(int u, int v, float depth) {
  if (!in_bounds(u, v)) throw BoundsError("set outside image");
  if (!(depth > 0.0f) || !std::isfinite(depth) || depth >= background_) depth = background_;
  depths_[static_cast<std::size_t>(v) * width_ + u] = depth;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

Vec3 backproject(double u, double v, double depth_mm, const CameraIntrinsics& intr) {
  return {(u - intr.cx) * depth_mm / intr.fx, (v - intr.cy) * depth_mm / intr.fy, depth_mm};
}

Vec3 backproject(const DepthImage& img, Pixel p, const CameraIntrinsics& intr) {
  const float d = img.at(p);
  if (d >= img.background()) {
    throw BackgroundError("pixel (" + std::to_string(p.u) + "," + std::to_string(p.v) +
                          ") is background");
  }
  return backproject(p.u, p.v, d, intr);
}

PixelF project(const Vec3& pt, const CameraIntrinsics& intr) {
  if (!(pt.z > 0.0)) throw DegenerateError("cannot project a point with z <= 0");
  return {intr.fx * pt.x / pt.z + intr.cx, intr.fy * pt.y / pt.z + intr.cy};
}

Mask foreground_mask(const DepthImage& img) {
  Mask m(img.width(), img.height());
  const auto depths = img.depths();
  const float bg = img.background();
  for (std::size_t i = 0; i < depths.size(); ++i) m.bits[i] = depths[i] < bg ? 1 : 0;
  return m;
}

Vec3 foreground_centroid(const DepthImage& img, const CameraIntrinsics& intr) {
  Vec3 sum;
  std::size_t n = 0;
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const float d = img(u, v);
      if (d < img.background()) {
        sum += backproject(u, v, d, intr);
        ++n;
      }
    }
  }
  if (n == 0) throw NoHandError("image has no foreground pixels");
  return sum / static_cast<double>(n);
}

const char* finger_name(int finger) {
  static constexpr const char* kNames[] = {"thumb", "index", "middle", "ring", "little"};
  return finger >= 0 && finger < kFingerCount ? kNames[finger] : "unknown";
}

std::array<int, kFingerCount> SkeletonSpec::fingertip_indices() const {
  std::array<int, kFingerCount> tips{};
  for (int f = 0; f < kFingerCount; ++f) tips[f] = fingertip(f);
  return tips;
}

std::vector<int> SkeletonSpec::finger_joints_without_root(int finger) const {
  const auto& chain = finger_chains[finger];
  return {chain.begin() + 1, chain.end()};
}

int SkeletonSpec::finger_of(int joint) const {
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& chain = finger_chains[f];
    if (std::find(chain.begin(), chain.end(), joint) != chain.end()) return f;
  }
  return -1;
}

bool SkeletonSpec::is_palm_joint(int joint) const {
  return std::find(palm_joints.begin(), palm_joints.end(), joint) != palm_joints.end();
}

void SkeletonSpec::validate() const {
  auto fail = [&](const std::string& why) {
    throw ConfigError("skeleton '" + name + "': " + why);
  };
  if (joint_count <= 0) fail("joint_count must be positive");
  if (palm_joints.size() != kFingerCount + 1) fail("palm needs wrist + five roots");
  std::vector<int> seen(joint_count, 0);
  auto mark = [&](int j) {
    if (j < 0 || j >= joint_count) fail("joint index " + std::to_string(j) + " out of range");
    ++seen[j];
  };
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& chain = finger_chains[f];
    if (chain.size() < 2) fail(std::string(finger_name(f)) + " chain needs root and tip");
    if (palm_joints[f + 1] != chain.front()) fail("palm root order must follow finger order");
    for (int j : chain) mark(j);
  }
  mark(palm_joints[0]);
  for (int j = 0; j < joint_count; ++j) {
    if (seen[j] != 1) fail("joint " + std::to_string(j) + " must appear exactly once");
  }
}

SkeletonSpec SkeletonSpec::msra21() {
  SkeletonSpec s;
  s.name = "msra21";
  s.joint_count = 21;
  s.finger_chains[0] = {17, 18, 19, 20};
  s.finger_chains[1] = {1, 2, 3, 4};
  s.finger_chains[2] = {5, 6, 7, 8};
  s.finger_chains[3] = {9, 10, 11, 12};
  s.finger_chains[4] = {13, 14, 15, 16};
  s.palm_joints = {0, 17, 1, 5, 9, 13};
  return s;
}

SkeletonSpec SkeletonSpec::icvl16() {
  SkeletonSpec s;
  s.name = "icvl16";
  s.joint_count = 16;
  for (int f = 0; f < kFingerCount; ++f) {
    s.finger_chains[f] = {1 + 3 * f, 2 + 3 * f, 3 + 3 * f};
  }
  s.palm_joints = {0, 1, 4, 7, 10, 13};
  return s;
}

SkeletonSpec SkeletonSpec::by_name(const std::string& name) {
  if (name == "msra21") return msra21();
  if (name == "icvl16") return icvl16();
  throw ConfigError("unknown skeleton '" + name + "'");
}

SkeletonPtr shared_skeleton(const std::string& name) {
  static const SkeletonPtr msra = std::make_shared<const SkeletonSpec>(SkeletonSpec::msra21());
  static const SkeletonPtr icvl = std::make_shared<const SkeletonSpec>(SkeletonSpec::icvl16());
  if (name == "msra21") return msra;
  if (name == "icvl16") return icvl;
  throw ConfigError("unknown skeleton '" + name + "'");
}

HandPose::HandPose(SkeletonPtr skel) : skeleton(std::move(skel)) {
  if (skeleton) joints.resize(skeleton->joint_count);
}

HandPose::HandPose(SkeletonPtr skel, std::vector<Vec3> j) : joints(std::move(j)), skeleton(std::move(skel)) {}

void HandPose::validate(const std::string& context) const {
  const std::string where = context.empty() ? "" : " (" + context + ")";
  if (!skeleton) throw DataError("pose has no skeleton" + where);
  if (static_cast<int>(joints.size()) != skeleton->joint_count) {
    throw DataError("pose has " + std::to_string(joints.size()) + " joints, skeleton '" +
                    skeleton->name + "' needs " + std::to_string(skeleton->joint_count) + where);
  }
  for (std::size_t j = 0; j < joints.size(); ++j) {
    if (!joints[j].finite()) throw DataError("joint " + std::to_string(j) + " is not finite" + where);
  }
}

}  // namespace ihpe
