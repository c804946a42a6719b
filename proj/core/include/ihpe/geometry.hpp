#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ihpe/errors.hpp"

namespace ihpe {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }
inline double squared_distance(const Vec3& a, const Vec3& b) { return (a - b).squared_norm(); }

/// Integer image coordinate: u is the column, v the row.
struct Pixel {
  int u = 0;
  int v = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Sub-pixel image coordinate, as produced by projection.
struct PixelF {
  double u = 0.0;
  double v = 0.0;

  Pixel rounded() const {
    return {static_cast<int>(std::floor(u + 0.5)), static_cast<int>(std::floor(v + 0.5))};
  }
  friend bool operator==(const PixelF&, const PixelF&) = default;
};

struct CameraIntrinsics {
  double fx = 241.42;
  double fy = 241.42;
  double cx = 160.0;
  double cy = 120.0;

  /// Throws ConfigError unless both focal lengths are positive and finite.
  void validate() const;
};

inline constexpr float kDefaultBackground = 10000.0f;

/// Dense row-major depth grid in millimetres. Pixels that are not part of the
/// hand hold exactly `background()`; every foreground depth lies in (0, background).
class DepthImage {
 public:
  DepthImage() = default;
  DepthImage(int width, int height, float background = kDefaultBackground);
  /// Adopts `depths`; values <= 0, non-finite values or values >= background become background.
  DepthImage(int width, int height, std::vector<float> depths, float background = kDefaultBackground);

  int width() const { return width_; }
  int height() const { return height_; }
  float background() const { return background_; }
  std::span<const float> depths() const { return depths_; }

  bool in_bounds(int u, int v) const { return u >= 0 && v >= 0 && u < width_ && v < height_; }
  bool in_bounds(Pixel p) const { return in_bounds(p.u, p.v); }

  /// Unchecked read.
  float operator()(int u, int v) const { return depths_[static_cast<std::size_t>(v) * width_ + u]; }
  /// Reads background outside the grid.
  float at_or_background(int u, int v) const { return in_bounds(u, v) ? (*this)(u, v) : background_; }
  /// Throws BoundsError outside the grid.
  float at(Pixel p) const;

  bool is_foreground(int u, int v) const { return in_bounds(u, v) && (*this)(u, v) < background_; }
  bool is_foreground(Pixel p) const { return is_foreground(p.u, p.v); }

  /// Sets a depth, mapping invalid or too-far values to background.
  void set(int u, int v, float depth);

  friend bool operator==(const DepthImage& a, const DepthImage& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.background_ == b.background_ &&
           a.depths_ == b.depths_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  float background_ = kDefaultBackground;
  std::vector<float> depths_;
};

/// Binary image, row-major, 1 = true.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool in_bounds(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  bool operator()(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u] != 0; }
  bool get(int u, int v) const { return in_bounds(u, v) && (*this)(u, v); }
  void set(int u, int v, bool value) { bits[static_cast<std::size_t>(v) * width + u] = value ? 1 : 0; }
  std::size_t count() const;
  friend bool operator==(const Mask&, const Mask&) = default;
};

/// 3D point for pixel `p` of `img`. Throws BoundsError / BackgroundError.
Vec3 backproject(const DepthImage& img, Pixel p, const CameraIntrinsics& intr);
/// Pure pinhole back-projection of (u, v) at depth `depth_mm`.
Vec3 backproject(double u, double v, double depth_mm, const CameraIntrinsics& intr);
/// Throws DegenerateError for z <= 0.
PixelF project(const Vec3& pt, const CameraIntrinsics& intr);

Mask foreground_mask(const DepthImage& img);

/// Centroid of the back-projected foreground point cloud. Throws NoHandError when empty.
Vec3 foreground_centroid(const DepthImage& img, const CameraIntrinsics& intr);

inline constexpr int kFingerCount = 5;

enum class Finger : int { Thumb = 0, Index = 1, Middle = 2, Ring = 3, Little = 4 };

const char* finger_name(int finger);

/// One flag per finger, thumb..little.
using FingerFlags = std::array<bool, kFingerCount>;

/// Joint layout of a hand model. Finger chains are stored thumb..little, each
/// ordered root to tip. `palm_joints` starts with the wrist (or palm centre)
/// followed by the five finger roots.
struct SkeletonSpec {
  std::string name;
  int joint_count = 0;
  std::vector<int> palm_joints;
  std::array<std::vector<int>, kFingerCount> finger_chains;

  int wrist() const { return palm_joints.front(); }
  int root(int finger) const { return finger_chains[finger].front(); }
  int fingertip(int finger) const { return finger_chains[finger].back(); }
  std::array<int, kFingerCount> fingertip_indices() const;
  /// Chain joints excluding the root.
  std::vector<int> finger_joints_without_root(int finger) const;
  /// Finger owning `joint`, or -1 for joints that only belong to the palm.
  int finger_of(int joint) const;
  bool is_palm_joint(int joint) const;

  /// Throws ConfigError when the layout breaks the chain/palm invariants.
  void validate() const;

  bool same_layout(const SkeletonSpec& o) const {
    return joint_count == o.joint_count && palm_joints == o.palm_joints &&
           finger_chains == o.finger_chains;
  }

  /// 21 joints: wrist, then index, middle, ring, little, thumb (root..tip, 4 each).
  static SkeletonSpec msra21();
  /// 16 joints: palm, then thumb, index, middle, ring, little (root..tip, 3 each).
  static SkeletonSpec icvl16();
  /// Looks up a built-in layout by name ("msra21", "icvl16").
  static SkeletonSpec by_name(const std::string& name);
};

using SkeletonPtr = std::shared_ptr<const SkeletonSpec>;

/// Process-wide instance of a built-in layout.
SkeletonPtr shared_skeleton(const std::string& name);

/// Joint positions in camera-space millimetres.
struct HandPose {
  std::vector<Vec3> joints;
  SkeletonPtr skeleton;

  HandPose() = default;
  explicit HandPose(SkeletonPtr skel);
  HandPose(SkeletonPtr skel, std::vector<Vec3> joints);

  std::size_t size() const { return joints.size(); }
  Vec3& operator[](std::size_t i) { return joints[i]; }
  const Vec3& operator[](std::size_t i) const { return joints[i]; }

  /// Throws DataError if the joint count disagrees with the skeleton or a coordinate is non-finite.
  void validate(const std::string& context = {}) const;
};

/// Non-owning view of one annotated image.
struct PoseExample {
  const DepthImage* image = nullptr;
  const HandPose* pose = nullptr;
};

}  // namespace ihpe
