#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ihpe/geometry.hpp"

namespace ihpe {

/// Per-pixel Euclidean distance (pixels) to the nearest false mask pixel.
/// Pixels outside the image count as false.
struct DistanceMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float operator()(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  float operator()(Pixel p) const { return (*this)(p.u, p.v); }
  bool in_bounds(Pixel p) const { return p.u >= 0 && p.v >= 0 && p.u < width && p.v < height; }
};

struct PalmEstimate {
  Pixel center;
  double radius = 0.0;
};

struct DetectConfig {
  /// Fingertips must lie farther than ratio x palm radius from the palm centre.
  double distance_threshold_ratio = 1.6;
  /// Half-width, in boundary samples, of the arc used for local maxima and curvature.
  int curvature_window = 11;
  /// Minimum turning angle (radians) at a fingertip.
  double curvature_min = 0.8;
  /// Fractional positions of the interior chain joints along root->tip; empty means equal spacing.
  std::vector<double> interpolation_fractions;
  /// Root sits where the distance map first reaches this fraction of the palm radius.
  double root_radius_fraction = 0.5;
  int max_fingers = kFingerCount;

  void validate() const;
};

struct DetectedFinger {
  Pixel tip;
  Pixel root;
  /// Whole chain, root first and tip last.
  std::vector<PixelF> joints;
  /// Finger index 0..4 (thumb..little) after identity matching, -1 when unassigned.
  int identity = -1;
  double tip_distance = 0.0;
};

struct FingerDetection {
  PalmEstimate palm;
  std::vector<Pixel> boundary;
  std::vector<DetectedFinger> fingers;
};

/// Exact Euclidean distance transform (Felzenszwalb-Huttenlocher lower envelope
/// on squared integer distances). Throws DegenerateError for an all-false mask.
DistanceMap distance_transform(const Mask& mask);

/// Arg-max of the distance map, ties broken by smallest row then column.
/// Throws DegenerateError if the maximum is zero.
PalmEstimate palm_center(const DistanceMap& dmap);

/// Largest 8-connected component (ties: first in raster order).
Mask largest_component(const Mask& mask);

/// Closed outer contour of the largest component, traced clockwise from its
/// first raster pixel; consecutive entries are 8-adjacent. Throws DegenerateError for an empty mask.
std::vector<Pixel> trace_boundary(const Mask& mask);

/// Boundary points that are distance maxima over the curvature window, lie
/// beyond the distance threshold and turn sharply enough. Farthest first, at most `max_fingers`.
std::vector<Pixel> detect_fingertips(std::span<const Pixel> boundary, Pixel palm_center, double palm_radius,
                                     const DetectConfig& cfg);

/// Walks tip -> palm centre and returns the first sample whose distance value
/// reaches root_radius_fraction x palm radius, or the point at palm-radius
/// distance from the centre when no sample does.
Pixel locate_root(Pixel tip, Pixel palm_center, const DistanceMap& dmap, const DetectConfig& cfg = {});

/// Chain joints root..tip for `finger` placed at the configured fractions.
std::vector<PixelF> interpolate_joints(Pixel tip, Pixel root, const SkeletonSpec& skeleton, int finger,
                                       const DetectConfig& cfg);

/// Full geometric pass on one depth image: mask, distance map, palm, contour,
/// tips, roots and interpolated chains. Identities are left unassigned.
/// Throws NoHandError when the image has no foreground.
FingerDetection detect_stretched_fingers(const DepthImage& img, const SkeletonSpec& skeleton,
                                         const DetectConfig& cfg);

/// Depth of the nearest foreground pixel to `p` (searching outward), or nullopt.
std::optional<float> nearest_foreground_depth(const DepthImage& img, Pixel p, int max_radius = 64);

/// Detected chain joints in camera space. Joints off the hand take the depth of
/// the nearest foreground pixel.
std::vector<Vec3> detected_joints_3d(const DetectedFinger& finger, const DepthImage& img,
                                     const CameraIntrinsics& intr);

/// Sum over chain joints of squared distance between a detected chain and a baseline finger.
double identity_cost(std::span<const Vec3> detected, const HandPose& baseline, int finger);

/// Assigns each detected finger the baseline finger of least cost, cheapest
/// pairs first, each baseline finger used at most once. Returns one identity
/// per detected finger (-1 if none left) and also stores it in `fingers`.
std::vector<int> match_identity(std::span<DetectedFinger> fingers, const HandPose& baseline, const DepthImage& img,
                                const CameraIntrinsics& intr);
/// Same assignment on precomputed 3D chains.
std::vector<int> match_identity(std::span<const std::vector<Vec3>> detected_chains, const HandPose& baseline);

}  // namespace ihpe
