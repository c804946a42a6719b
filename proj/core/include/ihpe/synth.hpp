#pragma once

#include <array>
#include <cstdint>

#include "ihpe/geometry.hpp"
#include "ihpe/rng.hpp"

namespace ihpe {

struct SynthFingerSpec {
  bool stretched = true;
  /// Direction relative to the hand's up axis, clockwise in the image, radians.
  double angle_rad = 0.0;
  double length_mm = 70.0;
  double width_mm = 10.0;
  /// Depth change per millimetre along a stretched finger.
  double depth_slope = 0.0;
};

/// Fully explicit description of one rendered hand. Layout is computed on the
/// palm plane in millimetres and mapped to the image at `palm_depth_mm`.
struct SynthHandSpec {
  int image_width = 320;
  int image_height = 240;
  CameraIntrinsics camera;
  float background = kDefaultBackground;

  double center_u = 160.0;
  double center_v = 140.0;
  double palm_depth_mm = 250.0;
  double rotation_rad = 0.0;
  double palm_radius_mm = 42.0;
  double palm_bulge_mm = 8.0;
  double tilt_u = 0.0;
  double tilt_v = 0.0;
  /// Finger roots sit at this fraction of the palm radius from the palm centre.
  double root_radius_ratio = 0.52;
  /// Palm joints lie this far behind the palm plane.
  double palm_joint_depth_mm = 5.0;
  std::array<SynthFingerSpec, kFingerCount> fingers;
  double noise_mm = 0.0;

  void validate() const;
  /// Five stretched fingers spread over the upper half of the palm.
  static SynthHandSpec open_hand();
};

struct SynthHand {
  DepthImage image;
  HandPose pose;
  std::array<bool, kFingerCount> stretched{};
  /// Outermost rendered point of each stretched finger (the contour extremum).
  std::array<PixelF, kFingerCount> tip_pixels{};
  /// Chain joints of each finger projected to the image, root first.
  std::array<std::vector<PixelF>, kFingerCount> chain_pixels;
  /// Part of the hand fell outside the frame.
  bool clipped = false;
};

/// Renders the palm as a domed disk and each stretched finger as a capsule;
/// curled fingers lie folded on the palm and leave the silhouette a disk.
/// Uses the MSRA 21-joint layout. `seed` drives only the depth noise.
SynthHand generate_synth(const SynthHandSpec& spec, std::uint64_t seed);

/// Per-subject hand geometry.
struct SynthSubject {
  double palm_radius_mm = 42.0;
  std::array<double, kFingerCount> length_mm{};
  std::array<double, kFingerCount> width_mm{};
};

SynthSubject synth_subject(std::uint64_t profile_seed, int subject);

/// Ranges for per-image pose variation.
struct SynthVariation {
  double depth_min_mm = 235.0;
  double depth_max_mm = 285.0;
  double center_jitter_u = 12.0;
  double center_jitter_v = 8.0;
  double rotation_max_rad = 25.0 * M_PI / 180.0;
  double finger_angle_jitter_rad = 5.0 * M_PI / 180.0;
  double depth_slope_max = 0.25;
  double tilt_max = 0.1;
  double noise_mm = 1.0;
};

/// Random hand of `subject` with the given stretched fingers.
SynthHandSpec random_hand_spec(Rng& rng, const SynthSubject& subject, const std::array<bool, kFingerCount>& stretched,
                               const SynthVariation& variation);

}  // namespace ihpe
