#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ihpe/geometry.hpp"
#include "ihpe/rng.hpp"

namespace ihpe {

struct Offset2 {
  float x = 0.0f;
  float y = 0.0f;
  friend bool operator==(const Offset2&, const Offset2&) = default;
};

/// Probe offsets of one depth-difference feature. With depth normalisation the
/// offsets are millimetres at the reference pixel's depth, otherwise pixels.
struct OffsetPair {
  Offset2 first;
  Offset2 second;
  friend bool operator==(const OffsetPair&, const OffsetPair&) = default;
};

struct FeatureConfig {
  double max_offset_radius = 60.0;
  bool depth_normalize = true;
  /// Focal length (px) converting millimetre offsets into pixels.
  double focal_px = 241.42;

  void validate() const;

  static FeatureConfig voting_defaults() { return {}; }
  static FeatureConfig cascade_defaults() {
    FeatureConfig c;
    c.max_offset_radius = 120.0;
    return c;
  }
};

struct ProbePixels {
  Pixel first;
  Pixel second;
};

namespace detail {

inline int round_offset(float v) { return static_cast<int>(std::floor(v + 0.5f)); }

inline float offset_scale(float ref_depth, const FeatureConfig& cfg) {
  return cfg.depth_normalize ? static_cast<float>(cfg.focal_px) / ref_depth : 1.0f;
}

}  // namespace detail

/// Pixel locations probed by `pair` around `ref` (may lie outside the image).
inline ProbePixels probe_pixels(const DepthImage& img, Pixel ref, const OffsetPair& pair,
                                const FeatureConfig& cfg) {
  const float s = detail::offset_scale(img.at(ref), cfg);
  return {{ref.u + detail::round_offset(pair.first.x * s), ref.v + detail::round_offset(pair.first.y * s)},
          {ref.u + detail::round_offset(pair.second.x * s), ref.v + detail::round_offset(pair.second.y * s)}};
}

/// I(ref + first) - I(ref + second). Probes outside the image read the
/// background sentinel. Throws BoundsError if `ref` is outside the image.
inline float depth_difference(const DepthImage& img, Pixel ref, const OffsetPair& pair,
                              const FeatureConfig& cfg) {
  const ProbePixels p = probe_pixels(img, ref, pair, cfg);
  return img.at_or_background(p.first.u, p.first.v) - img.at_or_background(p.second.u, p.second.v);
}

OffsetPair sample_offset_pair(Rng& rng, const FeatureConfig& cfg);

/// `count` pairs, each coordinate uniform on [-r, r]. Deterministic in `seed`.
std::vector<OffsetPair> sample_offset_pairs(std::uint64_t seed, const FeatureConfig& cfg, std::size_t count);

}  // namespace ihpe
