#include "ihpe/features.hpp"

namespace ihpe {

void FeatureConfig::validate() const {
  if (!(max_offset_radius > 0.0) || !std::isfinite(max_offset_radius)) {
    throw ConfigError("features: max_offset_radius must be positive");
  }
  if (depth_normalize && !(focal_px > 0.0)) throw ConfigError("features: focal_px must be positive");
}

OffsetPair sample_offset_pair(Rng& rng, const FeatureConfig& cfg) {
  const double r = cfg.max_offset_radius;
  OffsetPair p;
  p.first.x = static_cast<float>(rng.uniform(-r, r));
  p.first.y = static_cast<float>(rng.uniform(-r, r));
  p.second.x = static_cast<float>(rng.uniform(-r, r));
  p.second.y = static_cast<float>(rng.uniform(-r, r));
  return p;
}

std::vector<OffsetPair> sample_offset_pairs(std::uint64_t seed, const FeatureConfig& cfg, std::size_t count) {
  cfg.validate();
  Rng rng(seed);
  std::vector<OffsetPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_offset_pair(rng, cfg));
  return out;
}

}  // namespace ihpe
