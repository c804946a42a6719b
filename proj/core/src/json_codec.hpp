#pragma once

// JSON encoding of shared configuration types for model manifests.

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ihpe/features.hpp"
#include "ihpe/forest.hpp"
#include "ihpe/geometry.hpp"

namespace ihpe::codec {

using nlohmann::json;

inline json vec3(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-element array", 0);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json camera(const CameraIntrinsics& c) { return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}}; }

inline CameraIntrinsics camera(const json& j) {
  CameraIntrinsics c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  return c;
}

inline json forest_config(const ForestConfig& c) {
  return {{"tree_count", c.tree_count},
          {"max_depth", c.max_depth},
          {"features_per_split", c.features_per_split},
          {"thresholds_per_feature", c.thresholds_per_feature},
          {"min_info_gain", c.min_info_gain},
          {"min_samples_leaf", c.min_samples_leaf}};
}

inline ForestConfig forest_config(const json& j) {
  ForestConfig c;
  c.tree_count = j.at("tree_count").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.features_per_split = j.at("features_per_split").get<int>();
  c.thresholds_per_feature = j.at("thresholds_per_feature").get<int>();
  c.min_info_gain = j.at("min_info_gain").get<double>();
  c.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  return c;
}

inline json feature_config(const FeatureConfig& c) {
  return {{"max_offset_radius", c.max_offset_radius}, {"depth_normalize", c.depth_normalize}, {"focal_px", c.focal_px}};
}

inline FeatureConfig feature_config(const json& j) {
  FeatureConfig c;
  c.max_offset_radius = j.at("max_offset_radius").get<double>();
  c.depth_normalize = j.at("depth_normalize").get<bool>();
  c.focal_px = j.at("focal_px").get<double>();
  return c;
}

inline json skeleton(const SkeletonSpec& s) {
  json chains = json::array();
  for (const auto& c : s.finger_chains) chains.push_back(c);
  return {{"name", s.name}, {"joint_count", s.joint_count}, {"palm_joints", s.palm_joints}, {"finger_chains", chains}};
}

/// Built-in layouts resolve to the shared instance; anything else is rebuilt and validated.
inline SkeletonPtr skeleton(const json& j) {
  SkeletonSpec s;
  s.name = j.at("name").get<std::string>();
  s.joint_count = j.at("joint_count").get<int>();
  s.palm_joints = j.at("palm_joints").get<std::vector<int>>();
  const auto& chains = j.at("finger_chains");
  if (!chains.is_array() || chains.size() != kFingerCount) throw FormatError("finger_chains must hold five chains", 0);
  for (int f = 0; f < kFingerCount; ++f) s.finger_chains[f] = chains[f].get<std::vector<int>>();
  s.validate();
  if (s.name == "msra21" || s.name == "icvl16") {
    SkeletonPtr shared = shared_skeleton(s.name);
    if (!shared->same_layout(s)) throw FormatError("skeleton '" + s.name + "' does not match the built-in layout", 0);
    return shared;
  }
  return std::make_shared<const SkeletonSpec>(std::move(s));
}

inline json read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path.string() + "': " + e.what(), e.byte);
  }
}

inline void write_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace ihpe::codec
