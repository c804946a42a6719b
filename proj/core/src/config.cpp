#include "ihpe/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ihpe/errors.hpp"

namespace ihpe {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v))
    throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
  return v;
}

long long to_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("config key '" + key + "': '" + text + "' is not an integer");
  return v;
}

constexpr const char* kForestKeys[] = {"tree_count",     "max_depth",        "features_per_split",
                                       "thresholds_per_feature", "min_info_gain", "min_samples_leaf",
                                       "max_offset_radius", "depth_normalize"};

const std::vector<std::string>& key_list() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k{
        "camera.fx", "camera.fy", "camera.cx", "camera.cy",
        "image.background",
        "msra.negate_y", "msra.negate_z",
        "icvl.segment_band_mm",
        "cascade.palm_stages", "cascade.finger_stages",
        "voting.training_image_count", "voting.distance_threshold_mm", "voting.pixels_per_image",
        "detect.distance_threshold_ratio", "detect.curvature_window", "detect.curvature_min",
        "detect.interpolation_fractions", "detect.root_radius_fraction", "detect.max_fingers",
        "synth.count", "synth.subjects", "synth.profile_seed", "synth.depth_min_mm", "synth.depth_max_mm",
        "synth.center_jitter_u", "synth.center_jitter_v", "synth.rotation_max_deg",
        "synth.finger_angle_jitter_deg", "synth.depth_slope_max", "synth.tilt_max", "synth.noise_mm",
    };
    for (const char* f : kForestKeys) {
      k.push_back(std::string("cascade.") + f);
      k.push_back(std::string("voting.") + f);
    }
    return k;
  }();
  return keys;
}

void read_forest(const Config& c, const std::string& section, ForestConfig& forest, FeatureConfig& features) {
  const auto key = [&](const char* name) { return section + "." + name; };
  forest.tree_count = static_cast<int>(c.get_int(key("tree_count"), forest.tree_count));
  forest.max_depth = static_cast<int>(c.get_int(key("max_depth"), forest.max_depth));
  forest.features_per_split = static_cast<int>(c.get_int(key("features_per_split"), forest.features_per_split));
  forest.thresholds_per_feature =
      static_cast<int>(c.get_int(key("thresholds_per_feature"), forest.thresholds_per_feature));
  forest.min_info_gain = c.get_double(key("min_info_gain"), forest.min_info_gain);
  forest.min_samples_leaf = static_cast<int>(c.get_int(key("min_samples_leaf"), forest.min_samples_leaf));
  features.max_offset_radius = c.get_double(key("max_offset_radius"), features.max_offset_radius);
  features.depth_normalize = c.get_bool(key("depth_normalize"), features.depth_normalize);
}

}  // namespace

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

Config Config::parse(const std::string& text, const std::string& origin) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  // A key-less section and a top-level key look alike in the tree.
  std::istringstream lines(text);
  std::string line;
  for (int n = 1; std::getline(lines, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t[0] == '[') break;
    throw ConfigError(origin + ":" + std::to_string(n) + ": key outside any section");
  }
  Config config;
  for (const auto& [section, body] : tree)
    for (const auto& [name, value] : body) config.set(section + "." + name, value.data());
  return config;
}

void Config::set(const std::string& key, const std::string& value) { values_[trim(key)] = trim(value); }

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' must look like section.key=value");
  const std::string key = trim(assignment.substr(0, eq));
  const auto dot = key.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == key.size())
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  set(key, assignment.substr(eq + 1));
}

std::optional<std::string> Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return raw(key).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto v = raw(key);
  return v ? to_double(key, *v) : fallback;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto v = raw(key);
  return v ? to_int(key, *v) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("config key '" + key + "': '" + *v + "' is not a boolean");
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v)) out.push_back(to_double(key, item));
  return out;
}

std::vector<int> Config::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  std::vector<int> out;
  for (const auto& item : split_list(*v)) out.push_back(static_cast<int>(to_int(key, item)));
  return out;
}

std::vector<std::string> known_config_keys() { return key_list(); }

Settings resolve_settings(const Config& c) {
  const std::set<std::string> known(key_list().begin(), key_list().end());
  for (const auto& [key, value] : c.values()) {
    if (key.rfind("gestures.", 0) == 0) continue;
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  Settings s;
  s.camera.fx = c.get_double("camera.fx", s.camera.fx);
  s.camera.fy = c.get_double("camera.fy", s.camera.fy);
  s.camera.cx = c.get_double("camera.cx", s.camera.cx);
  s.camera.cy = c.get_double("camera.cy", s.camera.cy);
  s.camera.validate();
  s.background = static_cast<float>(c.get_double("image.background", s.background));
  if (!(s.background > 0.0f)) throw ConfigError("image.background must be positive");

  GestureTable gestures = GestureTable::msra_default();
  for (const auto& [key, value] : c.values())
    if (key.rfind("gestures.", 0) == 0) gestures.set(key.substr(9), parse_finger_flags(value));

  s.msra.camera = s.camera;
  s.msra.background = s.background;
  s.msra.negate_y = c.get_bool("msra.negate_y", s.msra.negate_y);
  s.msra.negate_z = c.get_bool("msra.negate_z", s.msra.negate_z);
  s.msra.gestures = gestures;

  s.icvl.camera = s.camera;
  s.icvl.background = s.background;
  s.icvl_segment_band_mm = c.get_double("icvl.segment_band_mm", s.icvl_segment_band_mm);
  if (s.icvl_segment_band_mm < 0.0) throw ConfigError("icvl.segment_band_mm must not be negative");

  s.cascade.palm_stages = static_cast<int>(c.get_int("cascade.palm_stages", s.cascade.palm_stages));
  s.cascade.finger_stages = static_cast<int>(c.get_int("cascade.finger_stages", s.cascade.finger_stages));
  read_forest(c, "cascade", s.cascade.forest, s.cascade.features);
  s.cascade.features.focal_px = s.camera.fx;
  s.cascade.camera = s.camera;
  s.cascade.validate();

  const long long images = c.get_int("voting.training_image_count", static_cast<long long>(s.voting.training_image_count));
  if (images < 1) throw ConfigError("voting.training_image_count must be positive");
  s.voting.training_image_count = static_cast<std::size_t>(images);
  s.voting.distance_threshold_mm = c.get_double("voting.distance_threshold_mm", s.voting.distance_threshold_mm);
  const long long per_image = c.get_int("voting.pixels_per_image", static_cast<long long>(s.voting.pixels_per_image));
  if (per_image < 0) throw ConfigError("voting.pixels_per_image must not be negative");
  s.voting.pixels_per_image = static_cast<std::size_t>(per_image);
  read_forest(c, "voting", s.voting.forest, s.voting.features);
  s.voting.features.focal_px = s.camera.fx;
  s.voting.camera = s.camera;
  s.voting.validate();

  s.detect.distance_threshold_ratio = c.get_double("detect.distance_threshold_ratio", s.detect.distance_threshold_ratio);
  s.detect.curvature_window = static_cast<int>(c.get_int("detect.curvature_window", s.detect.curvature_window));
  s.detect.curvature_min = c.get_double("detect.curvature_min", s.detect.curvature_min);
  s.detect.interpolation_fractions = c.get_doubles("detect.interpolation_fractions", s.detect.interpolation_fractions);
  s.detect.root_radius_fraction = c.get_double("detect.root_radius_fraction", s.detect.root_radius_fraction);
  s.detect.max_fingers = static_cast<int>(c.get_int("detect.max_fingers", s.detect.max_fingers));
  s.detect.validate();

  const long long count = c.get_int("synth.count", static_cast<long long>(s.synth.count));
  if (count < 1) throw ConfigError("synth.count must be positive");
  s.synth.count = static_cast<std::size_t>(count);
  s.synth.subjects = c.get_ints("synth.subjects", s.synth.subjects);
  if (s.synth.subjects.empty()) throw ConfigError("synth.subjects must not be empty");
  for (int subject : s.synth.subjects)
    if (subject < 0) throw ConfigError("synth.subjects must not be negative");
  s.synth.profile_seed = static_cast<std::uint64_t>(c.get_int("synth.profile_seed", static_cast<long long>(s.synth.profile_seed)));
  auto& var = s.synth.variation;
  var.depth_min_mm = c.get_double("synth.depth_min_mm", var.depth_min_mm);
  var.depth_max_mm = c.get_double("synth.depth_max_mm", var.depth_max_mm);
  if (!(var.depth_min_mm > 0.0 && var.depth_min_mm <= var.depth_max_mm))
    throw ConfigError("synth depth range must be positive and ordered");
  var.center_jitter_u = c.get_double("synth.center_jitter_u", var.center_jitter_u);
  var.center_jitter_v = c.get_double("synth.center_jitter_v", var.center_jitter_v);
  var.rotation_max_rad = c.get_double("synth.rotation_max_deg", var.rotation_max_rad * 180.0 / M_PI) * M_PI / 180.0;
  var.finger_angle_jitter_rad =
      c.get_double("synth.finger_angle_jitter_deg", var.finger_angle_jitter_rad * 180.0 / M_PI) * M_PI / 180.0;
  var.depth_slope_max = c.get_double("synth.depth_slope_max", var.depth_slope_max);
  var.tilt_max = c.get_double("synth.tilt_max", var.tilt_max);
  var.noise_mm = c.get_double("synth.noise_mm", var.noise_mm);
  if (var.noise_mm < 0.0) throw ConfigError("synth.noise_mm must not be negative");
  s.synth.gestures = gestures;
  return s;
}

}  // namespace ihpe
