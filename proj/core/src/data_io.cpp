#include "ihpe/data_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "ihpe/image_io.hpp"
#include "ihpe/parallel.hpp"

namespace fs = std::filesystem;

namespace ihpe {

namespace {

std::int32_t read_i32(const std::vector<std::uint8_t>& b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return static_cast<std::int32_t>(v);
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Whitespace-separated numbers of one line.
std::vector<double> parse_numbers(const std::string& line, const fs::path& path, std::size_t line_no) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
    if (p == end) break;
    double v = 0.0;
    const auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || !std::isfinite(v)) {
      throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) + ": bad number", line_no, true);
    }
    out.push_back(v);
    p = next;
  }
  return out;
}

std::optional<int> subject_number(const std::string& name) {
  if (name.size() < 2 || name[0] != 'P') return std::nullopt;
  int v = 0;
  const auto [p, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), v);
  if (ec != std::errc() || p != name.data() + name.size()) return std::nullopt;
  return v;
}

std::string frame_name(std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu_depth.bin", frame);
  return buf;
}

float median_depth(const HandPose& pose) {
  std::vector<double> z;
  for (const auto& j : pose.joints) z.push_back(j.z);
  std::nth_element(z.begin(), z.begin() + z.size() / 2, z.end());
  return static_cast<float>(z[z.size() / 2]);
}

DepthImage segment(const DepthImage& img, float center, double band) {
  std::vector<float> d(img.depths().begin(), img.depths().end());
  for (float& v : d) {
    if (std::abs(v - center) > band) v = img.background();
  }
  return DepthImage(img.width(), img.height(), std::move(d), img.background());
}

}  // namespace

FingerFlags parse_finger_flags(const std::string& text) {
  if (text.size() != kFingerCount) throw ConfigError("finger flags '" + text + "' must be five 0/1 characters");
  FingerFlags out{};
  for (int f = 0; f < kFingerCount; ++f) {
    if (text[f] != '0' && text[f] != '1') {
      throw ConfigError("finger flags '" + text + "' must be five 0/1 characters");
    }
    out[f] = text[f] == '1';
  }
  return out;
}

std::string format_finger_flags(const FingerFlags& flags) {
  std::string s(kFingerCount, '0');
  for (int f = 0; f < kFingerCount; ++f) s[f] = flags[f] ? '1' : '0';
  return s;
}

GestureTable GestureTable::msra_default() {
  GestureTable t;
  const std::pair<const char*, const char*> table[] = {
      {"1", "01000"}, {"2", "01100"},  {"3", "01110"},  {"4", "01111"},  {"5", "11111"}, {"6", "10001"},
      {"7", "11100"}, {"8", "11000"},  {"9", "00000"},  {"I", "00001"},  {"IP", "01001"}, {"L", "11000"},
      {"MP", "00101"}, {"RP", "00011"}, {"T", "10000"}, {"TIP", "11001"}, {"Y", "10001"},
  };
  for (const auto& [g, f] : table) t.set(g, parse_finger_flags(f));
  return t;
}

void GestureTable::set(const std::string& gesture, const FingerFlags& flags) {
  for (auto& e : entries_) {
    if (e.first == gesture) {
      e.second = flags;
      return;
    }
  }
  entries_.emplace_back(gesture, flags);
}

std::optional<FingerFlags> GestureTable::lookup(const std::string& gesture) const {
  for (const auto& e : entries_) {
    if (e.first == gesture) return e.second;
  }
  return std::nullopt;
}

int DatasetIndex::subject_count() const {
  std::set<int> s;
  for (const auto& e : samples) s.insert(e.subject);
  return static_cast<int>(s.size());
}

DepthImage read_msra_bin(const fs::path& path, float background) {
  const auto b = read_bytes(path);
  if (b.size() < 24) {
    throw FormatError("'" + path.string() + "': header needs 24 bytes, file has " + std::to_string(b.size()),
                      b.size());
  }
  const int w = read_i32(b, 0), h = read_i32(b, 4);
  const int left = read_i32(b, 8), top = read_i32(b, 12), right = read_i32(b, 16), bottom = read_i32(b, 20);
  if (w <= 0 || h <= 0 || w > 16384 || h > 16384) {
    throw FormatError("'" + path.string() + "': bad image size " + std::to_string(w) + "x" + std::to_string(h), 0);
  }
  if (left < 0 || top < 0 || right < left || bottom < top || right > w || bottom > h) {
    throw FormatError("'" + path.string() + "': bounding box outside the image", 8);
  }
  const std::size_t bw = static_cast<std::size_t>(right - left);
  const std::size_t bh = static_cast<std::size_t>(bottom - top);
  const std::size_t expected = 24 + 4 * bw * bh;
  if (b.size() != expected) {
    throw FormatError("'" + path.string() + "': expected " + std::to_string(expected) + " bytes for a " +
                          std::to_string(bw) + "x" + std::to_string(bh) + " box, file has " +
                          std::to_string(b.size()),
                      std::min(b.size(), expected));
  }
  std::vector<float> depths(static_cast<std::size_t>(w) * h, background);
  std::size_t at = 24;
  for (std::size_t y = 0; y < bh; ++y) {
    for (std::size_t x = 0; x < bw; ++x, at += 4) {
      const float d = std::bit_cast<float>(static_cast<std::uint32_t>(read_i32(b, at)));
      depths[(top + y) * w + left + x] = d > 0.0f ? d : background;
    }
  }
  return DepthImage(w, h, std::move(depths), background);
}

void write_msra_bin(const fs::path& path, const DepthImage& img) {
  int left = img.width(), top = img.height(), right = 0, bottom = 0;
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      if (!img.is_foreground(u, v)) continue;
      left = std::min(left, u);
      top = std::min(top, v);
      right = std::max(right, u + 1);
      bottom = std::max(bottom, v + 1);
    }
  }
  if (right == 0) left = top = 0;
  std::vector<std::uint8_t> b;
  b.reserve(24 + 4 * static_cast<std::size_t>(right - left) * (bottom - top));
  for (int v : {img.width(), img.height(), left, top, right, bottom}) put_u32(b, static_cast<std::uint32_t>(v));
  for (int v = top; v < bottom; ++v) {
    for (int u = left; u < right; ++u) {
      const float d = img.is_foreground(u, v) ? img(u, v) : 0.0f;
      put_u32(b, std::bit_cast<std::uint32_t>(d));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<HandPose> read_msra_joints(const fs::path& path, const MsraOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const SkeletonPtr skel = shared_skeleton("msra21");
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw FormatError("'" + path.string() + "' is empty", 1, true);
  const auto header = parse_numbers(line, path, line_no);
  if (header.size() != 1 || header[0] < 0 || header[0] != std::floor(header[0])) {
    throw FormatError("'" + path.string() + "' line 1: expected the frame count", 1, true);
  }
  const auto count = static_cast<std::size_t>(header[0]);
  std::vector<HandPose> poses;
  poses.reserve(count);
  const double sy = options.negate_y ? -1.0 : 1.0;
  const double sz = options.negate_z ? -1.0 : 1.0;
  while (poses.size() < count && std::getline(in, line)) {
    ++line_no;
    const auto v = parse_numbers(line, path, line_no);
    if (v.empty()) continue;
    if (v.size() != 3u * skel->joint_count) {
      throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) + ": expected " +
                            std::to_string(3 * skel->joint_count) + " values, found " + std::to_string(v.size()),
                        line_no, true);
    }
    HandPose pose(skel);
    for (int j = 0; j < skel->joint_count; ++j) pose[j] = {v[3 * j], sy * v[3 * j + 1], sz * v[3 * j + 2]};
    poses.push_back(std::move(pose));
  }
  if (poses.size() != count) {
    throw FormatError("'" + path.string() + "' declares " + std::to_string(count) + " frames but holds " +
                          std::to_string(poses.size()),
                      line_no, true);
  }
  return poses;
}

void write_msra_joints(const fs::path& path, std::span<const HandPose> poses, const MsraOptions& options) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const double sy = options.negate_y ? -1.0 : 1.0;
  const double sz = options.negate_z ? -1.0 : 1.0;
  out << poses.size() << '\n';
  char buf[64];
  for (const auto& pose : poses) {
    for (std::size_t j = 0; j < pose.size(); ++j) {
      const double v[3] = {pose[j].x, sy * pose[j].y, sz * pose[j].z};
      for (int k = 0; k < 3; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", v[k]);
        if (j || k) out << ' ';
        out << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

DatasetIndex load_msra(const fs::path& root, const MsraOptions& options) {
  options.camera.validate();
  if (!fs::is_directory(root)) throw IoError("MSRA root '" + root.string() + "' is not a directory");
  std::vector<std::pair<int, fs::path>> subjects;
  for (const auto& e : fs::directory_iterator(root)) {
    if (!e.is_directory()) continue;
    if (auto k = subject_number(e.path().filename().string())) subjects.emplace_back(*k, e.path());
  }
  if (subjects.empty()) throw DataError("no P<k> subject directories under '" + root.string() + "'");
  std::sort(subjects.begin(), subjects.end());

  DatasetIndex index;
  index.format = "msra";
  index.skeleton = shared_skeleton("msra21");
  index.camera = options.camera;
  index.background = options.background;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    std::vector<fs::path> gestures;
    for (const auto& e : fs::directory_iterator(subjects[s].second)) {
      if (e.is_directory()) gestures.push_back(e.path());
    }
    std::sort(gestures.begin(), gestures.end());
    for (const auto& gdir : gestures) {
      const auto joints = gdir / "joint.txt";
      if (!fs::exists(joints)) continue;
      const auto poses = read_msra_joints(joints, options);
      const std::string gesture = gdir.filename().string();
      const auto flags = options.gestures.lookup(gesture);
      for (std::size_t f = 0; f < poses.size(); ++f) {
        DatasetEntry e;
        e.image_path = gdir / frame_name(f);
        if (!fs::exists(e.image_path)) throw DataError("missing depth file '" + e.image_path.string() + "'");
        e.id = subjects[s].second.filename().string() + "/" + gesture + "/" + frame_name(f).substr(0, 6);
        e.subject = static_cast<int>(s);
        e.gesture = gesture;
        e.pose = poses[f];
        e.stretched = flags;
        index.samples.push_back(std::move(e));
      }
    }
  }
  return index;
}

void export_msra(std::span<const LabeledImage> samples, const fs::path& root, const MsraOptions& options) {
  std::map<std::pair<int, std::string>, std::vector<const LabeledImage*>> groups;
  for (const auto& s : samples) {
    if (s.pose.skeleton == nullptr || s.pose.skeleton->name != "msra21") {
      throw DataError("MSRA export needs msra21 poses (sample '" + s.id + "')");
    }
    groups[{s.subject, s.gesture}].push_back(&s);
  }
  for (const auto& [key, items] : groups) {
    const fs::path dir = root / ("P" + std::to_string(key.first)) / key.second;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    std::vector<HandPose> poses;
    for (std::size_t f = 0; f < items.size(); ++f) {
      write_msra_bin(dir / frame_name(f), items[f]->image);
      poses.push_back(items[f]->pose);
    }
    write_msra_joints(dir / "joint.txt", poses, options);
  }
}

DatasetIndex load_icvl_labels(const fs::path& label_file, const fs::path& image_root, const IcvlOptions& options) {
  options.camera.validate();
  std::ifstream in(label_file);
  if (!in) throw IoError("cannot open '" + label_file.string() + "'");
  DatasetIndex index;
  index.format = "icvl";
  index.skeleton = shared_skeleton("icvl16");
  index.camera = options.camera;
  index.background = options.background;
  const int n = index.skeleton->joint_count;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string path;
    if (!(ls >> path)) continue;
    std::string rest;
    std::getline(ls, rest);
    const auto v = parse_numbers(rest, label_file, line_no);
    if (v.size() != 3u * n) {
      throw FormatError("'" + label_file.string() + "' line " + std::to_string(line_no) + ": expected 1 + " +
                            std::to_string(3 * n) + " fields, found 1 + " + std::to_string(v.size()),
                        line_no, true);
    }
    DatasetEntry e;
    e.id = path;
    e.image_path = image_root / path;
    e.subject = 0;
    e.pose = HandPose(index.skeleton);
    for (int j = 0; j < n; ++j) {
      if (!(v[3 * j + 2] > 0.0)) {
        throw FormatError("'" + label_file.string() + "' line " + std::to_string(line_no) + ": joint " +
                              std::to_string(j) + " has non-positive depth",
                          line_no, true);
      }
      e.pose[j] = backproject(v[3 * j], v[3 * j + 1], v[3 * j + 2], options.camera);
    }
    index.samples.push_back(std::move(e));
  }
  return index;
}

DatasetIndex load_icvl(const fs::path& root, bool test_split, const IcvlOptions& options) {
  if (!test_split) return load_icvl_labels(root / "Training" / "labels.txt", root / "Training" / "Depth", options);
  std::vector<fs::path> files;
  const fs::path dir = root / "Testing";
  if (!fs::is_directory(dir)) throw IoError("ICVL test directory '" + dir.string() + "' is missing");
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("test_seq_", 0) == 0 && e.path().extension() == ".txt") files.push_back(e.path());
  }
  if (files.empty()) throw DataError("no test_seq_*.txt label files under '" + dir.string() + "'");
  std::sort(files.begin(), files.end());
  DatasetIndex index;
  for (const auto& f : files) {
    DatasetIndex part = load_icvl_labels(f, dir / "Depth", options);
    if (index.samples.empty()) {
      index = std::move(part);
    } else {
      for (auto& s : part.samples) index.samples.push_back(std::move(s));
    }
  }
  return index;
}

DepthImage load_image(const DatasetIndex& index, const DatasetEntry& entry, double segment_band_mm) {
  DepthImage img = index.format == "icvl" ? read_depth_png(entry.image_path, index.background)
                                          : read_msra_bin(entry.image_path, index.background);
  if (segment_band_mm > 0.0) img = segment(img, median_depth(entry.pose), segment_band_mm);
  return img;
}

std::vector<LabeledImage> load_all(const DatasetIndex& index, int threads, double segment_band_mm) {
  std::vector<LabeledImage> out(index.samples.size());
  parallel_for(out.size(), threads, [&](std::size_t i) {
    const auto& e = index.samples[i];
    out[i] = {e.id, e.subject, e.gesture, load_image(index, e, segment_band_mm), e.pose, e.stretched, false};
  });
  return out;
}

std::pair<DatasetIndex, DatasetIndex> split_leave_one_subject_out(const DatasetIndex& index, int held_out_subject) {
  DatasetIndex train{index.format, index.skeleton, index.camera, index.background, {}};
  DatasetIndex test = train;
  for (const auto& e : index.samples) (e.subject == held_out_subject ? test : train).samples.push_back(e);
  if (test.samples.empty()) {
    throw ConfigError("subject " + std::to_string(held_out_subject) + " does not occur in the dataset");
  }
  return {std::move(train), std::move(test)};
}

std::vector<LabeledImage> generate_synth_dataset(const SynthDatasetConfig& config, std::uint64_t seed, int threads) {
  if (config.subjects.empty()) throw ConfigError("synthetic dataset needs at least one subject");
  const auto& gestures = config.gestures.entries();
  if (gestures.empty()) throw ConfigError("synthetic dataset needs at least one gesture");
  std::vector<LabeledImage> out(config.count);
  parallel_for(out.size(), threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, 6, i));
    const int subject = config.subjects[rng.below(config.subjects.size())];
    const auto& [gesture, flags] = gestures[rng.below(gestures.size())];
    const SynthHandSpec spec =
        random_hand_spec(rng, synth_subject(config.profile_seed, subject), flags, config.variation);
    SynthHand hand = generate_synth(spec, rng.next());
    out[i] = {{}, subject, gesture, std::move(hand.image), std::move(hand.pose), flags, hand.clipped};
  });
  std::map<std::pair<int, std::string>, std::size_t> frames;
  for (auto& s : out) {
    const std::size_t f = frames[{s.subject, s.gesture}]++;
    s.id = "P" + std::to_string(s.subject) + "/" + s.gesture + "/" + frame_name(f).substr(0, 6);
  }
  return out;
}

std::vector<PoseExample> pose_examples(std::span<const LabeledImage> samples) {
  std::vector<PoseExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({&s.image, &s.pose});
  return out;
}

}  // namespace ihpe
