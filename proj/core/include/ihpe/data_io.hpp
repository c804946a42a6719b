#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ihpe/geometry.hpp"
#include "ihpe/synth.hpp"

namespace ihpe {

/// Parses five '0'/'1' characters ordered thumb..little. Throws ConfigError.
FingerFlags parse_finger_flags(const std::string& text);
std::string format_finger_flags(const FingerFlags& flags);

/// Gesture label -> stretched fingers.
class GestureTable {
 public:
  /// The 17 MSRA gestures.
  static GestureTable msra_default();

  void set(const std::string& gesture, const FingerFlags& flags);
  std::optional<FingerFlags> lookup(const std::string& gesture) const;
  const std::vector<std::pair<std::string, FingerFlags>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, FingerFlags>> entries_;
};

struct DatasetEntry {
  std::string id;
  std::filesystem::path image_path;
  int subject = 0;
  std::string gesture;
  HandPose pose;
  std::optional<FingerFlags> stretched;
};

struct DatasetIndex {
  std::string format;
  SkeletonPtr skeleton;
  CameraIntrinsics camera;
  float background = kDefaultBackground;
  std::vector<DatasetEntry> samples;

  /// Number of distinct subjects (ids run 0..n-1).
  int subject_count() const;
};

/// A sample with its depth image in memory.
struct LabeledImage {
  std::string id;
  int subject = 0;
  std::string gesture;
  DepthImage image;
  HandPose pose;
  std::optional<FingerFlags> stretched;
  bool clipped = false;
};

struct MsraOptions {
  CameraIntrinsics camera;
  float background = kDefaultBackground;
  /// joint.txt stores y up and z negative; loading negates them into the camera frame.
  bool negate_y = true;
  bool negate_z = true;
  GestureTable gestures = GestureTable::msra_default();
};

/// Reads `<root>/P<k>/<gesture>/{joint.txt, NNNNNN_depth.bin}`. Subjects are
/// numbered 0..n-1 in ascending order of k.
DatasetIndex load_msra(const std::filesystem::path& root, const MsraOptions& options = {});

/// Binary depth file: six little-endian int32 (width, height, left, top, right,
/// bottom) then float32 depths inside the box, row-major. Zero is background.
DepthImage read_msra_bin(const std::filesystem::path& path, float background = kDefaultBackground);
void write_msra_bin(const std::filesystem::path& path, const DepthImage& img);

/// joint.txt: frame count, then one line of 21 x (x y z) per frame.
std::vector<HandPose> read_msra_joints(const std::filesystem::path& path, const MsraOptions& options = {});
void write_msra_joints(const std::filesystem::path& path, std::span<const HandPose> poses,
                       const MsraOptions& options = {});

/// Writes samples as an MSRA tree. Frames are numbered per subject/gesture in input order.
void export_msra(std::span<const LabeledImage> samples, const std::filesystem::path& root,
                 const MsraOptions& options = {});

struct IcvlOptions {
  CameraIntrinsics camera{241.42, 241.42, 160.0, 120.0};
  float background = kDefaultBackground;
};

/// One label file: each line is an image path followed by 16 x (u v d).
/// Image paths resolve against `image_root`.
DatasetIndex load_icvl_labels(const std::filesystem::path& label_file, const std::filesystem::path& image_root,
                              const IcvlOptions& options = {});
/// `<root>/Training/labels.txt` with images under Training/Depth, or for the
/// test split every `<root>/Testing/test_seq_*.txt` with images under Testing/Depth.
DatasetIndex load_icvl(const std::filesystem::path& root, bool test_split, const IcvlOptions& options = {});

/// Reads the depth image of one entry according to the index format. When
/// `segment_band_mm` is positive, pixels farther than this from the median
/// labelled joint depth become background (ICVL frames are not segmented).
DepthImage load_image(const DatasetIndex& index, const DatasetEntry& entry, double segment_band_mm = 0.0);

std::vector<LabeledImage> load_all(const DatasetIndex& index, int threads = 1, double segment_band_mm = 0.0);

/// Partition by subject id. Throws ConfigError for an absent subject.
std::pair<DatasetIndex, DatasetIndex> split_leave_one_subject_out(const DatasetIndex& index, int held_out_subject);

struct SynthDatasetConfig {
  std::size_t count = 2000;
  std::vector<int> subjects{0, 1, 2, 3, 4, 5, 6, 7};
  std::uint64_t profile_seed = 1;
  SynthVariation variation;
  GestureTable gestures = GestureTable::msra_default();
};

/// Image i draws subject, gesture and pose from a stream derived from (seed, i),
/// so the result does not depend on `threads`.
std::vector<LabeledImage> generate_synth_dataset(const SynthDatasetConfig& config, std::uint64_t seed,
                                                 int threads = 1);

std::vector<PoseExample> pose_examples(std::span<const LabeledImage> samples);

}  // namespace ihpe
