#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ihpe/geometry.hpp"
#include "ihpe/image_io.hpp"

namespace ihpe {

/// Mean 3D error (mm) per joint over all samples. Throws DataError on a length
/// or skeleton mismatch; an empty list yields zeros.
std::vector<double> mean_joint_error(std::span<const HandPose> predictions, std::span<const HandPose> ground_truths);

struct FingerErrors {
  /// Mean over every joint of the chain, root included.
  std::array<double, kFingerCount> finger{};
  std::array<double, kFingerCount> tip{};
  double mean_finger = 0.0;
  double mean_tip = 0.0;
};

FingerErrors finger_and_tip_errors(std::span<const HandPose> predictions, std::span<const HandPose> ground_truths);

/// Errors restricted to stretched fingers. Fingers never stretched have no value.
struct StretchedErrors {
  std::array<std::optional<double>, kFingerCount> finger;
  std::array<std::optional<double>, kFingerCount> tip;
  /// Number of (sample, finger) pairs contributing per finger.
  std::array<std::size_t, kFingerCount> count{};
  /// Mean of the per-finger values that exist.
  std::optional<double> mean_finger;
  std::optional<double> mean_tip;

  bool empty() const { return !mean_tip.has_value(); }
};

/// Samples without flags are skipped.
StretchedErrors stretched_errors(std::span<const HandPose> predictions, std::span<const HandPose> ground_truths,
                                 std::span<const std::optional<FingerFlags>> flags);

struct EvalReport {
  std::string method;
  std::string skeleton;
  std::size_t sample_count = 0;
  std::vector<double> per_joint;
  double mean_joint = 0.0;
  FingerErrors fingers;
  /// Absent when no sample carries stretched flags.
  std::optional<StretchedErrors> stretched;
};

/// `flags` is either empty or one entry per sample.
EvalReport evaluate(const std::string& method, std::span<const HandPose> predictions,
                    std::span<const HandPose> ground_truths, std::span<const std::optional<FingerFlags>> flags = {});

/// One CSV row: section,name,index,mean_mm,count. Empty subsets leave mean_mm blank.
struct ReportRow {
  std::string section;
  std::string name;
  int index = 0;
  std::optional<double> mean_mm;
  std::size_t count = 0;
};

std::vector<ReportRow> report_rows(const EvalReport& report);
std::string report_csv(const EvalReport& report);
/// Throws FormatError with the offending line.
std::vector<ReportRow> parse_report_csv(const std::string& text);
std::string report_json(const EvalReport& report);

/// Writes CSV for a ".csv" path and JSON otherwise.
void emit_report(const EvalReport& report, const std::filesystem::path& path);

/// Side-by-side Markdown tables of per-finger and per-fingertip errors over all
/// fingers, then over stretched fingers only.
std::string render_tables(std::span<const EvalReport> reports);

/// Distinct marker colour of joint `j` among `count` joints.
std::array<std::uint8_t, 3> joint_color(int j, int count);

/// Depth as grey levels with bones drawn in white and a 3x3 marker centred on
/// each projected joint.
RgbImage render_overlay(const DepthImage& img, const HandPose& pose, const CameraIntrinsics& camera);
void write_overlay(const std::filesystem::path& path, const DepthImage& img, const HandPose& pose,
                   const CameraIntrinsics& camera);

}  // namespace ihpe
