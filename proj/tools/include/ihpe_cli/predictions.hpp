#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ihpe/geometry.hpp"

namespace ihpe::cli {

/// One line of a predictions file:
/// {"id": ..., "joints": [[x, y, z], ...], "updated": [0|1, ...]}
struct PredictionRecord {
  std::string id;
  std::vector<Vec3> joints;
  std::vector<std::uint8_t> updated;
};

std::string prediction_line(const PredictionRecord& record);
/// Throws FormatError with the 1-based line number.
PredictionRecord parse_prediction_line(const std::string& line, std::size_t line_number = 1);

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

}  // namespace ihpe::cli
