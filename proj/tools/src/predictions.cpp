#include "ihpe_cli/predictions.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "ihpe/errors.hpp"

namespace ihpe::cli {

using nlohmann::json;

std::string prediction_line(const PredictionRecord& record) {
  json joints = json::array();
  for (const auto& p : record.joints) joints.push_back({p.x, p.y, p.z});
  json updated = json::array();
  for (auto u : record.updated) updated.push_back(static_cast<int>(u));
  return json{{"id", record.id}, {"joints", joints}, {"updated", updated}}.dump();
}

PredictionRecord parse_prediction_line(const std::string& line, std::size_t line_number) {
  PredictionRecord r;
  try {
    const json j = json::parse(line);
    r.id = j.at("id").get<std::string>();
    for (const auto& p : j.at("joints")) {
      if (p.size() != 3) throw FormatError("joint must have three coordinates", line_number, true);
      r.joints.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    if (j.contains("updated"))
      for (const auto& u : j.at("updated")) r.updated.push_back(static_cast<std::uint8_t>(u.get<int>() != 0));
    if (!r.updated.empty() && r.updated.size() != r.joints.size())
      throw FormatError("updated mask has " + std::to_string(r.updated.size()) + " entries for " +
                            std::to_string(r.joints.size()) + " joints",
                        line_number, true);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad prediction line: ") + e.what(), line_number, true);
  }
  return r;
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& r : records) out << prediction_line(r) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_prediction_line(line, n));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what(), n, true);
    }
  }
  return out;
}

}  // namespace ihpe::cli
