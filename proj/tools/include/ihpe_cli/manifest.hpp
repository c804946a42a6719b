#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

namespace ihpe::cli {

/// Hex SHA-1 of `bytes` wrapped as a git blob object ("blob <size>\0").
std::string git_blob_hash(std::span<const std::uint8_t> bytes);
std::string git_blob_hash_file(const std::filesystem::path& path);

/// Git-tree-style hash of a directory: entries sorted by name, files hashed as
/// blobs and subdirectories recursively. Files named run_manifest.json are skipped.
std::string git_tree_hash(const std::filesystem::path& dir);

/// A file path hashes as a blob, a directory as a tree.
std::string content_hash(const std::filesystem::path& path);

inline constexpr const char* kRunManifestName = "run_manifest.json";

/// One record per command invocation. Everything except `timing` is a pure
/// function of the command inputs.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 1;
  nlohmann::json settings = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();
  nlohmann::json outputs = nlohmann::json::object();
  nlohmann::json hashes = nlohmann::json::object();
  nlohmann::json results = nlohmann::json::object();
  nlohmann::json timing = nlohmann::json::object();

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace ihpe::cli
