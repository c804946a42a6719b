#include "ihpe_cli/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <memory>
#include <vector>

#include <openssl/evp.h>

#include "ihpe/errors.hpp"

namespace ihpe::cli {
namespace fs = std::filesystem;
namespace {

std::vector<std::uint8_t> sha1(std::span<const std::uint8_t> header, std::span<const std::uint8_t> body) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::vector<std::uint8_t> digest(EVP_MAX_MD_SIZE);
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), body.data(), body.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1)
    throw Error("SHA-1 digest failed");
  digest.resize(len);
  return digest;
}

std::vector<std::uint8_t> object_digest(const std::string& kind, std::span<const std::uint8_t> body) {
  const std::string header = kind + " " + std::to_string(body.size()) + '\0';
  return sha1({reinterpret_cast<const std::uint8_t*>(header.data()), header.size()}, body);
}

std::string to_hex(std::span<const std::uint8_t> digest) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (std::uint8_t b : digest) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 15]);
  }
  return out;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> tree_digest(const fs::path& dir) {
  std::vector<fs::directory_entry> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename() == kRunManifestName) continue;
    entries.push_back(e);
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.path().filename() < b.path().filename(); });
  std::vector<std::uint8_t> body;
  for (const auto& e : entries) {
    const bool is_dir = e.is_directory();
    const std::string mode = is_dir ? "40000 " : "100644 ";
    const std::string name = e.path().filename().string();
    body.insert(body.end(), mode.begin(), mode.end());
    body.insert(body.end(), name.begin(), name.end());
    body.push_back(0);
    const auto digest = is_dir ? tree_digest(e.path()) : object_digest("blob", read_bytes(e.path()));
    body.insert(body.end(), digest.begin(), digest.end());
  }
  return object_digest("tree", body);
}

}  // namespace

std::string git_blob_hash(std::span<const std::uint8_t> bytes) { return to_hex(object_digest("blob", bytes)); }

std::string git_blob_hash_file(const fs::path& path) { return git_blob_hash(read_bytes(path)); }

std::string git_tree_hash(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  return to_hex(tree_digest(dir));
}

std::string content_hash(const fs::path& path) {
  return fs::is_directory(path) ? git_tree_hash(path) : git_blob_hash_file(path);
}

nlohmann::json RunManifest::to_json() const {
  return {{"command", command}, {"config", config_path}, {"seed", seed},        {"threads", threads},
          {"settings", settings}, {"inputs", inputs},    {"outputs", outputs}, {"hashes", hashes},
          {"results", results},   {"timing", timing}};
}

void RunManifest::write(const fs::path& path) const {
  std::ofstream out(path);
  out << to_json().dump(2) << '\n';
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

}  // namespace ihpe::cli
