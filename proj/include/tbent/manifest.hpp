#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace tbent {

inline constexpr const char* kSoftwareVersion = "0.1.0";

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

struct FileEntry {
  std::string path;
  std::string sha256;
};

/// Provenance of one command invocation; every output carries its checksum.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<FileEntry> inputs;
  std::vector<FileEntry> outputs;
  nlohmann::json format_versions = nlohmann::json::object();
  std::vector<std::uint64_t> seeds;
  double wall_clock_s = 0.0;

  void add_input(const std::string& path);
  void add_output(const std::string& path);
};

nlohmann::json to_json(const RunManifest& m);

/// Writes `<primary_output>.manifest.json` and returns its path.
std::string write_manifest(const RunManifest& m, const std::string& primary_output);

}  // namespace tbent
