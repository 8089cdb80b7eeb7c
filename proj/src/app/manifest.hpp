// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace hlik::app {

inline constexpr const char* kManifestName = "manifest.json";

/// Record of one command run, written next to its outputs. `config` holds
/// every option of the command after defaults, config file and explicit
/// flags were merged, as the strings the parser saw; replaying it runs the
/// same command again.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::map<std::string, uint64_t> seeds;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  nlohmann::json result = nlohmann::json::object();
  std::string tool_version;
  std::string started_utc;
  std::string finished_utc;
  double wall_seconds = 0.0;
};

nlohmann::json to_json(const RunManifest& m);
/// Throws ParseError on missing or mistyped fields.
RunManifest manifest_from_json(const nlohmann::json& j);

/// Writes <dir>/manifest.json, replacing an earlier one. Throws IoError.
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);
/// Throws IoError or ParseError.
RunManifest read_manifest(const std::filesystem::path& path);

std::string utc_timestamp(std::chrono::system_clock::time_point t);

}  // namespace hlik::app
