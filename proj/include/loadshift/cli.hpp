#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "loadshift/engine.hpp"

namespace loadshift::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInput = 2,
  kExitInvariant = 3,
};

// Parses argv and dispatches to a subcommand. Never throws.
int run(int argc, char** argv);

std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::filesystem::path& path);

// Everything needed to regenerate a run directory byte for byte.
struct RunManifest {
  std::string tool_version;
  std::filesystem::path trace_path;
  std::string trace_sha256;
  std::filesystem::path front_path;
  std::string front_sha256;
  double scale = 1.0;
  bool write_features = false;
  SimConfig config;
  std::map<std::string, std::string> outputs;  // file name -> sha256
};

std::string manifest_json(const RunManifest& manifest);
RunManifest parse_manifest(std::string_view text);

const char* tool_version();

}  // namespace loadshift::cli
