// Command-line entry points. `run` is the whole tool; it is a library call so
// tests can drive it in-process.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace semloc::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kDegraded = 1, kInputError = 2 };

/// Provenance record written next to every output as <output>.manifest.json
/// (or manifest.json inside an output directory).
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> inputs;  // path -> sha256
  std::vector<std::string> outputs;
  std::string version = kVersion;
  std::string started_utc;
  std::string finished_utc;
};

std::string sha256_file(const std::filesystem::path& path);
std::string utc_now();
void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

/// argv[0] is the program name. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace semloc::cli
