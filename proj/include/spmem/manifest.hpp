#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace spmem {

inline constexpr const char* kVersion = "0.1.0";

// Reproducibility record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_text;
  std::uint64_t seed = 0;
  double wall_seconds = 0;
  std::vector<std::pair<std::string, double>> acceptance_rates;
  std::vector<std::string> output_files;  // digests computed at write time
  std::vector<std::pair<std::string, std::string>> notes;
};

// 64-bit FNV-1a over the file bytes, hex encoded.
std::string file_digest(const std::string& path);

void write_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace spmem
