#include "spmem/manifest.hpp"

#include <fstream>
#include <json.hpp>

#include "spmem/errors.hpp"

namespace spmem {

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for digest: " + path);
  std::uint64_t hash = 0xCBF29CE484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001B3ull;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
  return out;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["version"] = kVersion;
  j["config_path"] = manifest.config_path;
  j["config"] = manifest.config_text;
  j["seed"] = manifest.seed;
  j["wall_seconds"] = manifest.wall_seconds;
  nlohmann::json rates = nlohmann::json::object();
  for (const auto& [name, rate] : manifest.acceptance_rates) rates[name] = rate;
  j["acceptance_rates"] = rates;
  nlohmann::json outputs = nlohmann::json::object();
  for (const auto& f : manifest.output_files) outputs[f] = file_digest(f);
  j["outputs"] = outputs;
  nlohmann::json notes = nlohmann::json::object();
  for (const auto& [key, value] : manifest.notes) notes[key] = value;
  j["notes"] = notes;

  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace spmem
