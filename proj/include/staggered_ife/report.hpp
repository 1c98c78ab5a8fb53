#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace sife {

// FNV-1a 64-bit content hash: cheap, dependency-free, and stable across
// platforms. Used for input digests and run identifiers, not security.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& text);
std::string to_hex(std::uint64_t value);

// Digest of a file's bytes; throws MalformedInput if unreadable.
std::string file_digest_hex(const std::string& path);

// Provenance block written next to every set of outputs. run_id hashes the
// reproducibility-relevant fields only (tool, version, command, resolved
// options, input digest, seed), so re-running the same invocation yields the
// same run_id and byte-identical table files; the wall-clock timestamp lives
// only in manifest.json.
struct RunManifest {
  std::string tool;
  std::string version;
  std::string command;
  nlohmann::json options;
  std::string input_digest;  // empty when no input file
  std::uint64_t seed = 0;
  std::string run_id;
  std::string created_utc;
};

RunManifest make_manifest(const std::string& command, nlohmann::json options,
                          const std::string& input_digest, std::uint64_t seed);

nlohmann::json manifest_to_json(const RunManifest& manifest);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace sife
