#include "staggered_ife/report.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

#include "staggered_ife/errors.hpp"
#include "staggered_ife/version.hpp"

namespace sife {

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a64(const std::string& text) { return fnv1a64(text.data(), text.size()); }

std::string to_hex(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MalformedInput, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return to_hex(fnv1a64(bytes));
}

RunManifest make_manifest(const std::string& command, nlohmann::json options,
                          const std::string& input_digest, std::uint64_t seed) {
  RunManifest m;
  m.tool = kToolName;
  m.version = kVersion;
  m.command = command;
  m.options = std::move(options);
  m.input_digest = input_digest;
  m.seed = seed;

  nlohmann::json id_fields;
  id_fields["tool"] = m.tool;
  id_fields["version"] = m.version;
  id_fields["command"] = m.command;
  id_fields["options"] = m.options;
  id_fields["input_digest"] = m.input_digest;
  id_fields["seed"] = m.seed;
  m.run_id = to_hex(fnv1a64(id_fields.dump()));

  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m.created_utc = buf;
  return m;
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["tool"] = m.tool;
  j["version"] = m.version;
  j["command"] = m.command;
  j["options"] = m.options;
  j["input_digest"] = m.input_digest;
  j["seed"] = m.seed;
  j["run_id"] = m.run_id;
  j["created_utc"] = m.created_utc;
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::BadArgument, "cannot write " + path);
  out << content;
}

}  // namespace sife
