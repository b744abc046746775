#pragma once

#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace lookback::jsonl {

using nlohmann::json;

/// Parses every non-empty line. Missing file reads as empty when `allow_missing`.
std::vector<json> read(const std::string& path, bool allow_missing = false);

/// Serialized append-only writer; each line is flushed as it is written.
class Writer {
 public:
  explicit Writer(const std::string& path, bool append = true);
  void write(const json& record);

 private:
  std::mutex mu_;
  std::ofstream out_;
  std::string path_;
};

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// Manifest line: {"payload": ..., "crc": "<crc32 hex of payload.dump()>"}.
json seal(json payload);

struct ManifestScan {
  std::vector<json> payloads;
  bool torn_tail = false;  // final line lacked a newline and was discarded
  std::size_t valid_bytes = 0;
};

/// Reads a checksummed manifest. Any sealed line whose checksum does not match
/// is corruption and throws; an unterminated final line (interrupted write) is
/// dropped and reported via `torn_tail`.
ManifestScan read_manifest(const std::string& path);

}  // namespace lookback::jsonl
