#include "lookback/jsonl.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "lookback/error.hpp"
#include "lookback/text.hpp"

namespace lookback::jsonl {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> read(const std::string& path, bool allow_missing) {
  if (allow_missing && !fs::exists(path)) return {};
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      fail(ErrorKind::Io, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

Writer::Writer(const std::string& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc), path_(path) {
  require(static_cast<bool>(out_), ErrorKind::Io, "cannot open '" + path + "' for writing");
}

void Writer::write(const json& record) {
  std::string line = record.dump() + "\n";
  std::lock_guard lock(mu_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  require(static_cast<bool>(out_), ErrorKind::Io, "write to '" + path_ + "' failed");
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot open '" + tmp + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    require(static_cast<bool>(out), ErrorKind::Io, "write to '" + tmp + "' failed");
  }
  fs::rename(tmp, path);
}

json seal(json payload) {
  auto crc = text::crc32(payload.dump());
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return json{{"payload", std::move(payload)}, {"crc", std::string(buf)}};
}

ManifestScan read_manifest(const std::string& path) {
  ManifestScan scan;
  if (!fs::exists(path)) return scan;
  const std::string content = read_file(path);
  std::size_t pos = 0;
  std::size_t lineno = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    ++lineno;
    if (nl == std::string::npos) {
      scan.torn_tail = true;
      break;
    }
    std::string_view line(content.data() + pos, nl - pos);
    pos = nl + 1;
    scan.valid_bytes = pos;
    if (line.empty()) continue;
    auto where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      fail(ErrorKind::DataIntegrity, "manifest corrupted at " + where + " (unparseable line); refusing to resume");
    }
    if (!j.is_object() || !j.contains("payload") || !j.contains("crc") || !j["crc"].is_string()) {
      fail(ErrorKind::DataIntegrity, "manifest corrupted at " + where + " (missing checksum); refusing to resume");
    }
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", text::crc32(j["payload"].dump()));
    if (j["crc"].get<std::string>() != buf) {
      fail(ErrorKind::DataIntegrity, "manifest corrupted at " + where + " (checksum mismatch); refusing to resume");
    }
    scan.payloads.push_back(std::move(j["payload"]));
  }
  return scan;
}

}  // namespace lookback::jsonl
