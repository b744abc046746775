#include "lookback/text.hpp"

#include <array>
#include <cctype>
#include <cstdio>

#include <zlib.h>

#include "lookback/error.hpp"

namespace lookback::text {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

namespace {

bool is_ascii_punct(char c) {
  auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

}  // namespace

std::string normalize_word(std::string_view word) {
  std::size_t begin = 0, end = word.size();
  while (begin < end && is_ascii_punct(word[begin])) ++begin;
  while (end > begin && is_ascii_punct(word[end - 1])) --end;
  std::string out(word.substr(begin, end - begin));
  for (char& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string> split_words(std::string_view phrase) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < phrase.size()) {
    while (i < phrase.size() && is_space(phrase[i])) ++i;
    std::size_t start = i;
    while (i < phrase.size() && !is_space(phrase[i])) ++i;
    if (i > start) {
      auto w = normalize_word(phrase.substr(start, i - start));
      if (!w.empty()) words.push_back(std::move(w));
    }
  }
  return words;
}

std::string normalize_phrase(std::string_view phrase) {
  std::string out;
  for (const auto& w : split_words(phrase)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::vector<Word> words_with_token_ends(std::span<const std::string> tokens) {
  std::vector<Word> words;
  std::string current;
  std::size_t last_token = 0;
  auto flush = [&] {
    if (current.empty()) return;
    auto w = normalize_word(current);
    if (!w.empty()) words.push_back({std::move(w), last_token});
    current.clear();
  };
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    for (char c : tokens[t]) {
      if (is_space(c)) {
        flush();
      } else {
        current.push_back(c);
        last_token = t;
      }
    }
  }
  flush();
  return words;
}

std::string render_template(std::string_view normalized) {
  std::string out(normalized);
  if (out.empty()) return out;
  if (static_cast<unsigned char>(out[0]) < 0x80) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  if (is_ascii_punct(out.back())) {
    out.push_back(' ');
  } else {
    out += ", ";
  }
  return out;
}

namespace {
constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    std::uint32_t v = bytes[i] << 16;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out += "==";
  } else if (rest == 2) {
    std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view encoded) {
  require(encoded.size() % 4 == 0, ErrorKind::Protocol, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(encoded.size() / 4 * 3);
  for (std::size_t i = 0; i < encoded.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (int j = 0; j < 4; ++j) {
      char c = encoded[i + j];
      int d = 0;
      if (c == '=') {
        require(i + 4 == encoded.size() && j >= 2, ErrorKind::Protocol, "misplaced base64 padding");
        ++pad;
      } else {
        require(pad == 0, ErrorKind::Protocol, "misplaced base64 padding");
        d = decode_char(c);
        require(d >= 0, ErrorKind::Protocol, "invalid base64 character");
      }
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf.data(), 16);
}

std::uint32_t crc32(std::string_view data) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

}  // namespace lookback::text
