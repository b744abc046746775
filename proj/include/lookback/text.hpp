#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lookback::text {

/// Case-folds ASCII and strips surrounding ASCII punctuation. May return "".
std::string normalize_word(std::string_view word);

/// Whitespace-normalized, case-folded phrase: words joined by single spaces.
std::string normalize_phrase(std::string_view phrase);

std::vector<std::string> split_words(std::string_view phrase);

/// A normalized word of a detokenized token stream together with the index of
/// the token that holds its final character.
struct Word {
  std::string text;
  std::size_t end_token = 0;
};

/// Concatenates token texts and splits on whitespace. Words that normalize to
/// the empty string are dropped.
std::vector<Word> words_with_token_ends(std::span<const std::string> tokens);

/// Restores sentence-initial capitalization and a trailing separator so a
/// mined template can be appended to a stream verbatim.
std::string render_template(std::string_view normalized);

bool is_space(char c);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view encoded);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);
std::uint32_t crc32(std::string_view data);

}  // namespace lookback::text
