#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace geoalign {

// Half-open byte range [begin, end) into a UTF-8 string.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(const Span& other) const { return other.begin >= begin && other.end <= end; }
  Span shifted(std::size_t by) const { return {begin + by, end + by}; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct Token {
  std::string text;
  Span span;
  friend bool operator==(const Token&, const Token&) = default;
};

bool is_valid_utf8(std::string_view text);

std::string trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);
bool iequals_ascii(std::string_view a, std::string_view b);

// Collapses runs of ASCII whitespace to one space and trims both ends.
std::string collapse_whitespace(std::string_view text);

// Word tokenizer shared by the tagger, prompt pipeline and lints.
// Words are runs of [A-Za-z0-9_] and non-ASCII bytes, optionally joined by
// '-' or '\''; a trailing possessive "'s" is split off as its own token;
// every other non-space byte is a single-character token.
std::vector<Token> tokenize(std::string_view text);

bool is_word_token(std::string_view token);
bool is_sentence_terminator(std::string_view token);

// Number of whitespace-separated tokens.
std::size_t whitespace_token_count(std::string_view text);

}  // namespace geoalign
