#include "geoalign/text.hpp"

#include <algorithm>
#include <cctype>

namespace geoalign {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0 || c == '_';
}

std::size_t scan_word(std::string_view text, std::size_t pos) {
  while (pos < text.size() && is_word_byte(text[pos])) ++pos;
  return pos;
}

// Greedy \w+(?:[-']\w+)* starting at pos.
std::size_t scan_compound_word(std::string_view text, std::size_t pos) {
  std::size_t end = scan_word(text, pos);
  while (end + 1 < text.size() && (text[end] == '-' || text[end] == '\'') &&
         is_word_byte(text[end + 1])) {
    end = scan_word(text, end + 1);
  }
  return end;
}

bool possessive_at(std::string_view text, std::size_t pos) {
  return pos + 1 < text.size() && text[pos] == '\'' && text[pos + 1] == 's' &&
         (pos + 2 == text.size() || !is_word_byte(text[pos + 2]));
}

}  // namespace

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= text.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

std::string trim(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return std::string(text.substr(b, e - b));
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  });
  return out;
}

bool iequals_ascii(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    if (possessive_at(text, i)) {
      end = i + 2;
    } else if (text[i] == '\'' && i + 1 < text.size() && is_word_byte(text[i + 1])) {
      end = scan_word(text, i + 1);
    } else if (is_word_byte(text[i])) {
      end = scan_compound_word(text, i);
      if (end - i > 2 && possessive_at(text, end - 2)) end -= 2;
    }
    tokens.push_back({std::string(text.substr(i, end - i)), {i, end}});
    i = end;
  }
  return tokens;
}

bool is_word_token(std::string_view token) {
  return std::any_of(token.begin(), token.end(), is_word_byte);
}

bool is_sentence_terminator(std::string_view token) {
  return token == "." || token == "!" || token == "?";
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

}  // namespace geoalign
