#include "geoalign/prompt.hpp"

#include <algorithm>
#include <optional>
#include <set>

#include "geoalign/error.hpp"
#include "geoalign/pos_tagger.hpp"
#include "geoalign/text.hpp"

namespace geoalign {

namespace {

constexpr std::string_view kStyleSuffix = "childrens book style, ";

struct Piece {
  std::string text;
  std::string tag;
  bool space_before = false;
};

bool is_clause_mark(std::string_view t) { return t == "," || t == ";" || t == ":"; }

std::string render(const std::vector<Piece>& pieces, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    const Piece& p = pieces[i];
    if (i > 0) {
      const bool space = p.text == "," ? false : (pieces[i - 1].text == "," || p.space_before);
      if (space) out.push_back(' ');
    }
    out += p.text;
  }
  return out;
}

std::string render(const std::vector<Piece>& pieces) { return render(pieces, pieces.size()); }

std::vector<Piece> to_pieces(std::string_view text) {
  std::vector<Piece> pieces;
  std::size_t prev_end = 0;
  for (auto& t : tokenize(text)) {
    pieces.push_back({std::move(t.text), {}, !pieces.empty() && t.span.begin > prev_end});
    prev_end = t.span.end;
  }
  return pieces;
}

// Drops commas that would open a sentence, follow another separator, or close one.
std::vector<Piece> normalize_commas(const std::vector<Piece>& in) {
  std::vector<Piece> out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i].text == ",") {
      if (out.empty()) continue;
      const std::string& last = out.back().text;
      if (is_clause_mark(last) || is_sentence_terminator(last)) continue;
      if (i + 1 == in.size() || is_sentence_terminator(in[i + 1].text) || in[i + 1].text == ";" ||
          in[i + 1].text == ":") {
        continue;
      }
    }
    out.push_back(in[i]);
  }
  return out;
}

std::size_t count_tokens(const TokenCounter& counter, std::string_view text) {
  return counter ? counter(text) : whitespace_token_count(text);
}

bool is_conjunction(std::string_view word) {
  return iequals_ascii(word, "and") || iequals_ascii(word, "but") || iequals_ascii(word, "yet");
}

bool is_removable_determiner(const Piece& p) {
  return p.tag == "DT" && (p.text == "the" || p.text == "a" || p.text == "an");
}

struct WsToken {
  std::string text;
  Span span;
};

std::vector<WsToken> whitespace_tokens(std::string_view text) {
  std::vector<WsToken> out;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < text.size()) {
    if (space(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !space(text[j])) ++j;
    out.push_back({std::string(text.substr(i, j - i)), {i, j}});
    i = j;
  }
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

}  // namespace

ProcessedPrompt process_page_text(std::string_view text, std::size_t budget, const TokenCounter& counter,
                                  const PosTagger* tagger) {
  const PosTagger& pos = tagger != nullptr ? *tagger : PosTagger::shared();
  ProcessedPrompt result;

  // 1. punctuation that re-weights the preceding word
  std::string stripped;
  stripped.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '?':
      case '!': result.removed_tokens.push_back({std::string(1, c), "."}); break;
      case '(':
      case ')': result.removed_tokens.push_back({std::string(1, c), std::string(1, c)}); break;
      default: stripped.push_back(c);
    }
  }

  // 2. coordinating conjunctions become clause commas
  std::vector<Piece> pieces = to_pieces(stripped);
  for (Piece& p : pieces) {
    if (is_conjunction(p.text)) {
      result.removed_tokens.push_back({p.text, "CC"});
      p.text = ",";
    }
  }
  pieces = normalize_commas(pieces);

  // 3. tag the cleaned text; retokenizing the rendering reproduces the pieces
  const std::string cleaned = render(pieces);
  pieces.clear();
  std::size_t prev_end = 0;
  for (auto& t : pos.tag(cleaned)) {
    pieces.push_back({std::move(t.text), std::move(t.tag), !pieces.empty() && t.char_span.begin > prev_end});
    prev_end = t.char_span.end;
  }

  // 4. determiners carry no scene content
  std::vector<Piece> kept;
  kept.reserve(pieces.size());
  for (auto& p : pieces) {
    if (is_removable_determiner(p)) {
      result.removed_tokens.push_back({p.text, p.tag});
      continue;
    }
    kept.push_back(std::move(p));
  }
  kept = normalize_commas(kept);

  // 5. budget
  std::string body = render(kept);
  if (count_tokens(counter, body) > budget) {
    std::optional<std::size_t> cut;
    for (std::size_t k = kept.size(); k-- > 0;) {
      if (is_sentence_terminator(kept[k].text) && count_tokens(counter, render(kept, k + 1)) <= budget) {
        cut = k + 1;
        break;
      }
    }
    if (!cut) {
      for (std::size_t k = kept.size(); k-- > 1;) {
        if (is_clause_mark(kept[k].text) && count_tokens(counter, render(kept, k)) <= budget) {
          cut = k;
          break;
        }
      }
    }
    if (!cut) {
      throw Error(ErrorCode::BudgetUnsatisfiable,
                  "no sentence or clause of the page fits a budget of " + std::to_string(budget) + " tokens");
    }
    body = render(kept, *cut);
    result.truncated = true;
  }
  result.token_count = count_tokens(counter, body);
  result.body = std::move(body);
  return result;
}

std::string method1_prefix(const CultureProfile& culture) {
  const std::string keyword = trim(culture.prompt_keyword);
  return keyword.empty() ? std::string(kStyleSuffix) : keyword + " " + std::string(kStyleSuffix);
}

std::string build_method1_prompt(const ProcessedPrompt& processed, const CultureProfile& culture,
                                 std::size_t budget, const TokenCounter& counter) {
  std::string prompt = method1_prefix(culture) + processed.body;
  const std::size_t tokens = count_tokens(counter, prompt);
  if (tokens > budget) {
    throw Error(ErrorCode::BudgetExceeded, "prompt needs " + std::to_string(tokens) + " tokens, budget is " +
                                               std::to_string(budget));
  }
  return prompt;
}

std::size_t prompt_body_offset(std::string_view prompt) {
  static constexpr std::string_view kMarker = "book style,";
  const std::string lower = to_lower_ascii(prompt);
  const auto pos = lower.find(kMarker);
  if (pos == std::string::npos) return 0;
  std::size_t offset = pos + kMarker.size();
  while (offset < prompt.size() && prompt[offset] == ' ') ++offset;
  return offset;
}

EditorialPrompt build_editorial_prompt(std::string_view initial, const CultureProfile& culture,
                                       const PosTagger* tagger) {
  const PosTagger& pos = tagger != nullptr ? *tagger : PosTagger::shared();
  std::vector<std::string> keyword;
  for (auto& w : whitespace_tokens(culture.editorial_keyword)) keyword.push_back(std::move(w.text));
  if (keyword.empty()) {
    throw Error(ErrorCode::InvalidProfile, culture.name + ": editorial_keyword is required for method 3");
  }

  const std::size_t body_offset = prompt_body_offset(initial);
  const auto words = whitespace_tokens(initial);
  std::set<std::size_t> sites;
  for (const auto& t : pos.tag(initial.substr(body_offset))) {
    if (!is_common_noun_tag(t.tag) || !is_word_token(t.text)) continue;
    const std::size_t at = body_offset + t.char_span.begin;
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (words[w].span.begin <= at && at < words[w].span.end) {
        sites.insert(w);
        break;
      }
    }
  }
  if (sites.empty()) throw Error(ErrorCode::NoNouns, "no common noun to anchor the editorial keyword");

  EditorialPrompt out;
  out.initial = std::string(initial);
  std::vector<std::string> edited;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (sites.count(w)) {
      for (const auto& k : keyword) {
        out.insertions.push_back(edited.size());
        edited.push_back(k);
      }
    }
    edited.push_back(words[w].text);
  }
  out.editorial = join(edited);
  return out;
}

std::string strip_insertions(const EditorialPrompt& prompt) {
  const auto words = whitespace_tokens(prompt.editorial);
  const std::set<std::size_t> inserted(prompt.insertions.begin(), prompt.insertions.end());
  std::vector<std::string> kept;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (!inserted.count(w)) kept.push_back(words[w].text);
  }
  return join(kept);
}

}  // namespace geoalign
