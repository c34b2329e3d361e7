#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "geoalign/culture.hpp"

namespace geoalign {

class PosTagger;

inline constexpr std::size_t kDefaultTokenBudget = 75;

// Counts prompt tokens the way the generator's text encoder would. An empty
// counter means whitespace tokens.
using TokenCounter = std::function<std::size_t(std::string_view)>;

struct RemovedToken {
  std::string text;
  std::string tag;
  friend bool operator==(const RemovedToken&, const RemovedToken&) = default;
};

struct ProcessedPrompt {
  std::string body;
  std::size_t token_count = 0;
  std::vector<RemovedToken> removed_tokens;
  bool truncated = false;
};

// Page text -> prompt body:
//   1. strip "?", "!", "(" and ")"
//   2. replace the conjunctions and/but/yet with commas, collapsing duplicates
//   3. POS-tag
//   4. drop the lowercase determiners the/a/an (tag DT); possessives stay
//   5. fit the budget by cutting at the last sentence, else clause, boundary
// Throws Error{BudgetUnsatisfiable} when not even one clause fits.
ProcessedPrompt process_page_text(std::string_view text, std::size_t budget = kDefaultTokenBudget,
                                  const TokenCounter& counter = {}, const PosTagger* tagger = nullptr);

// "<prompt_keyword> childrens book style, " (no leading space for an empty keyword).
std::string method1_prefix(const CultureProfile& culture);

// Throws Error{BudgetExceeded} when prefix plus body exceed the budget.
std::string build_method1_prompt(const ProcessedPrompt& processed, const CultureProfile& culture,
                                 std::size_t budget = kDefaultTokenBudget, const TokenCounter& counter = {});

struct EditorialPrompt {
  std::string initial;
  std::string editorial;
  // Whitespace-token indices in `editorial` occupied by inserted keyword words.
  std::vector<std::size_t> insertions;
};

// Inserts culture.editorial_keyword before every common noun (NN, NNS) of the
// prompt body; the "... childrens book style," prefix is left untouched.
// Throws Error{NoNouns} when there is no insertion site.
EditorialPrompt build_editorial_prompt(std::string_view initial, const CultureProfile& culture,
                                       const PosTagger* tagger = nullptr);

// Deletes the inserted keyword tokens again; equals the whitespace-normalized initial prompt.
std::string strip_insertions(const EditorialPrompt& prompt);

// Byte offset where the body of a method-1 prompt starts (0 when there is no style prefix).
std::size_t prompt_body_offset(std::string_view prompt);

}  // namespace geoalign
