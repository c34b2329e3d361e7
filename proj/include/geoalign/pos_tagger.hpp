#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geoalign/text.hpp"

namespace geoalign {

struct TaggedToken {
  std::string text;
  std::string tag;  // Penn Treebank tag, or a punctuation tag such as "," or "."
  Span char_span;
};

// True for the 36 Penn Treebank word tags and the treebank punctuation tags.
bool is_penn_tag(std::string_view tag);
bool is_common_noun_tag(std::string_view tag);

// Brill-style transformation tagger: lexicon lookup, morphological rules for
// unknown words, then contextual rewrite passes. Rule files use the format of
// Brill's tagger v1.14 as distributed with the Pattern library.
//
// Immutable after load; tag() is safe to call concurrently.
class PosTagger {
 public:
  // Reads lexicon.txt, morphology.txt, context.txt and (if present)
  // context-supplement.txt from dir.
  static PosTagger load(const std::filesystem::path& dir);

  // Shared instance loaded from $GEOALIGN_DATA_DIR/pos, falling back to the
  // data directory configured at build time.
  static const PosTagger& shared();

  std::vector<TaggedToken> tag(std::string_view text) const;

  // Tags one sentence worth of pre-split tokens.
  std::vector<std::string> tag_sentence(std::span<const std::string> words) const;

  std::size_t lexicon_size() const { return lexicon_.size(); }

 private:
  enum class MorphCommand {
    Word, Char, HasPrefix, HasSuffix, AddPrefix, AddSuffix,
    DeletePrefix, DeleteSuffix, GoodLeft, GoodRight,
  };
  struct MorphRule {
    bool filtered = false;  // applies only when the current tag equals from_tag
    std::string from_tag;
    std::string affix;
    MorphCommand command = MorphCommand::Word;
    std::string to_tag;
  };

  enum class ContextCommand {
    PrevTag, NextTag, Prev2Tag, Next2Tag, Prev1Or2Tag, Next1Or2Tag,
    Prev1Or2Or3Tag, Next1Or2Or3Tag, SurroundTag, CurWd, PrevWd, NextWd,
    Prev1Or2Wd, Next1Or2Wd, PrevWdTag, NextWdTag, WdPrevTag, WdNextTag,
    WdAnd2Aft, WdAnd2TagBfr, WdAnd2TagAft, LBigram, RBigram, PrevBigram, NextBigram,
  };
  struct ContextRule {
    std::string from_tag;  // "*" matches any tag
    std::string to_tag;
    ContextCommand command = ContextCommand::PrevTag;
    std::string x;
    std::string y;
  };

  struct Entry {
    std::string word;
    std::string tag;
  };

  const std::string* lookup(const std::string& word) const;
  bool known(const std::string& word) const { return lexicon_.count(word) != 0; }
  std::string apply_morphology(const std::string& word, const std::string* prev_word,
                               const std::string* next_word) const;
  static void apply_context(std::vector<Entry>& tokens, const std::vector<ContextRule>& rules);

  static std::vector<MorphRule> parse_morphology(const std::filesystem::path& file);
  static std::vector<ContextRule> parse_context(const std::filesystem::path& file);

  std::unordered_map<std::string, std::string> lexicon_;
  std::vector<MorphRule> morphology_;
  std::vector<ContextRule> context_;
  std::vector<ContextRule> supplement_;
};

// tag_pos over the shared tagger.
std::vector<TaggedToken> tag_pos(std::string_view text);

}  // namespace geoalign
