#include "geoalign/pos_tagger.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "geoalign/error.hpp"
#include "geoalign/paths.hpp"

namespace geoalign {

namespace {

constexpr std::array<std::string_view, 36> kWordTags = {
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN",
    "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM",
    "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB"};
constexpr std::array<std::string_view, 10> kPunctuationTags = {
    "#", "$", "''", "``", "(", ")", ",", ".", ":", "\""};

std::vector<std::vector<std::string>> read_rule_lines(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::Io, "cannot open tagger data " + file.string());
  std::vector<std::vector<std::string>> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.rfind(";;;", 0) == 0) continue;
    std::istringstream fields(stripped);
    std::vector<std::string> parts;
    for (std::string f; fields >> f;) parts.push_back(f);
    lines.push_back(std::move(parts));
  }
  return lines;
}

// str.istitle() restricted to ASCII case; other bytes count as uncased.
bool is_title_case(const std::string& word) {
  bool cased = false;
  bool previous_cased = false;
  for (char c : word) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isupper(u)) {
      if (previous_cased) return false;
      previous_cased = cased = true;
    } else if (std::islower(u)) {
      if (!previous_cased) return false;
      previous_cased = cased = true;
    } else {
      previous_cased = false;
    }
  }
  return cased;
}

bool is_cardinal(const std::string& word) {
  static const std::regex kCardinal(R"(^[0-9\-\,\.\:\/\%\$]+$)");
  return std::regex_match(word, kCardinal);
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }
bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

}  // namespace

bool is_penn_tag(std::string_view tag) {
  return std::find(kWordTags.begin(), kWordTags.end(), tag) != kWordTags.end() ||
         std::find(kPunctuationTags.begin(), kPunctuationTags.end(), tag) != kPunctuationTags.end();
}

bool is_common_noun_tag(std::string_view tag) { return tag == "NN" || tag == "NNS"; }

std::vector<PosTagger::MorphRule> PosTagger::parse_morphology(const std::filesystem::path& file) {
  static const std::unordered_map<std::string, MorphCommand> kCommands = {
      {"word", MorphCommand::Word},           {"char", MorphCommand::Char},
      {"haspref", MorphCommand::HasPrefix},   {"hassuf", MorphCommand::HasSuffix},
      {"addpref", MorphCommand::AddPrefix},   {"addsuf", MorphCommand::AddSuffix},
      {"deletepref", MorphCommand::DeletePrefix}, {"deletesuf", MorphCommand::DeleteSuffix},
      {"goodleft", MorphCommand::GoodLeft},   {"goodright", MorphCommand::GoodRight},
  };
  auto command_of = [&](const std::string& field, bool& filtered) -> const MorphCommand* {
    std::string name = to_lower_ascii(field);
    filtered = false;
    if (auto it = kCommands.find(name); it != kCommands.end()) return &it->second;
    if (!name.empty() && name[0] == 'f') {
      if (auto it = kCommands.find(name.substr(1)); it != kCommands.end()) {
        filtered = true;
        return &it->second;
      }
    }
    return nullptr;
  };

  std::vector<MorphRule> rules;
  for (const auto& r : read_rule_lines(file)) {
    if (r.size() < 4) throw Error(ErrorCode::BadConfig, "malformed morphology rule in " + file.string());
    MorphRule rule;
    bool found = false;
    bool filtered = false;
    // "ly hassuf 2 RB x" (unfiltered) or "NN s fhassuf 1 NNS x" (filtered by current tag).
    if (const auto* cmd = command_of(r[1], filtered)) {
      rule = {false, {}, r[0], *cmd, r[r.size() - 2]};
      found = true;
    }
    if (const auto* cmd = command_of(r[2], filtered)) {
      rule = {true, r[0], r[1], *cmd, r[r.size() - 2]};
      found = true;
    }
    if (!found) throw Error(ErrorCode::BadConfig, "unknown morphology command in " + file.string());
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<PosTagger::ContextRule> PosTagger::parse_context(const std::filesystem::path& file) {
  static const std::unordered_map<std::string, ContextCommand> kCommands = {
      {"prevtag", ContextCommand::PrevTag},
      {"nexttag", ContextCommand::NextTag},
      {"prev2tag", ContextCommand::Prev2Tag},
      {"next2tag", ContextCommand::Next2Tag},
      {"prev1or2tag", ContextCommand::Prev1Or2Tag},
      {"next1or2tag", ContextCommand::Next1Or2Tag},
      {"prev1or2or3tag", ContextCommand::Prev1Or2Or3Tag},
      {"next1or2or3tag", ContextCommand::Next1Or2Or3Tag},
      {"surroundtag", ContextCommand::SurroundTag},
      {"curwd", ContextCommand::CurWd},
      {"prevwd", ContextCommand::PrevWd},
      {"nextwd", ContextCommand::NextWd},
      {"prev1or2wd", ContextCommand::Prev1Or2Wd},
      {"next1or2wd", ContextCommand::Next1Or2Wd},
      {"prevwdtag", ContextCommand::PrevWdTag},
      {"nextwdtag", ContextCommand::NextWdTag},
      {"wdprevtag", ContextCommand::WdPrevTag},
      {"wdnexttag", ContextCommand::WdNextTag},
      {"wdand2aft", ContextCommand::WdAnd2Aft},
      {"wdand2tagbfr", ContextCommand::WdAnd2TagBfr},
      {"wdand2tagaft", ContextCommand::WdAnd2TagAft},
      {"lbigram", ContextCommand::LBigram},
      {"rbigram", ContextCommand::RBigram},
      {"prevbigram", ContextCommand::PrevBigram},
      {"nextbigram", ContextCommand::NextBigram},
  };
  std::vector<ContextRule> rules;
  for (const auto& r : read_rule_lines(file)) {
    if (r.size() < 4) throw Error(ErrorCode::BadConfig, "malformed context rule in " + file.string());
    auto it = kCommands.find(to_lower_ascii(r[2]));
    // Unknown commands never fire; keep parity with the reference tagger and skip them.
    if (it == kCommands.end()) continue;
    rules.push_back({r[0], r[1], it->second, r[3], r.size() > 4 ? r[4] : std::string{}});
  }
  return rules;
}

PosTagger PosTagger::load(const std::filesystem::path& dir) {
  PosTagger tagger;
  for (const auto& r : read_rule_lines(dir / "lexicon.txt")) {
    if (r.size() >= 2) tagger.lexicon_[r[0]] = r[1];
  }
  tagger.morphology_ = parse_morphology(dir / "morphology.txt");
  tagger.context_ = parse_context(dir / "context.txt");
  if (std::filesystem::exists(dir / "context-supplement.txt")) {
    tagger.supplement_ = parse_context(dir / "context-supplement.txt");
  }
  return tagger;
}

const PosTagger& PosTagger::shared() {
  static const PosTagger instance = load(data_directory() / "pos");
  return instance;
}

const std::string* PosTagger::lookup(const std::string& word) const {
  auto it = lexicon_.find(word);
  return it == lexicon_.end() ? nullptr : &it->second;
}

std::string PosTagger::apply_morphology(const std::string& w, const std::string* prev_word,
                                        const std::string* next_word) const {
  std::string tag = "NN";
  for (const auto& r : morphology_) {
    if (r.filtered && tag != r.from_tag) continue;
    const std::string& x = r.affix;
    bool hit = false;
    switch (r.command) {
      case MorphCommand::Word: hit = x == w; break;
      case MorphCommand::Char: hit = w.find(x) != std::string::npos; break;
      case MorphCommand::HasPrefix: hit = starts_with(w, x); break;
      case MorphCommand::HasSuffix: hit = ends_with(w, x); break;
      case MorphCommand::AddPrefix: hit = known(x + w); break;
      case MorphCommand::AddSuffix: hit = known(w + x); break;
      case MorphCommand::DeletePrefix:
        hit = starts_with(w, x) && known(w.substr(x.size()));
        break;
      case MorphCommand::DeleteSuffix:
        hit = ends_with(w, x) && known(w.substr(0, w.size() - x.size()));
        break;
      case MorphCommand::GoodLeft: hit = next_word != nullptr && x == *next_word; break;
      case MorphCommand::GoodRight: hit = prev_word != nullptr && x == *prev_word; break;
    }
    if (hit) tag = r.to_tag;
  }
  return tag;
}

void PosTagger::apply_context(std::vector<Entry>& tokens, const std::vector<ContextRule>& rules) {
  constexpr std::size_t kPad = 3;
  static const Entry kBoundary{"STAART", "STAART"};
  std::vector<Entry> t;
  t.reserve(tokens.size() + 2 * kPad);
  t.insert(t.end(), kPad, kBoundary);
  t.insert(t.end(), tokens.begin(), tokens.end());
  t.insert(t.end(), kPad, kBoundary);

  for (std::size_t i = kPad; i < kPad + tokens.size(); ++i) {
    // Rules are matched against the tag the token had when this pass reached it;
    // neighbours to the left already carry their rewritten tags.
    const std::string original = t[i].tag;
    auto tag = [&](int offset) -> const std::string& { return t[i + offset].tag; };
    auto word = [&](int offset) -> const std::string& { return t[i + offset].word; };
    for (const auto& r : rules) {
      if (original != r.from_tag && r.from_tag != "*") continue;
      const std::string& x = r.x;
      const std::string& y = r.y;
      bool hit = false;
      switch (r.command) {
        case ContextCommand::PrevTag: hit = x == tag(-1); break;
        case ContextCommand::NextTag: hit = x == tag(1); break;
        case ContextCommand::Prev2Tag: hit = x == tag(-2); break;
        case ContextCommand::Next2Tag: hit = x == tag(2); break;
        case ContextCommand::Prev1Or2Tag: hit = x == tag(-1) || x == tag(-2); break;
        case ContextCommand::Next1Or2Tag: hit = x == tag(1) || x == tag(2); break;
        case ContextCommand::Prev1Or2Or3Tag: hit = x == tag(-1) || x == tag(-2) || x == tag(-3); break;
        case ContextCommand::Next1Or2Or3Tag: hit = x == tag(1) || x == tag(2) || x == tag(3); break;
        case ContextCommand::SurroundTag: hit = x == tag(-1) && y == tag(1); break;
        case ContextCommand::CurWd: hit = x == word(0); break;
        case ContextCommand::PrevWd: hit = x == word(-1); break;
        case ContextCommand::NextWd: hit = x == word(1); break;
        case ContextCommand::Prev1Or2Wd: hit = x == word(-1) || x == word(-2); break;
        case ContextCommand::Next1Or2Wd: hit = x == word(1) || x == word(2); break;
        case ContextCommand::PrevWdTag: hit = x == word(-1) && y == tag(-1); break;
        case ContextCommand::NextWdTag: hit = x == word(1) && y == tag(1); break;
        case ContextCommand::WdPrevTag: hit = x == tag(-1) && y == word(0); break;
        case ContextCommand::WdNextTag: hit = x == word(0) && y == tag(1); break;
        case ContextCommand::WdAnd2Aft: hit = x == word(0) && y == word(2); break;
        case ContextCommand::WdAnd2TagBfr: hit = x == tag(-2) && y == word(0); break;
        case ContextCommand::WdAnd2TagAft: hit = x == word(0) && y == tag(2); break;
        case ContextCommand::LBigram: hit = x == word(-1) && y == word(0); break;
        case ContextCommand::RBigram: hit = x == word(0) && y == word(1); break;
        case ContextCommand::PrevBigram: hit = x == tag(-2) && y == tag(-1); break;
        case ContextCommand::NextBigram: hit = x == tag(1) && y == tag(2); break;
      }
      if (hit) t[i].tag = r.to_tag;
    }
  }
  std::copy(t.begin() + kPad, t.end() - kPad, tokens.begin());
}

std::vector<std::string> PosTagger::tag_sentence(std::span<const std::string> words) const {
  std::vector<Entry> tagged;
  std::vector<bool> unknown;
  tagged.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::string* tag = lookup(words[i]);
    if (tag == nullptr && i == 0) tag = lookup(to_lower_ascii(words[i]));
    tagged.push_back({words[i], tag != nullptr ? *tag : std::string{}});
    unknown.push_back(tag == nullptr);
  }
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    if (!unknown[i]) continue;
    const std::string& w = tagged[i].word;
    if (is_title_case(w)) {
      tagged[i].tag = "NNP";
    } else if (is_cardinal(w)) {
      tagged[i].tag = "CD";
    } else {
      const std::string* prev = i > 0 ? &tagged[i - 1].word : nullptr;
      const std::string* next = i + 1 < tagged.size() ? &tagged[i + 1].word : nullptr;
      tagged[i].tag = apply_morphology(w, prev, next);
    }
  }
  apply_context(tagged, context_);
  if (!supplement_.empty()) apply_context(tagged, supplement_);

  std::vector<std::string> tags;
  tags.reserve(tagged.size());
  for (auto& e : tagged) tags.push_back(std::move(e.tag));
  return tags;
}

std::vector<TaggedToken> PosTagger::tag(std::string_view text) const {
  const std::vector<Token> tokens = tokenize(text);
  std::vector<TaggedToken> out;
  out.reserve(tokens.size());
  std::size_t sentence_begin = 0;
  auto flush = [&](std::size_t end) {
    if (end == sentence_begin) return;
    std::vector<std::string> words;
    for (std::size_t k = sentence_begin; k < end; ++k) words.push_back(tokens[k].text);
    const auto tags = tag_sentence(words);
    for (std::size_t k = sentence_begin; k < end; ++k) {
      out.push_back({tokens[k].text, tags[k - sentence_begin], tokens[k].span});
    }
    sentence_begin = end;
  };
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (is_sentence_terminator(tokens[k].text)) flush(k + 1);
  }
  flush(tokens.size());
  return out;
}

std::vector<TaggedToken> tag_pos(std::string_view text) { return PosTagger::shared().tag(text); }

}  // namespace geoalign
