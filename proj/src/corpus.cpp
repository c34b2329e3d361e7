#include "geoalign/corpus.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "geoalign/error.hpp"

namespace geoalign {

namespace fs = std::filesystem;

std::string_view to_string(LintCode code) {
  switch (code) {
    case LintCode::Question: return "QUESTION";
    case LintCode::Dialogue: return "DIALOGUE";
    case LintCode::FirstPerson: return "FIRST_PERSON";
    case LintCode::UnresolvedPronoun: return "UNRESOLVED_PRONOUN";
    case LintCode::NonEnglish: return "NON_ENGLISH";
    case LintCode::TooLong: return "TOO_LONG";
    case LintCode::NonHumanHint: return "NON_HUMAN_HINT";
  }
  return "UNKNOWN";
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string required_key(const YAML::Node& root, const char* key, const fs::path& file) {
  const YAML::Node node = root[key];
  if (!node || !node.IsScalar() || trim(node.as<std::string>()).empty()) {
    throw Error(ErrorCode::BadManifest, file.string() + ": missing or empty '" + key + "'");
  }
  return trim(node.as<std::string>());
}

// --- lint helpers ----------------------------------------------------------

struct CodePoint {
  char32_t value;
  Span span;
};

std::vector<CodePoint> decode_utf8(std::string_view text) {
  std::vector<CodePoint> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = c < 0x80 ? 1 : (c & 0xE0) == 0xC0 ? 2 : (c & 0xF0) == 0xE0 ? 3 : 4;
    len = std::min(len, text.size() - i);
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(text[i + k]) & 0x3F);
    out.push_back({cp, {i, i + len}});
    i += len;
  }
  return out;
}

// Typographic punctuation that English books use and that does not indicate a foreign script.
bool is_common_punctuation(char32_t cp) {
  static constexpr std::array<char32_t, 12> kAllowed = {
      0x00A0, 0x2018, 0x2019, 0x201C, 0x201D, 0x2013, 0x2014, 0x2026, 0x2022, 0x00AB, 0x00BB, 0x00B7};
  return std::find(kAllowed.begin(), kAllowed.end(), cp) != kAllowed.end();
}

std::vector<Span> sentence_spans(std::string_view text) {
  std::vector<Span> spans;
  std::size_t begin = 0;
  auto skip_space = [&](std::size_t p) {
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
    return p;
  };
  begin = skip_space(0);
  for (std::size_t i = begin; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t end = i + 1;
    while (end < text.size() && (text[end] == '.' || text[end] == '!' || text[end] == '?' ||
                                 text[end] == '"' || text[end] == '\'')) {
      ++end;
    }
    if (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) continue;
    spans.push_back({begin, end});
    begin = skip_space(end);
    i = begin == 0 ? 0 : begin - 1;
  }
  if (begin < text.size()) spans.push_back({begin, text.size()});
  return spans;
}

struct AsciiWord {
  std::string text;
  Span span;
};

std::vector<AsciiWord> ascii_words(std::string_view text) {
  std::vector<AsciiWord> words;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
    // A run glued to non-ASCII bytes is part of a foreign word, not an English token.
    const bool glued = (i > 0 && static_cast<unsigned char>(text[i - 1]) >= 0x80) ||
                       (j < text.size() && static_cast<unsigned char>(text[j]) >= 0x80);
    if (!glued) words.push_back({std::string(text.substr(i, j - i)), {i, j}});
    i = j;
  }
  return words;
}

const std::set<std::string>& animal_nouns() {
  static const std::set<std::string> kAnimals = {
      "ant", "ape", "bat", "bear", "bee", "beetle", "bird", "bull", "bunny", "butterfly",
      "calf", "camel", "cat", "caterpillar", "chick", "chicken", "cow", "crab", "crocodile",
      "crow", "cub", "deer", "dog", "dolphin", "donkey", "dragon", "duck", "eagle", "elephant",
      "fish", "fox", "frog", "giraffe", "goat", "goose", "hare", "hen", "hippo", "horse",
      "kitten", "lamb", "lion", "lizard", "monkey", "moose", "mouse", "mice", "octopus", "owl",
      "ox", "panda", "parrot", "peacock", "penguin", "pig", "puppy", "rabbit", "rat", "rooster",
      "seal", "shark", "sheep", "snail", "snake", "spider", "squirrel", "swan", "tiger",
      "tortoise", "turtle", "whale", "wolf", "worm", "zebra"};
  return kAnimals;
}

bool is_animal(std::string word) {
  word = to_lower_ascii(word);
  const auto& animals = animal_nouns();
  if (animals.count(word)) return true;
  if (word.size() > 3 && word.ends_with("ies") && animals.count(word.substr(0, word.size() - 3) + "y")) return true;
  if (word.size() > 2 && word.ends_with("es") && animals.count(word.substr(0, word.size() - 2))) return true;
  if (word.size() > 1 && word.ends_with("s") && animals.count(word.substr(0, word.size() - 1))) return true;
  if (word == "wolves" || word == "geese" || word == "oxen") return true;
  return false;
}

bool is_subject_modifier(const std::string& lower) {
  static const std::set<std::string> kSkip = {
      "a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her", "its", "our",
      "their", "one", "two", "three", "four", "five", "some", "many", "few", "little", "big",
      "small", "old", "young", "tiny", "huge", "baby", "every", "each", "all", "no"};
  return kSkip.count(lower) != 0;
}

void lint_questions(std::string_view text, const std::vector<Span>& sentences, int page,
                    std::vector<LintFinding>& out) {
  for (const Span& s : sentences) {
    for (std::size_t i = s.begin; i < s.end; ++i) {
      if (text[i] != '?') continue;
      out.push_back({page, LintCode::Question, {s.begin, i + 1},
                     "question: \"" + std::string(text.substr(s.begin, i + 1 - s.begin)) + "\""});
      break;
    }
  }
}

void lint_dialogue(std::string_view text, int page, std::vector<LintFinding>& out) {
  static constexpr std::string_view kOpen = "\xE2\x80\x9C";   // left double quotation mark
  static constexpr std::string_view kClose = "\xE2\x80\x9D";  // right double quotation mark
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t end = std::string_view::npos;
    if (text[i] == '"') {
      const auto close = text.find('"', i + 1);
      if (close == std::string_view::npos) break;
      end = close + 1;
    } else if (text.substr(i, kOpen.size()) == kOpen) {
      const auto close = text.find(kClose, i + kOpen.size());
      if (close == std::string_view::npos) break;
      end = close + kClose.size();
    } else {
      ++i;
      continue;
    }
    out.push_back({page, LintCode::Dialogue, {i, end}, "quoted dialogue"});
    i = end;
  }
}

void lint_first_person(const std::vector<AsciiWord>& words, int page, std::vector<LintFinding>& out) {
  static const std::set<std::string> kPronouns = {"my", "me", "we", "our"};
  for (const auto& w : words) {
    if (w.text == "I" || kPronouns.count(to_lower_ascii(w.text))) {
      out.push_back({page, LintCode::FirstPerson, w.span, "first-person pronoun '" + w.text + "'"});
    }
  }
}

void lint_non_english(std::string_view text, int page, std::vector<LintFinding>& out) {
  std::optional<Span> run;
  auto flush = [&] {
    if (!run) return;
    out.push_back({page, LintCode::NonEnglish, *run,
                   "non-English text \"" + std::string(text.substr(run->begin, run->size())) + "\""});
    run.reset();
  };
  for (const CodePoint& cp : decode_utf8(text)) {
    const bool foreign = cp.value >= 0x80 && !is_common_punctuation(cp.value);
    if (!foreign) {
      flush();
      continue;
    }
    if (run) {
      run->end = cp.span.end;
    } else {
      run = cp.span;
    }
  }
  flush();
}

void lint_too_long(std::string_view text, std::size_t budget, int page, std::vector<LintFinding>& out) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    if (count == budget) {
      out.push_back({page, LintCode::TooLong, {i, text.size()},
                     "exceeds token budget of " + std::to_string(budget) + " (" +
                         std::to_string(whitespace_token_count(text)) + " tokens)"});
      return;
    }
    ++count;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  }
}

void lint_first_sentence(std::string_view text, const std::vector<Span>& sentences, int page,
                         std::vector<LintFinding>& out) {
  if (sentences.empty()) return;
  const Span first = sentences.front();
  const std::vector<Token> tokens = tokenize(text.substr(first.begin, first.size()));
  std::vector<Token> words;
  for (const auto& t : tokens) {
    if (is_word_token(t.text)) words.push_back({t.text, t.span.shifted(first.begin)});
  }
  if (words.empty()) return;

  static const std::set<std::string> kThirdPerson = {"he", "she", "it", "they", "his", "her"};
  if (kThirdPerson.count(to_lower_ascii(words.front().text))) {
    out.push_back({page, LintCode::UnresolvedPronoun, words.front().span,
                   "opens with pronoun '" + words.front().text + "' without an antecedent on this page"});
  }

  // Subject head: skip determiners, quantifiers, size words and possessors ("Grandma 's").
  std::size_t k = 0;
  while (k < words.size()) {
    if (k + 1 < words.size() && words[k + 1].text == "'s") {
      k += 2;
    } else if (is_subject_modifier(to_lower_ascii(words[k].text))) {
      ++k;
    } else {
      break;
    }
  }
  for (std::size_t probe = k; probe < std::min(k + 2, words.size()); ++probe) {
    if (is_animal(words[probe].text)) {
      out.push_back({page, LintCode::NonHumanHint, words[probe].span,
                     "subject '" + words[probe].text + "' looks like an animal character"});
      break;
    }
  }
}

}  // namespace

Book load_book(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "book folder not found: " + dir.string());
  const fs::path manifest = dir / "book.yaml";
  if (!fs::exists(manifest)) throw Error(ErrorCode::BadManifest, "missing " + manifest.string());

  Book book;
  try {
    const YAML::Node root = YAML::LoadFile(manifest.string());
    book.id = required_key(root, "id", manifest);
    book.title = required_key(root, "title", manifest);
    book.origin_culture = required_key(root, "origin_culture", manifest);
    if (root["source_url"] && root["source_url"].IsScalar()) {
      book.source_url = root["source_url"].as<std::string>();
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::BadManifest, manifest.string() + ": " + e.what());
  }

  const fs::path pages_dir = dir / "pages";
  std::map<int, std::pair<std::optional<fs::path>, std::optional<fs::path>>> pairs;
  if (fs::is_directory(pages_dir)) {
    static const std::regex kPageFile(R"(^([0-9]{2})\.(txt|png)$)");
    for (const auto& entry : fs::directory_iterator(pages_dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      std::smatch m;
      if (!std::regex_match(name, m, kPageFile)) continue;
      const int index = std::stoi(m[1].str());
      if (index == 0) throw Error(ErrorCode::InvalidPage, "page numbers start at 01: " + name);
      auto& slot = pairs[index];
      (m[2] == "txt" ? slot.first : slot.second) = entry.path();
    }
  }
  if (pairs.empty()) throw Error(ErrorCode::EmptyBook, "no page pairs under " + pages_dir.string());

  for (const auto& [index, slot] : pairs) {
    const auto& [txt, png] = slot;
    char nn[3];
    std::snprintf(nn, sizeof nn, "%02d", index);
    if (!txt) throw Error(ErrorCode::MissingAsset, "page " + std::string(nn) + " has an image but no text");
    if (!png) throw Error(ErrorCode::MissingAsset, "page " + std::string(nn) + " has text but no image");
    std::string text = read_file(*txt);
    if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
    if (!is_valid_utf8(text)) throw Error(ErrorCode::BadEncoding, txt->string() + " is not valid UTF-8");
    text = trim(text);
    if (text.empty()) throw Error(ErrorCode::InvalidPage, txt->string() + " has no text");
    book.pages.push_back({index, std::move(text), *png});
  }
  return book;
}

std::vector<LintFinding> lint_page(std::string_view text, std::size_t token_budget, int page_index) {
  std::vector<LintFinding> out;
  const auto sentences = sentence_spans(text);
  const auto words = ascii_words(text);
  lint_questions(text, sentences, page_index, out);
  lint_dialogue(text, page_index, out);
  lint_first_person(words, page_index, out);
  lint_first_sentence(text, sentences, page_index, out);
  lint_non_english(text, page_index, out);
  lint_too_long(text, token_budget, page_index, out);
  std::stable_sort(out.begin(), out.end(), [](const LintFinding& a, const LintFinding& b) {
    if (a.span.begin != b.span.begin) return a.span.begin < b.span.begin;
    return a.code < b.code;
  });
  return out;
}

std::vector<LintFinding> lint_book(const Book& book, std::size_t token_budget) {
  std::vector<LintFinding> out;
  for (const Page& page : book.pages) {
    auto findings = lint_page(page.text, token_budget, page.index);
    out.insert(out.end(), findings.begin(), findings.end());
  }
  return out;
}

}  // namespace geoalign
