#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoalign/text.hpp"

namespace geoalign {

struct Page {
  int index = 0;  // 1-based, from the NN filename
  std::string text;
  std::filesystem::path image_path;
  friend bool operator==(const Page&, const Page&) = default;
};

struct Book {
  std::string id;
  std::string title;
  std::string origin_culture;
  std::optional<std::string> source_url;
  std::vector<Page> pages;  // strictly increasing index
  friend bool operator==(const Book&, const Book&) = default;
};

enum class LintCode {
  Question,
  Dialogue,
  FirstPerson,
  UnresolvedPronoun,
  NonEnglish,
  TooLong,
  NonHumanHint,
};

std::string_view to_string(LintCode code);

struct LintFinding {
  int page_index = 0;
  LintCode code = LintCode::Question;
  Span span;  // byte offsets into the page text
  std::string message;
  friend bool operator==(const LintFinding&, const LintFinding&) = default;
};

// Reads <dir>/book.yaml and the paired <dir>/pages/NN.txt + NN.png files.
// Throws Error{EmptyBook, MissingAsset, BadEncoding, BadManifest, InvalidPage}.
Book load_book(const std::filesystem::path& dir);

// Advisory suitability lints for one page of text. Findings are ordered by
// span start, then by code.
std::vector<LintFinding> lint_page(std::string_view text, std::size_t token_budget,
                                   int page_index = 0);

std::vector<LintFinding> lint_book(const Book& book, std::size_t token_budget);

}  // namespace geoalign
