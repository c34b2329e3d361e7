#include <gtest/gtest.h>

#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "geoalign/error.hpp"
#include "geoalign/paths.hpp"
#include "geoalign/pos_tagger.hpp"

using namespace geoalign;

namespace {

const std::vector<std::pair<std::string, std::string>> kOracleCases = {
#include "tagger_cases.inc"
};

std::string render(const std::vector<TaggedToken>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t.text + "/" + t.tag;
  }
  return out;
}

}  // namespace

TEST(Tagger, MatchesReferenceTaggerOnBookPages) {
  for (const auto& [text, expected] : kOracleCases) {
    EXPECT_EQ(render(tag_pos(text)), expected) << text;
  }
}

TEST(Tagger, DidNotBlowKeepsBaseVerb) {
  EXPECT_EQ(render(tag_pos("The wind did not blow.")), "The/DT wind/NN did/VBD not/RB blow/VB ./.");
}

TEST(Tagger, SpansPointIntoTheInput) {
  const std::string text = "Riley  and his dad, at the park.";
  for (const auto& t : tag_pos(text)) {
    EXPECT_EQ(text.substr(t.char_span.begin, t.char_span.size()), t.text);
  }
}

TEST(Tagger, EveryTagIsPenn) {
  for (const auto& [text, expected] : kOracleCases) {
    for (const auto& t : tag_pos(text)) EXPECT_TRUE(is_penn_tag(t.tag)) << t.text << "/" << t.tag;
  }
}

TEST(Tagger, CommonNounTags) {
  EXPECT_TRUE(is_common_noun_tag("NN"));
  EXPECT_TRUE(is_common_noun_tag("NNS"));
  EXPECT_FALSE(is_common_noun_tag("NNP"));
  EXPECT_FALSE(is_common_noun_tag("NNPS"));
  EXPECT_FALSE(is_common_noun_tag("JJ"));
}

TEST(Tagger, NonAsciiWordsDoNotBreakTagging) {
  const auto tokens = tag_pos("Grandma said नमस्ते to the café owner.");
  ASSERT_FALSE(tokens.empty());
  EXPECT_EQ(tokens.back().tag, ".");
}

TEST(Tagger, EmptyInput) { EXPECT_TRUE(tag_pos("").empty()); }

TEST(Tagger, SharedTaggerHasALexicon) { EXPECT_GT(PosTagger::shared().lexicon_size(), 50000u); }

TEST(Tagger, MissingDataDirectoryIsAnError) {
  EXPECT_THROW(PosTagger::load(data_directory() / "no-such-dir"), Error);
}

TEST(Tagger, ConcurrentUseGivesSameAnswers) {
  const std::string expected = render(tag_pos(kOracleCases[8].first));
  std::vector<std::string> got(8);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < got.size(); ++i) {
    threads.emplace_back([&, i] { got[i] = render(tag_pos(kOracleCases[8].first)); });
  }
  for (auto& t : threads) t.join();
  for (const auto& g : got) EXPECT_EQ(g, expected);
}
