#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "geoalign/culture.hpp"
#include "geoalign/embedding.hpp"
#include "geoalign/error.hpp"
#include "geoalign/stub_models.hpp"
#include "test_util.hpp"

using namespace geoalign;
using testutil::TempDir;

namespace {

std::shared_ptr<EmbeddingService> service() {
  static auto s = std::make_shared<EmbeddingService>(std::make_shared<HashTextImageEncoder>());
  return s;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::Io;
}

CultureMask mask_with(double k) {
  CultureProfile p = CultureRegistry::defaults().get("japanese");
  p.mask_multiplier = k;
  return service()->build_culture_mask(p);
}

}  // namespace

TEST(Cosine, Basics) {
  const std::vector<double> a = {1, 2, 3};
  const std::vector<double> b = {-2, 0.5, 4};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
  EXPECT_NEAR(cosine_similarity(a, b), 11.0 / (std::sqrt(14.0) * std::sqrt(20.25)), 1e-15);
  const std::vector<double> neg = {-1, -2, -3};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, neg), -1.0);
  EXPECT_EQ(code_of([&] { cosine_similarity(a, std::vector<double>{1, 2}); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { cosine_similarity(a, std::vector<double>{0, 0, 0}); }), ErrorCode::ZeroVector);
}

TEST(Cosine, SymmetricAndBounded) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(64);
    std::vector<double> b(64);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng);
    const double ab = cosine_similarity(a, b);
    EXPECT_EQ(ab, cosine_similarity(b, a));
    EXPECT_LE(std::abs(ab), 1.0);
    EXPECT_EQ(cosine_similarity(a, a), 1.0);
  }
}

TEST(StubEncoder, Shapes) {
  auto s = service();
  const TextEncoding e = s->embed_text("A photo of a Polar Bear sitting");
  EXPECT_EQ(e.pooled.dim(), 768u);
  EXPECT_EQ(e.pooled.modality, Modality::Text);
  EXPECT_EQ(e.sequence.length, 77u);
  EXPECT_EQ(e.sequence.dim, 768u);
  EXPECT_EQ(e.tokens.size(), 9u);
  EXPECT_EQ(e.tokens.front(), "<|startoftext|>");
  EXPECT_EQ(e.tokens.back(), "<|endoftext|>");
  std::size_t real = 0;
  for (auto m : e.sequence.attention_mask) real += m;
  EXPECT_EQ(real, 9u);
  EXPECT_FALSE(e.truncated);
  EXPECT_EQ(s->token_counter()("A photo of a Polar Bear sitting"), 7u);
}

TEST(StubEncoder, Deterministic) {
  EXPECT_EQ(service()->embed_text("Riley flies a kite").sequence, service()->embed_text("Riley flies a kite").sequence);
  HashTextImageEncoder other;
  EXPECT_EQ(other.encode_text("Riley flies a kite").pooled, service()->embed_text("Riley flies a kite").pooled);
}

TEST(StubEncoder, Truncates) {
  std::string long_text;
  for (int i = 0; i < 100; ++i) long_text += "word" + std::to_string(i) + " ";
  const auto e = service()->embed_text(long_text);
  EXPECT_TRUE(e.truncated);
  EXPECT_EQ(e.tokens.size(), 77u);
}

TEST(StubEncoder, ImageEmbedding) {
  Raster img(40, 30);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 7);
  const Embedding a = service()->embed_image(img);
  EXPECT_EQ(a.dim(), 768u);
  EXPECT_EQ(a.modality, Modality::Image);
  EXPECT_EQ(cosine_similarity(a, service()->embed_image(img)), 1.0);
  EXPECT_EQ(code_of([] { service()->embed_image(Raster()); }), ErrorCode::BadImage);
}

TEST(CultureMask, Build) {
  const CultureMask m = mask_with(0.2);
  EXPECT_EQ(m.source_text, "日本画");
  EXPECT_DOUBLE_EQ(m.multiplier, 0.2);
  EXPECT_EQ(m.sequence.dim, 768u);
  CultureProfile empty = CultureRegistry::defaults().get("uk");
  empty.mask_text = "  ";
  EXPECT_EQ(code_of([&] { service()->build_culture_mask(empty); }), ErrorCode::EmptyMaskText);
}

TEST(MaskAlgebra, ZeroMultiplierIsIdentity) {
  const auto prompt = service()->embed_text("indian childrens book style, Riley took kite to park.").sequence;
  for (MaskMode mode : {MaskMode::MeanOffset, MaskMode::PooledOffset, MaskMode::PerPosition}) {
    EXPECT_EQ(apply_mask(prompt, mask_with(0.0), mode), prompt) << to_string(mode);
  }
}

TEST(MaskAlgebra, MultipliersAdd) {
  const auto prompt = service()->embed_text("childrens book style, Grandma has big mango tree.").sequence;
  for (MaskMode mode : {MaskMode::MeanOffset, MaskMode::PooledOffset, MaskMode::PerPosition}) {
    const auto twice = apply_mask(apply_mask(prompt, mask_with(0.3), mode), mask_with(0.45), mode);
    const auto once = apply_mask(prompt, mask_with(0.75), mode);
    double worst = 0.0;
    for (std::size_t i = 0; i < once.rows.size(); ++i) worst = std::max(worst, std::abs(once.rows[i] - twice.rows[i]));
    EXPECT_LE(worst, 1e-6) << to_string(mode);
  }
}

TEST(MaskAlgebra, PaddingUntouched) {
  const auto prompt = service()->embed_text("Riley made kite.").sequence;
  const auto masked = apply_mask(prompt, mask_with(3.0));
  EXPECT_EQ(masked.attention_mask, prompt.attention_mask);
  for (std::size_t i = 0; i < prompt.length; ++i) {
    const bool same = std::equal(prompt.row(i).begin(), prompt.row(i).end(), masked.row(i).begin());
    EXPECT_EQ(same, prompt.attention_mask[i] == 0) << i;
  }
}

TEST(MaskAlgebra, MeanOffsetValue) {
  TokenSequenceEmbedding prompt(3, 2);
  prompt.rows = {1, 1, 2, 2, 9, 9};
  prompt.attention_mask = {1, 1, 0};
  CultureMask m;
  m.sequence = TokenSequenceEmbedding(3, 2);
  m.sequence.rows = {1, 0, 3, 2, 100, 100};
  m.sequence.attention_mask = {1, 1, 0};
  m.pooled.vector = {10, 20};
  m.multiplier = 0.5;
  EXPECT_EQ(apply_mask(prompt, m, MaskMode::MeanOffset).rows, (std::vector<double>{2, 1.5, 3, 2.5, 9, 9}));
  EXPECT_EQ(apply_mask(prompt, m, MaskMode::PooledOffset).rows, (std::vector<double>{6, 11, 7, 12, 9, 9}));
  EXPECT_EQ(apply_mask(prompt, m, MaskMode::PerPosition).rows, (std::vector<double>{1.5, 1, 3.5, 3, 9, 9}));
  m.sequence.dim = 3;
  EXPECT_EQ(code_of([&] { apply_mask(prompt, m); }), ErrorCode::DimensionMismatch);
}

TEST(MaskMode, Names) {
  for (MaskMode mode : {MaskMode::MeanOffset, MaskMode::PooledOffset, MaskMode::PerPosition}) {
    EXPECT_EQ(parse_mask_mode(to_string(mode)), mode);
  }
  EXPECT_THROW(parse_mask_mode("sideways"), Error);
}

TEST(LanguageStudy, Structure) {
  const std::map<std::string, std::vector<std::string>> lists = {
      {"en", {"water", "tree", "", "bird"}},
      {"hi", {"पानी", "पेड़", "घर", "चिड़िया"}},
      {"ja", {"水", "木", "家", "鳥"}},
  };
  const LanguageStudy s = language_similarity_study(*service(), lists);
  EXPECT_EQ(s.languages, (std::vector<std::string>{"en", "hi", "ja"}));
  EXPECT_EQ(s.words_per_language, 3u);
  EXPECT_EQ(s.pairs().size(), 3u);
  ASSERT_EQ(s.per_word.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(s.mean_vector[i][i], 1.0);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(s.mean_vector[i][j], s.mean_vector[j][i]);
      EXPECT_EQ(s.translated_pair[i][j], s.translated_pair[j][i]);
    }
  }
  double lo = 1;
  double hi = -1;
  for (auto [i, j] : s.pairs()) {
    lo = std::min(lo, s.mean_vector[i][j]);
    hi = std::max(hi, s.mean_vector[i][j]);
  }
  EXPECT_DOUBLE_EQ(s.mean_vector_spread(), hi - lo);
  const std::string csv = study_to_csv(s);
  EXPECT_NE(csv.find("label,en,hi,ja"), std::string::npos);
  EXPECT_NE(csv.find("# mean-vector spread,"), std::string::npos);
}

TEST(LanguageStudy, Errors) {
  EXPECT_EQ(code_of([] { language_similarity_study(*service(), {}); }), ErrorCode::EmptyInput);
  EXPECT_EQ(code_of([] { language_similarity_study(*service(), {{"en", {"a", "b"}}, {"hi", {"x"}}}); }),
            ErrorCode::InvalidParams);
  EXPECT_EQ(code_of([] { language_similarity_study(*service(), {{"en", {"", ""}}, {"hi", {"x", "y"}}}); }),
            ErrorCode::EmptyInput);
}

TEST(ConceptSimilarity, Matrix) {
  const auto m = concept_similarity(*service(), {"dog", "Hund", "dog"});
  ASSERT_EQ(m.values.size(), 3u);
  EXPECT_EQ(m.values[0][2], 1.0);
  EXPECT_EQ(m.values[0][1], m.values[1][0]);
  EXPECT_EQ(matrix_to_csv(m).substr(0, 18), "label,dog,Hund,dog");
}

TEST(WordList, KeepsAlignment) {
  TempDir d;
  std::ofstream(d / "w.txt") << "\xEF\xBB\xBFwater\n\n  tree \nbird\n\n";
  EXPECT_EQ(read_word_list(d / "w.txt"), (std::vector<std::string>{"water", "", "tree", "bird"}));
  std::ofstream(d / "bad.txt") << "\xFF\xFE";
  EXPECT_EQ(code_of([&] { read_word_list(d / "bad.txt"); }), ErrorCode::BadEncoding);
}

TEST(Heatmap, Rendering) {
  const Raster r = render_heatmap({{0.0, 1.0}, {1.0, 0.0}}, 0.0, 1.0, 4);
  EXPECT_EQ(r.width, 8);
  EXPECT_EQ(r.height, 8);
  EXPECT_EQ(r.pixel(0, 0)[0], 68);
  EXPECT_EQ(r.pixel(4, 0)[2], 37);
  EXPECT_EQ(code_of([] { render_heatmap({}, 0, 1); }), ErrorCode::EmptyInput);
}
