// Acceptance run: one PASS/FAIL/SKIP line per criterion.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "frechet_sets.hpp"
#include "geoalign/config.hpp"
#include "geoalign/corpus.hpp"
#include "geoalign/culture.hpp"
#include "geoalign/embedding.hpp"
#include "geoalign/error.hpp"
#include "geoalign/evaluation.hpp"
#include "geoalign/generation.hpp"
#include "geoalign/io.hpp"
#include "geoalign/pipeline.hpp"
#include "geoalign/prompt.hpp"
#include "geoalign/stub_models.hpp"
#include "geoalign/text.hpp"
#include "reference_tables.hpp"
#include "test_util.hpp"

using namespace geoalign;
namespace fs = std::filesystem;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Check {
  Outcome outcome = Outcome::Pass;
  std::string detail;
};

// Collects mismatches; an empty list passes.
class Expect {
 public:
  void that(bool ok, const std::string& what) {
    if (!ok) problems_.push_back(what);
  }
  template <class A, class B>
  void equal(const A& got, const B& want, const std::string& what) {
    if (!(got == want)) {
      std::ostringstream s;
      s << what << ": got [" << got << "] want [" << want << "]";
      problems_.push_back(s.str());
    }
  }
  Check result(std::string ok_detail) const {
    if (problems_.empty()) return {Outcome::Pass, std::move(ok_detail)};
    std::string all;
    for (const auto& p : problems_) all += (all.empty() ? "" : "; ") + p;
    return {Outcome::Fail, all};
  }

 private:
  std::vector<std::string> problems_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const CultureRegistry& cultures() {
  static const CultureRegistry r = CultureRegistry::defaults();
  return r;
}

std::string page_text(const std::string& book, int index) {
  for (const auto& p : load_book(testutil::fixture(book)).pages) {
    if (p.index == index) return p.text;
  }
  throw Error(ErrorCode::InvalidPage, book + " has no page " + std::to_string(index));
}

std::string method1(const std::string& text, const std::string& culture) {
  return build_method1_prompt(process_page_text(text), cultures().get(culture));
}

// Reference prompts differ in prefix spelling and casing and may drop the final period.
std::string printed_form(std::string prompt) {
  const std::size_t body = prompt_body_offset(prompt);
  std::string prefix;
  for (char c : to_lower_ascii(prompt.substr(0, body))) {
    if (c != '\'') prefix.push_back(c);
  }
  const auto pos = prefix.find("children book");
  if (pos != std::string::npos) prefix.replace(pos, 13, "childrens book");
  std::string rest = prompt.substr(body);
  if (!rest.empty() && rest.back() == '.') rest.pop_back();
  return prefix + rest;
}

std::shared_ptr<EmbeddingService> stub_embeddings() {
  static auto s = std::make_shared<EmbeddingService>(std::make_shared<HashTextImageEncoder>());
  return s;
}

Generator& stub_generator() {
  static Generator g(std::make_shared<StubDiffusionBackend>(stub_embeddings()));
  return g;
}

Check criterion1() {
  Expect e;
  const auto t0 = std::chrono::steady_clock::now();
  e.equal(printed_form(method1(page_text("not_you", 2), "japanese")),
          printed_form("japanese children book style, So he left home right away, carrying fishing pole on his "
                       "shoulder."),
          "not_you p2");
  const std::string riley6 = method1(page_text("riley", 6), "japanese");
  const std::string tail = "Riley, his dad took kite to park.";
  e.that(riley6.size() >= tail.size() && riley6.compare(riley6.size() - tail.size(), tail.size(), tail) == 0,
         "riley p6: " + riley6);
  e.equal(printed_form(method1(page_text("riley", 9), "indian")),
          printed_form("Indian childrens book style, He needed place without trees, he needed breeze."), "riley p9");
  e.equal(printed_form(method1(page_text("mango_tree", 2), "indian")),
          printed_form("Indian children's book style, Grandma has big mango tree in her garden. Many birds come there"),
          "mango_tree p2");
  const double dt = seconds_since(t0);
  e.that(dt < 1.0, "runtime " + std::to_string(dt) + " s");
  return e.result("4 prompts in " + std::to_string(dt) + " s");
}

Check criterion2() {
  Expect e;
  e.equal(build_editorial_prompt("childrens book style, I can see birds.", cultures().get("uk")).editorial,
          "childrens book style, I can see English birds.", "uk");
  e.equal(build_editorial_prompt("middle eastern childrens book style, The wind did not blow.",
                                 cultures().get("middle_eastern"))
              .editorial,
          "middle eastern childrens book style, The middle eastern wind did not blow.", "middle eastern");
  e.equal(build_editorial_prompt("indian childrens book style, He added red bows.", cultures().get("indian")).editorial,
          "indian childrens book style, He added red Indian bows.", "indian");

  const std::vector<std::string> subjects = {"Riley", "Grandma", "He", "The boy", "Her mother", "Hachigoro", "She"};
  const std::vector<std::string> verbs = {"took", "painted", "found", "carried", "saw", "dropped", "climbed"};
  const std::vector<std::string> objects = {"the kite", "a mango tree", "red bows", "the birds", "a fishing pole",
                                            "the gold coins", "a paper boat", "the old bridge"};
  const std::vector<std::string> tails = {"to the park", "in the garden", "", "near the river", "into the sea"};
  std::mt19937 rng(424242);
  auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
  const auto names = cultures().names();
  int round_trips = 0;
  for (int i = 0; i < 100; ++i) {
    std::string s = pick(subjects) + " " + pick(verbs) + " " + pick(objects);
    const std::string t = pick(tails);
    if (!t.empty()) s += " " + t;
    s += ".";
    const CultureProfile& c = cultures().get(names[rng() % names.size()]);
    const std::string initial = build_method1_prompt(process_page_text(s), c);
    const EditorialPrompt ed = build_editorial_prompt(initial, c);
    if (strip_insertions(ed) == collapse_whitespace(initial)) ++round_trips;
    else e.that(false, "round trip: " + s);
  }
  return e.result("3 editorial prompts, " + std::to_string(round_trips) + "/100 round trips");
}

Check criterion3() {
  Expect e;
  const auto t0 = std::chrono::steady_clock::now();
  const FeatureSet g1 = frechet_sets::gaussian(false, 10000, 1);
  const FeatureSet g2 = frechet_sets::gaussian(true, 10000, 2);
  e.that(frechet_distance(g1, g1) <= 1e-6, "identical sets");
  const double c = frechet_distance(make_feature_set({{0.0}, {0.0}, {0.0}}), make_feature_set({{1.0}, {1.0}}));
  e.that(std::abs(c - 1.0) <= 1e-9, "constant sets gave " + std::to_string(c));
  const double g = frechet_distance(g1, g2);
  const double rel = std::abs(g - frechet_sets::kGaussianPairDistance) / frechet_sets::kGaussianPairDistance;
  e.that(rel <= 0.01, "gaussian relative error " + std::to_string(rel));
  e.that(std::abs(g - frechet_distance(g2, g1)) <= 1e-9, "symmetry (gaussian)");

  // Inception-sized sets, as in a 160 vs 35 image comparison.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  FeatureSet a(160, 2048);
  FeatureSet b(35, 2048);
  for (auto& v : a.features) v = std::max(0.0, n(rng));
  for (auto& v : b.features) v = std::max(0.0, n(rng) + 0.1);
  const double ab = frechet_distance(a, b);
  e.that(std::abs(ab - frechet_distance(b, a)) <= 1e-9 * std::max(1.0, ab), "symmetry (2048-d)");
  const double dt = seconds_since(t0);
  e.that(dt < 30.0, "runtime " + std::to_string(dt) + " s");
  std::ostringstream s;
  s.precision(6);
  s << "gaussian FID " << g << " vs " << frechet_sets::kGaussianPairDistance << ", " << dt << " s";
  return e.result(s.str());
}

Check criterion4() {
  Expect e;
  auto check = [&](const std::string& book, const std::vector<std::array<double, 4>>& table,
                   const std::array<double, 4>& want) {
    const auto report = likert_aggregate(reference::as_responses(book, table));
    const auto& avg = report.book(book).column_average;
    for (int k = 0; k < 4; ++k) {
      e.that(avg[k] && std::abs(*avg[k] - want[k]) <= 0.001,
             book + " column " + std::to_string(k) + " = " + (avg[k] ? format3(*avg[k]) : std::string("-")));
    }
  };
  check("riley", reference::kRileyJapanese, reference::kRileyJapaneseAverage);
  check("not_you", reference::kNotYouJapanese, reference::kNotYouJapaneseAverage);
  return e.result("both tables within 0.001");
}

Check criterion5() {
  Expect e;
  GenerationParams p;
  p.prompt = "childrens book style, He needed place without trees, he needed breeze.";
  CrossAttentionParams bad;
  bad.editorial_prompt = p.prompt;
  bad.spatial_start = 0.5;
  bad.spatial_end = 0.5;
  try {
    stub_generator().prompt_to_prompt(p, bad);
    e.that(false, "equal window bounds accepted");
  } catch (const Error& err) {
    e.that(err.code() == ErrorCode::InvalidWindow, std::string("error code ") + err.what());
  }
  CrossAttentionParams identity;
  identity.editorial_prompt = p.prompt;
  const auto edit = stub_generator().prompt_to_prompt(p, identity);
  const auto plain = stub_generator().txt2img(p);
  e.that(edit.png == plain.png, "identity edit differs from plain generation");
  return e.result("window rejected, identity edit bitwise equal at 512x512/50 steps");
}

Check criterion6() {
  Expect e;
  std::mt19937 rng(77);
  const std::vector<std::string> words = {"kite", "park", "Riley", "mango", "tree", "birds", "sea", "boat",
                                          "coins", "wind", "red", "bows", "garden", "Grandma", "fishing"};
  for (int i = 0; i < 100; ++i) {
    GenerationParams p;
    const int n = 3 + static_cast<int>(rng() % 6);
    for (int k = 0; k < n; ++k) p.prompt += (k ? " " : "") + words[rng() % words.size()];
    p.seed = rng();
    p.width = p.height = 64;
    p.steps = 10;
    const auto a = stub_generator().txt2img(p);
    const auto b = stub_generator().txt2img(p);
    if (a.png != b.png) e.that(false, "pair " + std::to_string(i));
  }

  testutil::TempDir d;
  PipelineConfig config = PipelineConfig::parse("defaults: {size: 64, steps: 10}\nparallelism: 3\n");
  std::string manifests[2];
  for (int run = 0; run < 2; ++run) {
    Models models(config);
    TranslateOptions o;
    o.book_dir = testutil::fixture("riley");
    o.culture = "japanese";
    o.method = Method::M3;
    o.out_root = d / ("run" + std::to_string(run));
    const auto result = run_translate(config, models, o);
    manifests[run] = result.manifest.to_json(false);
    for (const auto& page : result.manifest.pages) {
      manifests[run] += record_to_json(record_from_json(read_text(result.run_dir / page.manifest)), false);
    }
    e.equal(result.failed, 0u, "failed pages");
  }
  e.that(manifests[0] == manifests[1], "manifests differ");
  return e.result("100 pairs identical, manifests identical without timing fields");
}

Check criterion7() {
  Expect e;
  GenerationParams p;
  p.prompt = "japanese childrens book style, Riley, his dad took kite to park.";
  GenerationParams ref = p;
  ref.seed = 7;
  const Raster reference = stub_generator().txt2img(ref).image;
  const auto scores = seed_search(stub_generator(), *stub_embeddings(), p, reference, 10, 0);
  e.equal(scores.size(), 10u, "count");
  if (!scores.empty()) {
    e.equal(scores[0].seed, 7u, "best seed");
    e.equal(scores[0].similarity, 1.0, "best similarity");
  }
  for (std::size_t i = 1; i < scores.size(); ++i) {
    e.that(scores[i - 1].similarity >= scores[i].similarity, "order at " + std::to_string(i));
  }
  return e.result("seed 7 first with similarity 1.0");
}

Check criterion8() {
  Expect e;
  auto mask = [](double k) {
    CultureProfile p = cultures().get("indian");
    p.mask_multiplier = k;
    return stub_embeddings()->build_culture_mask(p);
  };
  const auto prompt = stub_embeddings()->embed_text("indian childrens book style, Grandma has big mango tree.").sequence;
  for (MaskMode mode : {MaskMode::MeanOffset, MaskMode::PooledOffset, MaskMode::PerPosition}) {
    const std::string name(to_string(mode));
    e.that(apply_mask(prompt, mask(0.0), mode) == prompt, name + " zero multiplier");
    const auto twice = apply_mask(apply_mask(prompt, mask(0.7), mode), mask(1.6), mode);
    const auto once = apply_mask(prompt, mask(2.3), mode);
    double worst = 0.0;
    for (std::size_t i = 0; i < once.rows.size(); ++i) worst = std::max(worst, std::abs(once.rows[i] - twice.rows[i]));
    e.that(worst <= 1e-6, name + " additivity " + std::to_string(worst));
  }
  GenerationParams p;
  p.prompt = "indian childrens book style, Grandma has big mango tree.";
  const auto via_embedding = stub_generator().from_embedding(prompt, p);
  e.that(via_embedding.png == stub_generator().txt2img(p).png, "unmasked embedding path differs");
  return e.result("identity, additivity and pathway equality hold");
}

Check criterion9() {
  if (const char* v = std::getenv("GEOALIGN_ACCEPT_REAL"); !v || std::string(v) != "1") {
    return {Outcome::Skip, "needs the real CLIP model; set GEOALIGN_ACCEPT_REAL=1"};
  }
  try {
    PipelineConfig config = resolve_config(std::nullopt);
    config.backend = BackendKind::Real;
    Models models(config);
    std::map<std::string, std::vector<std::string>> lists;
    for (const char* lang : {"en", "hi", "ja"}) {
      lists[lang] = read_word_list(fs::path(GEOALIGN_EXPERIMENTS) / (std::string("words_") + lang + ".txt"));
    }
    const LanguageStudy s = language_similarity_study(models.embeddings(), lists);
    const double spread = s.mean_vector_spread();
    Expect e;
    e.that(spread <= 0.01, "mean-vector spread " + std::to_string(spread));
    return e.result("mean-vector spread " + std::to_string(spread));
  } catch (const Error& err) {
    if (err.code() == ErrorCode::ModelUnavailable) return {Outcome::Skip, err.what()};
    return {Outcome::Fail, err.what()};
  }
}

}  // namespace

int main() {
  const std::vector<std::function<Check()>> criteria = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                        criterion6, criterion7, criterion8, criterion9};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i]();
    } catch (const std::exception& ex) {
      c = {Outcome::Fail, std::string("exception: ") + ex.what()};
    }
    const char* word = c.outcome == Outcome::Pass ? "PASS" : c.outcome == Outcome::Skip ? "SKIP" : "FAIL";
    if (c.outcome == Outcome::Fail) ++failed;
    std::cout << "criterion " << (i + 1) << ": " << word << "  " << c.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
