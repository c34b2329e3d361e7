#include "geoalign/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <thread>

#include "geoalign/bridge.hpp"
#include "geoalign/error.hpp"
#include "geoalign/io.hpp"
#include "geoalign/log.hpp"
#include "geoalign/prompt.hpp"
#include "geoalign/stub_models.hpp"
#include "geoalign/text.hpp"
#include "json.hpp"

namespace geoalign {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// models

Models::Models(const PipelineConfig& config) : config_(config) {}
Models::~Models() = default;

std::shared_ptr<BridgeProcess> Models::bridge() {
  if (!bridge_) bridge_ = std::make_shared<BridgeProcess>(config_.resolved_bridge_command());
  return bridge_;
}

std::shared_ptr<EmbeddingService> Models::shared_embeddings() {
  if (!embeddings_) {
    std::shared_ptr<TextImageEncoder> encoder;
    if (config_.backend == BackendKind::Stub) {
      encoder = std::make_shared<HashTextImageEncoder>(config_.stub_clip_dim);
    } else {
      encoder = std::make_shared<BridgeTextImageEncoder>(bridge(), config_.clip_model);
    }
    embeddings_ = std::make_shared<EmbeddingService>(std::move(encoder));
  }
  return embeddings_;
}

EmbeddingService& Models::embeddings() { return *shared_embeddings(); }

Generator& Models::generator() {
  if (!generator_) {
    std::shared_ptr<DiffusionBackend> backend;
    if (config_.backend == BackendKind::Stub) {
      backend = std::make_shared<StubDiffusionBackend>(shared_embeddings());
    } else {
      backend = std::make_shared<BridgeDiffusionBackend>(bridge(), config_.diffusion_model);
    }
    generator_ = std::make_unique<Generator>(std::move(backend));
  }
  return *generator_;
}

FeatureExtractor& Models::features() {
  if (!features_) {
    if (config_.backend == BackendKind::Stub) {
      features_ = std::make_unique<StubInceptionExtractor>();
    } else {
      features_ = std::make_unique<BridgeFeatureExtractor>(bridge(), config_.inception_model);
    }
  }
  return *features_;
}

// ---------------------------------------------------------------------------
// planning

PagePlan plan_page(const Page& page, const CultureProfile& culture, Method method, const PipelineConfig& config,
                   const TokenCounter& counter) {
  const ProcessedPrompt processed = process_page_text(page.text, config.token_budget, counter);
  PagePlan plan;
  plan.method = method;
  switch (method) {
    case Method::M1:
      plan.prompt = build_method1_prompt(processed, culture, config.token_budget, counter);
      break;
    case Method::M2: {
      // The culture reaches the image through the mask only.
      CultureProfile neutral = culture;
      neutral.prompt_keyword.clear();
      plan.prompt = build_method1_prompt(processed, neutral, config.token_budget, counter);
      break;
    }
    case Method::M3: {
      plan.prompt = build_method1_prompt(processed, culture, config.token_budget, counter);
      try {
        const EditorialPrompt editorial = build_editorial_prompt(plan.prompt, culture);
        const AttentionWindows w = config.windows_for(culture.name);
        CrossAttentionParams ca;
        ca.editorial_prompt = editorial.editorial;
        ca.spatial_start = w.spatial_start;
        ca.spatial_end = w.spatial_end;
        ca.tokens_start = w.tokens_start;
        ca.tokens_end = w.tokens_end;
        plan.cross_attention = std::move(ca);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoNouns) throw;
        plan.method = Method::M1;
        plan.method3_fallback = true;
      }
      break;
    }
  }
  return plan;
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw Error(ErrorCode::BadConfig, "expected LABEL=VALUE, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

namespace {

std::string page_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "page_%02d", index);
  return buf;
}

std::string method_dir(Method m) {
  switch (m) {
    case Method::M1: return "m1";
    case Method::M2: return "m2";
    case Method::M3: return "m3";
  }
  return "m?";
}

std::string safe_name(std::string_view s) {
  std::string out;
  for (unsigned char c : s) out.push_back(std::isalnum(c) || c == '-' || c == '_' ? static_cast<char>(c) : '_');
  return out.empty() ? "_" : out;
}

}  // namespace

// ---------------------------------------------------------------------------
// translate

TranslateResult run_translate(const PipelineConfig& config, Models& models, const TranslateOptions& options) {
  const Book book = load_book(options.book_dir);
  const CultureProfile& culture = config.cultures.get(options.culture);
  validate_profile(culture, options.method == Method::M3);
  if (options.seed_search && *options.seed_search == 0) {
    throw Error(ErrorCode::InvalidParams, "--seed-search needs at least one candidate");
  }

  TranslateResult result;
  result.run_dir = options.out_root.value_or(config.output_root) / book.id / culture.name / method_dir(options.method);
  RunManifest& manifest = result.manifest;
  manifest.config_snapshot = config.snapshot_json();
  manifest.book_id = book.id;
  manifest.culture = culture.name;
  manifest.method = options.method;
  manifest.started_at = utc_timestamp();

  EmbeddingService& embeddings = models.embeddings();
  Generator& generator = models.generator();
  const TokenCounter counter = embeddings.token_counter();
  std::optional<CultureMask> mask;
  if (options.method == Method::M2) mask = embeddings.build_culture_mask(culture);

  GenerationParams base = config.defaults;
  if (options.seed) base.seed = *options.seed;

  manifest.pages.resize(book.pages.size());
  auto run_page = [&](std::size_t i) {
    const Page& page = book.pages[i];
    PageEntry& entry = manifest.pages[i];
    entry.page_index = page.index;
    try {
      const PagePlan plan = plan_page(page, culture, options.method, config, counter);
      GenerationParams params = base;
      params.prompt = plan.prompt;
      if (options.seed_search) {
        const Raster reference = read_png(page.image_path);
        const auto ranked = seed_search(generator, embeddings, params, reference, *options.seed_search, base.seed);
        entry.seed_search = SeedSearchSummary{*options.seed_search, base.seed, ranked.front().seed,
                                              ranked.front().similarity};
        params.seed = ranked.front().seed;
      }
      GenerationResult generated;
      if (plan.method == Method::M2) {
        const auto cond = apply_mask(embeddings.embed_text(params.prompt).sequence, *mask, config.mask_mode);
        generated = generator.from_embedding(
            cond, params,
            MaskDescriptor{culture.name, mask->source_text, mask->multiplier, std::string(to_string(config.mask_mode)),
                           embeddings.model_id()});
      } else if (plan.method == Method::M3) {
        generated = generator.prompt_to_prompt(params, *plan.cross_attention);
      } else {
        generated = generator.txt2img(params);
        generated.record.method3_fallback = plan.method3_fallback;
      }
      const std::string stem = page_stem(page.index);
      entry.manifest = stem + ".manifest.json";
      entry.record = save_result(generated, result.run_dir / (stem + ".png"), result.run_dir / entry.manifest);
      entry.ok = true;
    } catch (const std::exception& e) {
      entry.ok = false;
      entry.error = e.what();
      log_error(book.id + " page " + std::to_string(page.index) + ": " + e.what());
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(options.jobs.value_or(config.parallelism), static_cast<unsigned>(book.pages.size())));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < book.pages.size();) run_page(i);
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  manifest.finished_at = utc_timestamp();
  result.failed = static_cast<std::size_t>(
      std::count_if(manifest.pages.begin(), manifest.pages.end(), [](const PageEntry& e) { return !e.ok; }));
  write_file_atomic(result.run_dir / "run.manifest.json", manifest.to_json());
  return result;
}

// ---------------------------------------------------------------------------
// commands

int cmd_validate(const ValidateOptions& options, std::ostream& out, std::ostream& err) {
  Book book;
  try {
    book = load_book(options.book_dir);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  const auto findings = lint_book(book, options.token_budget);
  if (options.json) {
    json j = {{"book_id", book.id}, {"pages", book.pages.size()}, {"findings", json::array()}};
    for (const auto& f : findings) {
      j["findings"].push_back({{"page_index", f.page_index},
                               {"code", std::string(to_string(f.code))},
                               {"span", {f.span.begin, f.span.end}},
                               {"message", f.message}});
    }
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << book.id << " (" << book.title << "), " << book.pages.size() << " pages, origin " << book.origin_culture
      << "\n";
  for (const auto& f : findings) {
    const Page& page = *std::find_if(book.pages.begin(), book.pages.end(),
                                     [&](const Page& p) { return p.index == f.page_index; });
    char head[48];
    std::snprintf(head, sizeof head, "page %02d  %-18s", f.page_index, std::string(to_string(f.code)).c_str());
    out << head << " \"" << page.text.substr(f.span.begin, f.span.size()) << "\"  " << f.message << "\n";
  }
  out << findings.size() << " finding(s)\n";
  return kExitOk;
}

int cmd_translate(const PipelineConfig& config, Models& models, const TranslateOptions& options, std::ostream& out,
                  std::ostream& err) {
  TranslateResult result;
  try {
    result = run_translate(config, models, options);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (e.code() == ErrorCode::UnknownCulture) {
      err << "available cultures:";
      for (const auto& n : config.cultures.names()) err << " " << n;
      err << "\n";
    }
    return kExitUsage;
  }
  const std::size_t total = result.manifest.pages.size();
  out << "wrote " << (total - result.failed) << "/" << total << " pages to " << result.run_dir.string() << "\n";
  for (const auto& p : result.manifest.pages) {
    if (!p.ok) err << "page " << p.page_index << " failed: " << p.error << "\n";
    if (p.record && p.record->method3_fallback) {
      out << "page " << p.page_index << ": no noun to edit, used method 1\n";
    }
  }
  return result.failed == 0 ? kExitOk : kExitPartial;
}

int cmd_seed_search(const PipelineConfig& config, Models& models, const SeedSearchOptions& options,
                    std::ostream& out, std::ostream& err) {
  try {
    if (options.n == 0) throw Error(ErrorCode::InvalidParams, "-n must be at least 1");
    const Raster reference = read_png(options.reference);
    GenerationParams params = config.defaults;
    params.prompt = options.prompt;
    const auto ranked = seed_search(models.generator(), models.embeddings(), params, reference, options.n,
                                    options.base_seed.value_or(config.defaults.seed));
    std::string csv = "rank,seed,similarity\n";
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      char line[96];
      std::snprintf(line, sizeof line, "%zu,%llu,%.6f\n", i + 1, static_cast<unsigned long long>(ranked[i].seed),
                    ranked[i].similarity);
      csv += line;
    }
    out << csv;
    if (options.out_csv) write_file_atomic(*options.out_csv, csv);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_evaluate(Models& models, const EvaluateOptions& options, std::ostream& out, std::ostream& err) {
  if (!options.original_dir && !options.survey_csv) {
    err << "error: nothing to evaluate; give --original with --method LABEL=DIR, and/or --survey\n";
    return kExitUsage;
  }
  if (options.original_dir && options.method_dirs.empty()) {
    err << "error: --original needs at least one --method LABEL=DIR\n";
    return kExitUsage;
  }
  try {
    if (options.original_dir) {
      const FidReport report = fid_report(*options.original_dir, options.method_dirs, models.features());
      write_file_atomic(options.out_dir / "fid_report.md", report.to_markdown());
      write_file_atomic(options.out_dir / "fid_report.csv", report.to_csv());
      out << report.to_markdown() << "\n";
    }
    if (options.survey_csv) {
      const auto responses = read_survey_csv(*options.survey_csv);
      const SurveyReport report = likert_aggregate(responses);
      write_file_atomic(options.out_dir / "survey_report.md", report.to_markdown());
      write_file_atomic(options.out_dir / "survey_report.csv", report.to_csv());
      out << report.to_markdown();
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

namespace {

std::pair<double, double> value_range(const std::vector<std::vector<double>>& m) {
  double lo = 1.0;
  double hi = -1.0;
  for (const auto& row : m) {
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return {lo, hi};
}

}  // namespace

int cmd_experiment_cross_language(Models& models, const CrossLanguageOptions& options, std::ostream& out,
                                  std::ostream& err) {
  if (options.word_lists.empty()) {
    err << "error: give at least one --words LANGUAGE=FILE\n";
    return kExitUsage;
  }
  try {
    std::map<std::string, std::vector<std::string>> lists;
    for (const auto& [lang, file] : options.word_lists) {
      auto words = read_word_list(file);
      if (words.empty()) {
        err << "error: word list for " << lang << " is empty: " << file.string() << "\n";
        return kExitUsage;
      }
      if (!lists.emplace(lang, std::move(words)).second) {
        err << "error: language " << lang << " given twice\n";
        return kExitUsage;
      }
    }
    const LanguageStudy study = language_similarity_study(models.embeddings(), lists);
    write_file_atomic(options.out_dir / "cross_language.csv", study_to_csv(study));
    const auto [lo, hi] = value_range(study.mean_vector);
    write_png(options.out_dir / "cross_language_mean_vectors.png", render_heatmap(study.mean_vector, lo, hi));
    const auto [plo, phi] = value_range(study.translated_pair);
    write_png(options.out_dir / "cross_language_pairs.png", render_heatmap(study.translated_pair, plo, phi));
    out << study_to_csv(study);
    char line[96];
    std::snprintf(line, sizeof line, "mean-vector similarities span %.6f across %zu words per language\n",
                  study.mean_vector_spread(), study.words_per_language);
    out << line;
    if (!options.concepts.empty()) {
      const SimilarityMatrix m = concept_similarity(models.embeddings(), options.concepts);
      write_file_atomic(options.out_dir / "concepts.csv", matrix_to_csv(m));
      const auto [clo, chi] = value_range(m.values);
      write_png(options.out_dir / "concepts.png", render_heatmap(m.values, clo, chi));
      out << matrix_to_csv(m);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_experiment_multilingual(const PipelineConfig& config, Models& models, const MultilingualOptions& options,
                                std::ostream& out, std::ostream& err) {
  try {
    auto prompts = options.prompts;
    if (options.prompts_file) {
      const std::string text = read_text(*options.prompts_file);
      std::size_t start = 0;
      while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string line = trim(std::string_view(text).substr(start, end - start));
        start = end + 1;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error(ErrorCode::BadConfig, "prompt line without a tab: " + line);
        prompts.emplace_back(trim(line.substr(0, tab)), trim(line.substr(tab + 1)));
      }
    }
    if (prompts.empty()) {
      err << "error: give --prompt LANGUAGE=TEXT or --prompts-file\n";
      return kExitUsage;
    }
    GenerationParams params = config.defaults;
    if (options.seed) params.seed = *options.seed;
    std::vector<Raster> images;
    json manifest = {{"seed", params.seed}, {"images", json::array()}};
    for (const auto& [lang, text] : prompts) {
      params.prompt = text;
      const GenerationResult r = models.generator().txt2img(params);
      const std::string stem = "multilingual_" + safe_name(lang);
      save_result(r, options.out_dir / (stem + ".png"), options.out_dir / (stem + ".manifest.json"));
      manifest["images"].push_back({{"language", lang}, {"prompt", text}, {"file", stem + ".png"},
                                    {"sha256", r.record.image_hash}});
      images.push_back(r.image);
      out << lang << ": " << stem << ".png\n";
    }
    write_png(options.out_dir / "multilingual_grid.png", tile_grid(images, std::max(1, options.columns)));
    write_file_atomic(options.out_dir / "multilingual.json", manifest.dump(2) + "\n");
    out << "grid: " << (options.out_dir / "multilingual_grid.png").string() << "\n";
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace geoalign
