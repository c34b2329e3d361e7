#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "geoalign/config.hpp"
#include "geoalign/corpus.hpp"
#include "geoalign/evaluation.hpp"
#include "geoalign/generation.hpp"

namespace geoalign {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitUsage = 2;

class BridgeProcess;

// Model stack for a configuration; members are created on first use.
class Models {
 public:
  explicit Models(const PipelineConfig& config);
  ~Models();

  EmbeddingService& embeddings();
  std::shared_ptr<EmbeddingService> shared_embeddings();
  Generator& generator();
  FeatureExtractor& features();

 private:
  std::shared_ptr<BridgeProcess> bridge();

  const PipelineConfig& config_;
  std::shared_ptr<BridgeProcess> bridge_;
  std::shared_ptr<EmbeddingService> embeddings_;
  std::unique_ptr<Generator> generator_;
  std::unique_ptr<FeatureExtractor> features_;
};

// Builds the prompt for one page and method; method3_fallback is set when a
// Method 3 page has no noun to edit and Method 1 is used instead.
struct PagePlan {
  Method method = Method::M1;
  std::string prompt;  // Method 1 prompt; Method 2 unmasked prompt; Method 3 initial prompt
  std::optional<CrossAttentionParams> cross_attention;
  bool method3_fallback = false;
};

PagePlan plan_page(const Page& page, const CultureProfile& culture, Method method, const PipelineConfig& config,
                   const TokenCounter& counter);

struct ValidateOptions {
  std::filesystem::path book_dir;
  std::size_t token_budget = kDefaultTokenBudget;
  bool json = false;
};

struct TranslateOptions {
  std::filesystem::path book_dir;
  std::string culture;
  Method method = Method::M1;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> seed_search;  // candidates per page, from the configured seed upward
  std::optional<std::filesystem::path> out_root;
  std::optional<unsigned> jobs;
};

struct TranslateResult {
  RunManifest manifest;
  std::filesystem::path run_dir;
  std::size_t failed = 0;
};

// Generates one image + manifest per page; page errors are recorded and the
// run continues. Throws for book, culture or configuration errors.
TranslateResult run_translate(const PipelineConfig& config, Models& models, const TranslateOptions& options);

struct SeedSearchOptions {
  std::string prompt;
  std::filesystem::path reference;
  std::size_t n = 10;
  std::optional<std::uint64_t> base_seed;
  std::optional<std::filesystem::path> out_csv;
};

struct EvaluateOptions {
  std::optional<std::filesystem::path> original_dir;
  std::vector<std::pair<std::string, std::filesystem::path>> method_dirs;
  std::optional<std::filesystem::path> survey_csv;
  std::filesystem::path out_dir = "reports";
};

struct CrossLanguageOptions {
  std::vector<std::pair<std::string, std::filesystem::path>> word_lists;
  std::vector<std::string> concepts;
  std::filesystem::path out_dir = "reports";
};

struct MultilingualOptions {
  std::vector<std::pair<std::string, std::string>> prompts;  // language, prompt
  std::optional<std::filesystem::path> prompts_file;          // "language<TAB>prompt" lines
  std::optional<std::uint64_t> seed;
  int columns = 3;
  std::filesystem::path out_dir = "reports";
};

int cmd_validate(const ValidateOptions& options, std::ostream& out, std::ostream& err);
int cmd_translate(const PipelineConfig& config, Models& models, const TranslateOptions& options, std::ostream& out,
                  std::ostream& err);
int cmd_seed_search(const PipelineConfig& config, Models& models, const SeedSearchOptions& options,
                    std::ostream& out, std::ostream& err);
int cmd_evaluate(Models& models, const EvaluateOptions& options, std::ostream& out, std::ostream& err);
int cmd_experiment_cross_language(Models& models, const CrossLanguageOptions& options, std::ostream& out,
                                  std::ostream& err);
int cmd_experiment_multilingual(const PipelineConfig& config, Models& models, const MultilingualOptions& options,
                                std::ostream& out, std::ostream& err);

// "label=path" as used by --method and --words.
std::pair<std::string, std::string> split_assignment(const std::string& text);

}  // namespace geoalign
