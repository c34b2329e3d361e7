#include "geoalign/cli.hpp"

#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "geoalign/error.hpp"
#include "geoalign/log.hpp"
#include "geoalign/pipeline.hpp"

namespace geoalign {

namespace fs = std::filesystem;

namespace {

std::vector<std::pair<std::string, fs::path>> path_assignments(const std::vector<std::string>& items) {
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& item : items) {
    auto [label, path] = split_assignment(item);
    out.emplace_back(std::move(label), fs::path(path));
  }
  return out;
}

LogLevel parse_log_level(const std::string& s) {
  if (s == "debug") return LogLevel::Debug;
  if (s == "info") return LogLevel::Info;
  if (s == "warn") return LogLevel::Warn;
  if (s == "error") return LogLevel::Error;
  return LogLevel::Off;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adapt picture-book illustrations to a target culture"};
  app.name("geoalign");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::optional<std::string> config_path;
  std::optional<std::string> backend;
  std::optional<std::string> log_level;
  app.add_option("--config", config_path, "YAML configuration file (default: $GEOALIGN_CONFIG)");
  app.add_option("--backend", backend, "Model backend")->check(CLI::IsMember({"stub", "real"}));
  app.add_option("--log-level", log_level, "Log threshold")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  // validate
  auto* validate = app.add_subcommand("validate", "Lint a book folder for prompt suitability");
  ValidateOptions vopt;
  std::optional<std::size_t> token_budget;
  validate->add_option("book_dir", vopt.book_dir, "Book folder")->required();
  validate->add_option("--token-budget", token_budget, "Token budget for the length lint")
      ->check(CLI::PositiveNumber);
  validate->add_flag("--json", vopt.json, "Print findings as JSON");

  // translate
  auto* translate = app.add_subcommand("translate", "Generate culturally adapted illustrations for a book");
  TranslateOptions topt;
  std::string method_text = "1";
  std::optional<std::string> out_root;
  translate->add_option("book_dir", topt.book_dir, "Book folder")->required();
  translate->add_option("--culture", topt.culture, "Target culture profile")->required();
  translate->add_option("--method", method_text, "1: keyword prompt, 2: embedding mask, 3: cross-attention edit")
      ->check(CLI::IsMember({"1", "2", "3", "M1", "M2", "M3", "m1", "m2", "m3"}));
  auto* seed_opt = translate->add_option("--seed", topt.seed, "Seed for every page (default from config)");
  translate->add_option("--seed-search", topt.seed_search, "Pick the best of N seeds per page against the original")
      ->check(CLI::PositiveNumber)
      ->excludes(seed_opt);
  translate->add_option("--out", out_root, "Output root (default from config)");
  translate->add_option("--jobs", topt.jobs, "Page workers (default: config parallelism)")->check(CLI::PositiveNumber);

  // seed-search
  auto* search = app.add_subcommand("seed-search", "Rank seeds by similarity of their image to a reference");
  SeedSearchOptions sopt;
  std::optional<std::string> search_csv;
  search->add_option("--prompt", sopt.prompt, "Prompt, used verbatim")->required();
  search->add_option("--reference", sopt.reference, "Reference PNG")->required();
  search->add_option("-n", sopt.n, "Number of seeds")->check(CLI::PositiveNumber);
  search->add_option("--base-seed", sopt.base_seed, "First seed (default: config seed)");
  search->add_option("--out", search_csv, "Also write the ranking as CSV");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "FID and questionnaire reports");
  EvaluateOptions eopt;
  std::optional<std::string> original;
  std::optional<std::string> survey;
  std::vector<std::string> method_dirs;
  std::string eval_out = "reports";
  evaluate->add_option("--original", original, "Folder with the original illustrations");
  evaluate->add_option("--method", method_dirs, "LABEL=DIR of generated images (repeatable)");
  evaluate->add_option("--survey", survey, "Questionnaire CSV");
  evaluate->add_option("--out", eval_out, "Report folder");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Embedding and generation experiments");
  experiment->require_subcommand(1);
  auto* cross = experiment->add_subcommand("cross-language", "Similarity of translated word lists");
  CrossLanguageOptions copt;
  std::vector<std::string> word_lists;
  std::string cross_out = "reports";
  cross->add_option("--words", word_lists, "LANGUAGE=FILE, one word per line (repeatable)")->required();
  cross->add_option("--concept", copt.concepts, "Concept label for the concept matrix (repeatable)");
  cross->add_option("--out", cross_out, "Report folder");

  auto* multi = experiment->add_subcommand("multilingual", "One image per prompt translation at a fixed seed");
  MultilingualOptions mopt;
  std::vector<std::string> prompts;
  std::optional<std::string> prompts_file;
  std::string multi_out = "reports";
  multi->add_option("--prompt", prompts, "LANGUAGE=PROMPT (repeatable)");
  multi->add_option("--prompts-file", prompts_file, "File of LANGUAGE<TAB>PROMPT lines");
  multi->add_option("--seed", mopt.seed, "Seed (default: config seed)");
  multi->add_option("--columns", mopt.columns, "Grid columns")->check(CLI::PositiveNumber);
  multi->add_option("--out", multi_out, "Output folder");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (log_level) set_log_level(parse_log_level(*log_level));

  try {
    PipelineConfig config = resolve_config(config_path ? std::optional<fs::path>(*config_path) : std::nullopt);
    if (backend) config.backend = parse_backend(*backend);
    config.validate();

    if (validate->parsed()) {
      vopt.token_budget = token_budget.value_or(config.token_budget);
      return cmd_validate(vopt, out, err);
    }
    Models models(config);

    if (translate->parsed()) {
      topt.method = parse_method(method_text);
      if (out_root) topt.out_root = fs::path(*out_root);
      return cmd_translate(config, models, topt, out, err);
    }
    if (search->parsed()) {
      if (search_csv) sopt.out_csv = fs::path(*search_csv);
      return cmd_seed_search(config, models, sopt, out, err);
    }
    if (evaluate->parsed()) {
      if (original) eopt.original_dir = fs::path(*original);
      if (survey) eopt.survey_csv = fs::path(*survey);
      eopt.method_dirs = path_assignments(method_dirs);
      eopt.out_dir = eval_out;
      return cmd_evaluate(models, eopt, out, err);
    }
    if (cross->parsed()) {
      copt.word_lists = path_assignments(word_lists);
      copt.out_dir = cross_out;
      return cmd_experiment_cross_language(models, copt, out, err);
    }
    if (multi->parsed()) {
      for (const auto& p : prompts) mopt.prompts.push_back(split_assignment(p));
      if (prompts_file) mopt.prompts_file = fs::path(*prompts_file);
      mopt.out_dir = multi_out;
      return cmd_experiment_multilingual(config, models, mopt, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace geoalign
