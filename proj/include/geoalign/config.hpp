#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoalign/culture.hpp"
#include "geoalign/embedding.hpp"
#include "geoalign/generation.hpp"

namespace geoalign {

inline constexpr std::string_view kToolVersion = "0.3.0";

struct AttentionWindows {
  double spatial_start = 0.0;
  double spatial_end = 1.0;
  double tokens_start = 0.0;
  double tokens_end = 1.0;
  friend bool operator==(const AttentionWindows&, const AttentionWindows&) = default;
};

enum class BackendKind { Stub, Real };
std::string_view to_string(BackendKind kind);
BackendKind parse_backend(std::string_view text);

struct PipelineConfig {
  BackendKind backend = BackendKind::Stub;
  std::string diffusion_model = "stable-diffusion v1.5";
  std::string clip_model = "clip-vit-large-patch14";
  std::string inception_model = "inception_v3";
  std::vector<std::string> bridge_command;  // empty: python3 + the bundled bridge script
  std::string device = "cpu";
  std::size_t stub_clip_dim = 768;

  CultureRegistry cultures = CultureRegistry::defaults();
  std::string cultures_source = "builtin";

  GenerationParams defaults;  // prompt unused
  std::size_t token_budget = 75;
  MaskMode mask_mode = MaskMode::MeanOffset;
  AttentionWindows method3;
  std::map<std::string, AttentionWindows> method3_per_culture;

  unsigned parallelism = 1;
  std::filesystem::path output_root = "out";

  // YAML (JSON is valid YAML). Relative paths resolve against base_dir.
  static PipelineConfig parse(std::string_view yaml, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& file);

  // Throws BadConfig or the underlying validation error.
  void validate() const;
  AttentionWindows windows_for(std::string_view culture) const;
  std::vector<std::string> resolved_bridge_command() const;
  // Canonical JSON snapshot stored in run manifests.
  std::string snapshot_json() const;
};

// --config, else $GEOALIGN_CONFIG, else built-in defaults; then environment
// overrides ($GEOALIGN_DIFFUSION_MODEL, $GEOALIGN_CLIP_MODEL,
// $GEOALIGN_INCEPTION_MODEL, $GEOALIGN_BRIDGE).
PipelineConfig resolve_config(const std::optional<std::filesystem::path>& path);

struct SeedSearchSummary {
  std::size_t n = 0;
  std::uint64_t base_seed = 0;
  std::uint64_t best_seed = 0;
  double best_similarity = 0.0;
};

struct PageEntry {
  int page_index = 0;
  bool ok = false;
  std::string error;
  std::string manifest;  // page manifest file name, relative to the run manifest
  std::optional<GenerationRecord> record;
  std::optional<SeedSearchSummary> seed_search;
};

struct RunManifest {
  std::string tool_version = std::string(kToolVersion);
  std::string config_snapshot;  // JSON text
  std::string book_id;
  std::string culture;
  Method method = Method::M1;
  std::vector<PageEntry> pages;
  std::string started_at;  // ISO-8601 UTC
  std::string finished_at;

  std::string to_json(bool include_timing = true) const;
};

std::string utc_timestamp();

}  // namespace geoalign
