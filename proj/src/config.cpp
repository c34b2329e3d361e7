#include "geoalign/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <sstream>

#include "geoalign/error.hpp"
#include "geoalign/io.hpp"
#include "json.hpp"

#ifndef GEOALIGN_BRIDGE_SCRIPT
#define GEOALIGN_BRIDGE_SCRIPT "geoalign_bridge.py"
#endif

namespace geoalign {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(BackendKind kind) { return kind == BackendKind::Stub ? "stub" : "real"; }

BackendKind parse_backend(std::string_view text) {
  if (text == "stub") return BackendKind::Stub;
  if (text == "real") return BackendKind::Real;
  throw Error(ErrorCode::BadConfig, "unknown backend '" + std::string(text) + "' (expected stub or real)");
}

namespace {

// Present keys must convert; as<T>(fallback) would silently keep the fallback.
template <class T>
T value_or(const YAML::Node& parent, const char* key, T fallback) {
  const YAML::Node n = parent[key];
  return n ? n.as<T>() : fallback;
}

AttentionWindows read_windows(const YAML::Node& node, AttentionWindows w) {
  if (!node) return w;
  w.spatial_start = value_or<double>(node, "spatial_start", w.spatial_start);
  w.spatial_end = value_or<double>(node, "spatial_end", w.spatial_end);
  w.tokens_start = value_or<double>(node, "tokens_start", w.tokens_start);
  w.tokens_end = value_or<double>(node, "tokens_end", w.tokens_end);
  return w;
}

std::vector<std::string> split_command(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string part; in >> part;) out.push_back(part);
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

PipelineConfig PipelineConfig::parse(std::string_view yaml, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    const YAML::Node root = YAML::Load(std::string(yaml));
    if (!root || root.IsNull()) return c;
    if (!root.IsMap()) throw Error(ErrorCode::BadConfig, "configuration must be a mapping");
    if (root["backend"]) c.backend = parse_backend(root["backend"].as<std::string>());
    if (const auto m = root["models"]) {
      c.diffusion_model = value_or<std::string>(m, "diffusion", c.diffusion_model);
      c.clip_model = value_or<std::string>(m, "clip", c.clip_model);
      c.inception_model = value_or<std::string>(m, "inception", c.inception_model);
    }
    if (const auto b = root["bridge"]) {
      if (b["command"]) {
        c.bridge_command = b["command"].IsSequence() ? b["command"].as<std::vector<std::string>>()
                                                     : split_command(b["command"].as<std::string>());
      }
      c.device = value_or<std::string>(b, "device", c.device);
    }
    if (const auto s = root["stub"]) c.stub_clip_dim = value_or<std::size_t>(s, "clip_dim", c.stub_clip_dim);
    if (const auto cu = root["cultures"]) {
      if (cu.IsScalar()) {
        const fs::path file = resolve(base_dir, cu.as<std::string>());
        c.cultures = CultureRegistry::load(file);
        c.cultures_source = file.string();
      } else {
        c.cultures = CultureRegistry::parse(YAML::Dump(cu));
        c.cultures_source = "inline";
      }
    }
    if (const auto d = root["defaults"]) {
      c.defaults.seed = value_or<std::uint64_t>(d, "seed", c.defaults.seed);
      c.defaults.guidance_scale = value_or<double>(d, "guidance_scale", c.defaults.guidance_scale);
      c.defaults.steps = value_or<int>(d, "steps", c.defaults.steps);
      c.defaults.width = value_or<int>(d, "width", c.defaults.width);
      c.defaults.height = value_or<int>(d, "height", c.defaults.height);
      if (d["size"]) c.defaults.width = c.defaults.height = d["size"].as<int>();
      c.token_budget = value_or<std::size_t>(d, "token_budget", c.token_budget);
    }
    c.defaults.model_id = c.diffusion_model;
    if (root["mask_mode"]) c.mask_mode = parse_mask_mode(root["mask_mode"].as<std::string>());
    if (const auto m3 = root["method3"]) {
      c.method3 = read_windows(m3, c.method3);
      if (const auto per = m3["per_culture"]) {
        for (const auto& kv : per) c.method3_per_culture[kv.first.as<std::string>()] = read_windows(kv.second, c.method3);
      }
    }
    if (root["parallelism"]) {
      const int p = root["parallelism"].as<int>();
      if (p < 1) throw Error(ErrorCode::BadConfig, "parallelism must be a positive integer");
      c.parallelism = static_cast<unsigned>(p);
    }
    if (root["output_root"]) c.output_root = resolve(base_dir, root["output_root"].as<std::string>());
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::BadConfig, e.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& file) {
  if (!fs::is_regular_file(file)) throw Error(ErrorCode::BadConfig, "configuration file not found: " + file.string());
  try {
    return parse(read_text(file), file.parent_path());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BadConfig) throw Error(ErrorCode::BadConfig, file.string() + ": " + e.what());
    throw;
  }
}

void PipelineConfig::validate() const {
  try {
    validate_params(defaults);
  } catch (const Error& e) {
    throw Error(ErrorCode::BadConfig, std::string("defaults: ") + e.what());
  }
  if (token_budget == 0) throw Error(ErrorCode::BadConfig, "token_budget must be positive");
  if (parallelism == 0) throw Error(ErrorCode::BadConfig, "parallelism must be positive");
  if (stub_clip_dim == 0) throw Error(ErrorCode::BadConfig, "stub clip_dim must be positive");
  auto check = [](const AttentionWindows& w, const std::string& where) {
    CrossAttentionParams ca;
    ca.spatial_start = w.spatial_start;
    ca.spatial_end = w.spatial_end;
    ca.tokens_start = w.tokens_start;
    ca.tokens_end = w.tokens_end;
    try {
      validate_windows(ca);
    } catch (const Error& e) {
      throw Error(ErrorCode::BadConfig, where + ": " + e.what());
    }
  };
  check(method3, "method3");
  for (const auto& [name, w] : method3_per_culture) {
    if (!cultures.contains(name)) {
      throw Error(ErrorCode::BadConfig, "method3.per_culture names unknown culture '" + name + "'");
    }
    check(w, "method3.per_culture." + name);
  }
}

AttentionWindows PipelineConfig::windows_for(std::string_view culture) const {
  const auto it = method3_per_culture.find(std::string(culture));
  return it == method3_per_culture.end() ? method3 : it->second;
}

std::vector<std::string> PipelineConfig::resolved_bridge_command() const {
  std::vector<std::string> cmd = bridge_command;
  if (cmd.empty()) cmd = {"python3", GEOALIGN_BRIDGE_SCRIPT};
  cmd.push_back("--device");
  cmd.push_back(device);
  return cmd;
}

std::string PipelineConfig::snapshot_json() const {
  json cultures_json = json::array();
  for (const auto& p : cultures.profiles()) {
    cultures_json.push_back({{"name", p.name},
                             {"prompt_keyword", p.prompt_keyword},
                             {"editorial_keyword", p.editorial_keyword},
                             {"mask_text", p.mask_text},
                             {"mask_multiplier", p.mask_multiplier}});
  }
  auto windows = [](const AttentionWindows& w) {
    return json{{"spatial_start", w.spatial_start},
                {"spatial_end", w.spatial_end},
                {"tokens_start", w.tokens_start},
                {"tokens_end", w.tokens_end}};
  };
  json per = json::object();
  for (const auto& [name, w] : method3_per_culture) per[name] = windows(w);
  json j = {{"backend", std::string(to_string(backend))},
            {"models", {{"diffusion", diffusion_model}, {"clip", clip_model}, {"inception", inception_model}}},
            {"cultures", cultures_json},
            {"cultures_source", cultures_source},
            {"defaults",
             {{"seed", defaults.seed},
              {"guidance_scale", defaults.guidance_scale},
              {"steps", defaults.steps},
              {"width", defaults.width},
              {"height", defaults.height},
              {"token_budget", token_budget}}},
            {"mask_mode", std::string(to_string(mask_mode))},
            {"method3", windows(method3)},
            {"method3_per_culture", per},
            {"parallelism", parallelism}};
  if (backend == BackendKind::Stub) j["stub"] = {{"clip_dim", stub_clip_dim}};
  else j["bridge"] = {{"command", resolved_bridge_command()}};
  return j.dump();
}

PipelineConfig resolve_config(const std::optional<fs::path>& path) {
  PipelineConfig c;
  if (path) {
    c = PipelineConfig::load(*path);
  } else if (const char* env = std::getenv("GEOALIGN_CONFIG"); env && *env) {
    c = PipelineConfig::load(env);
  }
  if (const char* v = std::getenv("GEOALIGN_DIFFUSION_MODEL"); v && *v) {
    c.diffusion_model = v;
    c.defaults.model_id = v;
  }
  if (const char* v = std::getenv("GEOALIGN_CLIP_MODEL"); v && *v) c.clip_model = v;
  if (const char* v = std::getenv("GEOALIGN_INCEPTION_MODEL"); v && *v) c.inception_model = v;
  if (const char* v = std::getenv("GEOALIGN_BRIDGE"); v && *v) c.bridge_command = split_command(v);
  return c;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_json(bool include_timing) const {
  json pages_json = json::array();
  for (const auto& p : pages) {
    json e = {{"page_index", p.page_index}, {"status", p.ok ? "ok" : "failed"}};
    if (!p.ok) e["error"] = p.error;
    if (!p.manifest.empty()) e["manifest"] = p.manifest;
    if (p.record) e["record"] = json::parse(record_to_json(*p.record, include_timing));
    if (p.seed_search) {
      e["seed_search"] = {{"n", p.seed_search->n},
                          {"base_seed", p.seed_search->base_seed},
                          {"best_seed", p.seed_search->best_seed},
                          {"best_similarity", p.seed_search->best_similarity}};
    }
    pages_json.push_back(std::move(e));
  }
  json j = {{"schema_version", kRecordSchemaVersion},
            {"tool_version", tool_version},
            {"config", config_snapshot.empty() ? json::object() : json::parse(config_snapshot)},
            {"book_id", book_id},
            {"culture", culture},
            {"method", std::string(to_string(method))},
            {"pages", pages_json}};
  if (include_timing) {
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
  }
  return j.dump(2) + "\n";
}

}  // namespace geoalign
