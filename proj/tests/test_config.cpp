#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "geoalign/config.hpp"
#include "geoalign/error.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace geoalign;
using testutil::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::Io;
}

// Sets an environment variable for the lifetime of the object.
class ScopedEnv {
 public:
  ScopedEnv(const char* name, const std::string& value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    setenv(name, value.c_str(), 1);
  }
  ~ScopedEnv() {
    if (old_) setenv(name_, old_->c_str(), 1);
    else unsetenv(name_);
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

}  // namespace

TEST(Config, Defaults) {
  const PipelineConfig c = PipelineConfig::parse("");
  EXPECT_EQ(c.backend, BackendKind::Stub);
  EXPECT_EQ(c.defaults.seed, kDefaultSeed);
  EXPECT_EQ(c.defaults.steps, 50);
  EXPECT_EQ(c.defaults.width, 512);
  EXPECT_EQ(c.token_budget, 75u);
  EXPECT_EQ(c.cultures.names(), (std::vector<std::string>{"indian", "japanese", "middle_eastern", "uk"}));
}

TEST(Config, ParsesEverySection) {
  const PipelineConfig c = PipelineConfig::parse(R"(
backend: real
models: {diffusion: my-sd, clip: my-clip}
bridge: {command: "python3 -u bridge.py", device: cuda}
defaults: {seed: 42, steps: 30, size: 256, guidance_scale: 6.0, token_budget: 60}
mask_mode: per_position
method3:
  spatial_start: 0.2
  per_culture:
    japanese: {tokens_end: 0.5}
parallelism: 3
output_root: runs
)",
                                                 "/base");
  EXPECT_EQ(c.backend, BackendKind::Real);
  EXPECT_EQ(c.diffusion_model, "my-sd");
  EXPECT_EQ(c.defaults.model_id, "my-sd");
  EXPECT_EQ(c.bridge_command, (std::vector<std::string>{"python3", "-u", "bridge.py"}));
  EXPECT_EQ(c.resolved_bridge_command().back(), "cuda");
  EXPECT_EQ(c.defaults.width, 256);
  EXPECT_EQ(c.defaults.height, 256);
  EXPECT_EQ(c.defaults.steps, 30);
  EXPECT_EQ(c.token_budget, 60u);
  EXPECT_EQ(c.mask_mode, MaskMode::PerPosition);
  EXPECT_EQ(c.parallelism, 3u);
  EXPECT_EQ(c.output_root, std::filesystem::path("/base/runs"));
  EXPECT_DOUBLE_EQ(c.windows_for("uk").spatial_start, 0.2);
  const AttentionWindows j = c.windows_for("japanese");
  EXPECT_DOUBLE_EQ(j.spatial_start, 0.2);
  EXPECT_DOUBLE_EQ(j.tokens_end, 0.5);
}

TEST(Config, Errors) {
  EXPECT_EQ(code_of([] { PipelineConfig::parse("- a\n- b\n"); }), ErrorCode::BadConfig);
  EXPECT_EQ(code_of([] { PipelineConfig::parse("backend: gpu\n"); }), ErrorCode::BadConfig);
  EXPECT_EQ(code_of([] { PipelineConfig::parse("defaults: {size: 500}\n"); }), ErrorCode::BadConfig);
  EXPECT_EQ(code_of([] { PipelineConfig::parse("parallelism: 0\n"); }), ErrorCode::BadConfig);
  EXPECT_EQ(code_of([] { PipelineConfig::parse("method3: {spatial_start: 0.5, spatial_end: 0.5}\n"); }),
            ErrorCode::BadConfig);
  EXPECT_EQ(code_of([] { PipelineConfig::parse("method3: {per_culture: {martian: {}}}\n"); }), ErrorCode::BadConfig);
  EXPECT_EQ(code_of([] { PipelineConfig::parse("defaults: {steps: [1]}\n"); }), ErrorCode::BadConfig);
  EXPECT_EQ(code_of([] { PipelineConfig::load("/no/such/config.yaml"); }), ErrorCode::BadConfig);
}

TEST(Config, CulturesFromFileRelativeToConfig) {
  TempDir d;
  std::ofstream(d / "cultures.yaml") << "cultures:\n"
                                        "  - {name: kenyan, prompt_keyword: kenyan, editorial_keyword: Kenyan,"
                                        " mask_text: Kenyan art}\n";
  std::ofstream(d / "geoalign.yaml") << "cultures: cultures.yaml\n";
  const PipelineConfig c = PipelineConfig::load(d / "geoalign.yaml");
  EXPECT_EQ(c.cultures.names(), std::vector<std::string>{"kenyan"});
  EXPECT_EQ(c.cultures_source, (d / "cultures.yaml").string());
}

TEST(Config, BundledFilesLoad) {
  const auto root = std::filesystem::path(GEOALIGN_EXPERIMENTS).parent_path();
  const PipelineConfig c = PipelineConfig::load(root / "geoalign.example.yaml");
  EXPECT_EQ(c.cultures.names(), (std::vector<std::string>{"indian", "japanese", "middle_eastern", "uk"}));
  EXPECT_EQ(c.cultures.get("japanese"), CultureRegistry::defaults().get("japanese"));
}

TEST(Config, EnvironmentSelectsFileAndOverridesModels) {
  TempDir d;
  std::ofstream(d / "c.yaml") << "defaults: {seed: 9}\n";
  ScopedEnv cfg("GEOALIGN_CONFIG", (d / "c.yaml").string());
  ScopedEnv model("GEOALIGN_DIFFUSION_MODEL", "other-sd");
  ScopedEnv bridge("GEOALIGN_BRIDGE", "python3 /x/bridge.py");
  const PipelineConfig c = resolve_config(std::nullopt);
  EXPECT_EQ(c.defaults.seed, 9u);
  EXPECT_EQ(c.diffusion_model, "other-sd");
  EXPECT_EQ(c.defaults.model_id, "other-sd");
  EXPECT_EQ(c.bridge_command, (std::vector<std::string>{"python3", "/x/bridge.py"}));
  std::ofstream(d / "explicit.yaml") << "defaults: {seed: 3}\n";
  EXPECT_EQ(resolve_config(d / "explicit.yaml").defaults.seed, 3u);
}

TEST(Config, SnapshotIsStableJson) {
  const PipelineConfig c = PipelineConfig::parse("defaults: {seed: 5}\n");
  EXPECT_EQ(c.snapshot_json(), PipelineConfig::parse("defaults: {seed: 5}\n").snapshot_json());
  const auto j = nlohmann::json::parse(c.snapshot_json());
  EXPECT_EQ(j["defaults"]["seed"], 5);
  EXPECT_EQ(j["backend"], "stub");
  EXPECT_EQ(j["cultures"].size(), 4u);
}

TEST(RunManifest, TimingIsOptional) {
  RunManifest m;
  m.book_id = "riley";
  m.culture = "japanese";
  m.started_at = "2024-01-01T00:00:00Z";
  m.finished_at = "2024-01-01T00:00:01Z";
  PageEntry p;
  p.page_index = 2;
  p.error = "BACKEND_FAILURE: boom";
  m.pages.push_back(p);
  const auto j = nlohmann::json::parse(m.to_json());
  EXPECT_EQ(j["pages"][0]["status"], "failed");
  EXPECT_EQ(j["started_at"], "2024-01-01T00:00:00Z");
  EXPECT_EQ(m.to_json(false).find("started_at"), std::string::npos);
  EXPECT_EQ(utc_timestamp().size(), 20u);
}
