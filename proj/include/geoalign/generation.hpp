#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geoalign/embedding.hpp"
#include "geoalign/image.hpp"

namespace geoalign {

inline constexpr std::uint64_t kDefaultSeed = 1234;
inline constexpr int kRecordSchemaVersion = 1;

struct GenerationParams {
  std::string prompt;
  std::uint64_t seed = kDefaultSeed;
  double guidance_scale = 7.5;
  int steps = 50;
  int width = 512;
  int height = 512;
  std::string model_id = "stable-diffusion v1.5";
  friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

// Throws InvalidSize (not a positive multiple of latent_factor) or InvalidParams.
void validate_params(const GenerationParams& params, int latent_factor = 8);

struct TokenWeight {
  std::size_t token_index = 0;  // position in the encoder's token sequence; 0 is the start token
  double weight = 1.0;
  friend bool operator==(const TokenWeight&, const TokenWeight&) = default;
};

// Windows are fractions of the noise schedule, t / T_train: 1.0 is the first
// (noisiest) step and 0.0 the last. A window is active while start <= t/T <= end.
struct CrossAttentionParams {
  std::string editorial_prompt;
  double spatial_start = 0.0;
  double spatial_end = 1.0;
  double tokens_start = 0.0;
  double tokens_end = 1.0;
  std::vector<TokenWeight> token_weights;
  friend bool operator==(const CrossAttentionParams&, const CrossAttentionParams&) = default;
};

// Window checks only. Throws InvalidWindow.
void validate_windows(const CrossAttentionParams& ca);
// Window checks plus token indices against the editorial sequence length
// (start and end tokens included). Throws InvalidWindow or TokenIndexOutOfRange.
void validate_cross_attention(const CrossAttentionParams& ca, std::size_t editorial_sequence_length);

// Latent-diffusion model behind the three conditioning pathways.
class DiffusionBackend {
 public:
  virtual ~DiffusionBackend() = default;
  virtual std::string id() const = 0;
  virtual int latent_factor() const { return 8; }
  // (L, D) of the conditioning accepted by from_conditioning.
  virtual std::pair<std::size_t, std::size_t> conditioning_shape() const = 0;
  // Real positions (start, content, end) the prompt occupies after tokenization.
  virtual std::size_t sequence_length(std::string_view prompt) = 0;

  virtual Raster txt2img(const GenerationParams& params) = 0;
  // params.prompt is ignored.
  virtual Raster from_conditioning(const TokenSequenceEmbedding& cond, const GenerationParams& params) = 0;
  virtual Raster prompt_to_prompt(const GenerationParams& initial, const CrossAttentionParams& ca) = 0;
};

// Toy latent-diffusion model with the structure the pathways rely on:
// a 4-channel latent at 1/8 resolution, scaled-linear betas, DDIM sampling,
// classifier-free guidance against the empty prompt, token cross-attention and
// a neighbourhood ("spatial") mixing term whose maps can be recorded and
// injected. Outputs are fully determined by the inputs.
class StubDiffusionBackend final : public DiffusionBackend {
 public:
  static constexpr std::string_view kId = "stub-ddim";

  explicit StubDiffusionBackend(std::shared_ptr<EmbeddingService> embeddings);

  std::string id() const override { return std::string(kId); }
  std::pair<std::size_t, std::size_t> conditioning_shape() const override;
  std::size_t sequence_length(std::string_view prompt) override;

  Raster txt2img(const GenerationParams& params) override;
  Raster from_conditioning(const TokenSequenceEmbedding& cond, const GenerationParams& params) override;
  Raster prompt_to_prompt(const GenerationParams& initial, const CrossAttentionParams& ca) override;

 private:
  // Keys and values of the real tokens, 4 values each.
  struct Conditioning {
    std::size_t n = 0;
    std::vector<double> keys;
    std::vector<double> values;
  };
  struct EditPlan;
  Conditioning prepare(const TokenSequenceEmbedding& seq) const;
  Raster sample(const Conditioning& cond, const GenerationParams& params, const EditPlan* edit) const;

  std::shared_ptr<EmbeddingService> embeddings_;
  std::size_t length_;
  std::size_t dim_;
  Conditioning uncond_;
  std::vector<double> w_key_;    // 4 x D
  std::vector<double> w_value_;  // 4 x D
  std::vector<double> w_query_;  // 4 x 8
};

enum class Method { M1 = 1, M2 = 2, M3 = 3 };
std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct MaskDescriptor {
  std::string culture;
  std::string mask_text;
  double multiplier = 0.0;
  std::string mode;
  std::string encoder_id;
  friend bool operator==(const MaskDescriptor&, const MaskDescriptor&) = default;
};

struct GenerationRecord {
  int schema_version = kRecordSchemaVersion;
  std::string backend_id;
  GenerationParams params;
  Method method = Method::M1;
  std::optional<CrossAttentionParams> cross_attention;
  std::optional<MaskDescriptor> mask;
  std::optional<std::string> conditioning_digest;  // SHA-256 of the conditioning rows (Method 2)
  bool method3_fallback = false;  // Method 3 requested, no noun to edit, ran Method 1
  std::string image_path;         // relative to the manifest when saved
  std::string image_hash;         // SHA-256 of the PNG bytes
  double wall_time_s = 0.0;
};

struct GenerationResult {
  Raster image;
  std::vector<std::uint8_t> png;
  GenerationRecord record;
};

// Validates requests, runs the backend one job at a time and fills in records.
class Generator {
 public:
  explicit Generator(std::shared_ptr<DiffusionBackend> backend);

  GenerationResult txt2img(const GenerationParams& params);
  GenerationResult from_embedding(const TokenSequenceEmbedding& cond, const GenerationParams& params,
                                  std::optional<MaskDescriptor> mask = std::nullopt);
  GenerationResult prompt_to_prompt(const GenerationParams& initial, const CrossAttentionParams& ca);

  DiffusionBackend& backend() { return *backend_; }

 private:
  GenerationResult finish(Raster image, GenerationRecord record, double seconds);

  std::shared_ptr<DiffusionBackend> backend_;
  std::mutex device_;
};

std::string conditioning_digest(const TokenSequenceEmbedding& cond);

// Pretty-printed JSON manifest. include_timing=false omits wall_time_s so
// manifests of identical runs compare byte for byte.
std::string record_to_json(const GenerationRecord& record, bool include_timing = true);
GenerationRecord record_from_json(std::string_view json);  // throws BadConfig

// Writes <png_path> and <manifest_path> atomically; image_path is stored
// relative to the manifest's directory. Returns the record as saved.
GenerationRecord save_result(const GenerationResult& result, const std::filesystem::path& png_path,
                             const std::filesystem::path& manifest_path);

struct SeedScore {
  std::uint64_t seed = 0;
  double similarity = 0.0;
};

// Generates seeds base_seed .. base_seed + n - 1 and ranks them by cosine
// similarity to the reference image (descending, ties in seed order).
std::vector<SeedScore> seed_search(Generator& generator, EmbeddingService& embeddings, const GenerationParams& params,
                                   const Raster& reference, std::size_t n, std::uint64_t base_seed);

}  // namespace geoalign
