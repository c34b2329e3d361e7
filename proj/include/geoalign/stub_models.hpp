#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "geoalign/embedding.hpp"
#include "geoalign/evaluation.hpp"

namespace geoalign {

// Deterministic pseudo-random helpers shared by the stub models.
std::uint64_t fnv1a64(std::string_view bytes);
// n standard normal samples from mt19937_64(seed) via Box-Muller.
std::vector<double> gaussian_vector(std::uint64_t seed, std::size_t n);

// Text/image encoder with CLIP's shapes and no learned weights. Each token
// maps to a fixed Gaussian vector keyed by a hash of its text; sequence rows mix
// the token, its left neighbour and a position code. Images are average-pooled
// and pushed through a fixed random projection, so equal images embed equally.
class HashTextImageEncoder final : public TextImageEncoder {
 public:
  static constexpr std::string_view kModelId = "hash-clip-stub";

  explicit HashTextImageEncoder(std::size_t dim = 768, std::size_t context_length = 77);

  std::string model_id() const override { return std::string(kModelId); }
  std::size_t dim() const override { return dim_; }
  std::size_t context_length() const override { return context_length_; }
  TextEncoding encode_text(std::string_view text) override;
  Embedding encode_image(const Raster& image) override;
  std::size_t count_tokens(std::string_view text) override;

  // Lowercased tokens as the encoder sees them, without start/end markers.
  static std::vector<std::string> text_tokens(std::string_view text);

 private:
  std::vector<double> token_vector(std::string_view token) const;
  std::vector<double> position_vector(std::size_t position) const;

  std::size_t dim_;
  std::size_t context_length_;
  std::vector<double> image_projection_;  // dim x (pooled features + 1)
};

// Inception-shaped (2048-d, 299x299 input) feature extractor: 13x13 average
// pooling, fixed random projection, ReLU.
class StubInceptionExtractor final : public FeatureExtractor {
 public:
  static constexpr std::string_view kId = "inception-stub";

  StubInceptionExtractor();

  std::string id() const override { return std::string(kId); }
  std::size_t dim() const override { return 2048; }
  std::vector<double> extract(const Raster& image) override;

 private:
  std::vector<double> projection_;
};

}  // namespace geoalign
