#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geoalign/culture.hpp"
#include "geoalign/image.hpp"
#include "geoalign/prompt.hpp"

namespace geoalign {

enum class Modality { Text, Image };

struct Embedding {
  std::vector<double> vector;
  Modality modality = Modality::Text;
  std::string model_id;

  std::size_t dim() const { return vector.size(); }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

// L x D conditioning rows (row-major) plus the non-padding mask.
struct TokenSequenceEmbedding {
  std::size_t length = 0;
  std::size_t dim = 0;
  std::vector<double> rows;
  std::vector<std::uint8_t> attention_mask;  // 1 = real token, 0 = padding

  TokenSequenceEmbedding() = default;
  TokenSequenceEmbedding(std::size_t l, std::size_t d) : length(l), dim(d), rows(l * d, 0.0), attention_mask(l, 0) {}

  std::span<double> row(std::size_t i) { return {rows.data() + i * dim, dim}; }
  std::span<const double> row(std::size_t i) const { return {rows.data() + i * dim, dim}; }
  friend bool operator==(const TokenSequenceEmbedding&, const TokenSequenceEmbedding&) = default;
};

struct TextEncoding {
  Embedding pooled;
  TokenSequenceEmbedding sequence;
  std::vector<std::string> tokens;  // one per non-padding position, including start/end markers
  bool truncated = false;
};

// Model adapter for a joint text/image encoder. Implementations need not be
// thread-safe; EmbeddingService serializes access.
class TextImageEncoder {
 public:
  virtual ~TextImageEncoder() = default;
  virtual std::string model_id() const = 0;
  virtual std::size_t dim() const = 0;             // projection / hidden size D
  virtual std::size_t context_length() const = 0;  // L, including start and end tokens
  virtual TextEncoding encode_text(std::string_view text) = 0;
  virtual Embedding encode_image(const Raster& image) = 0;
  // Content tokens of text, excluding start/end markers.
  virtual std::size_t count_tokens(std::string_view text) = 0;
};

struct CultureMask {
  std::string source_text;
  Embedding pooled;
  TokenSequenceEmbedding sequence;
  double multiplier = 0.0;
};

enum class MaskMode {
  MeanOffset,    // e_i + k * mean(non-padding mask rows)
  PooledOffset,  // e_i + k * pooled mask embedding
  PerPosition,   // e_i + k * m_i where both positions are real tokens
};

std::string_view to_string(MaskMode mode);
MaskMode parse_mask_mode(std::string_view name);

class EmbeddingService {
 public:
  explicit EmbeddingService(std::shared_ptr<TextImageEncoder> encoder);

  // Longer input is truncated to the context length with a warning.
  TextEncoding embed_text(std::string_view text);
  Embedding embed_image(const Raster& image);
  CultureMask build_culture_mask(const CultureProfile& profile);

  std::string model_id() const;
  std::size_t dim() const;
  std::size_t context_length() const;
  TokenCounter token_counter();

  std::shared_ptr<TextImageEncoder> encoder() const { return encoder_; }

 private:
  std::shared_ptr<TextImageEncoder> encoder_;
  std::mutex mutex_;
};

// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Throws DimensionMismatch or ZeroVector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(const Embedding& a, const Embedding& b);

// Adds the culture offset to every real-token row of the prompt; padding rows and
// the attention mask are copied unchanged. Throws DimensionMismatch.
TokenSequenceEmbedding apply_mask(const TokenSequenceEmbedding& prompt, const CultureMask& mask,
                                  MaskMode mode = MaskMode::MeanOffset);

struct LanguageStudy {
  std::vector<std::string> languages;
  std::size_t words_per_language = 0;
  // per_word[w][p]: similarity of word w between language pair p (pairs() order)
  std::vector<std::vector<double>> per_word;
  // translated_pair[i][j]: mean over aligned words of cos(word_i, word_j)
  std::vector<std::vector<double>> translated_pair;
  std::vector<Embedding> mean_vectors;
  // mean_vector[i][j]: cos(mean_i, mean_j)
  std::vector<std::vector<double>> mean_vector;

  std::vector<std::pair<std::size_t, std::size_t>> pairs() const;
  // max - min over the off-diagonal mean-vector similarities
  double mean_vector_spread() const;
};

// word_lists: language -> words aligned by position; all lists must have the
// same length. Positions blank in any list are skipped.
LanguageStudy language_similarity_study(EmbeddingService& service,
                                        const std::map<std::string, std::vector<std::string>>& word_lists);

struct SimilarityMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
};

// Pairwise pooled-text similarities, e.g. concept names and their native-script variants.
SimilarityMatrix concept_similarity(EmbeddingService& service, const std::vector<std::string>& labels);

// One word per line, UTF-8; blank lines are kept so alignment by line number survives.
std::vector<std::string> read_word_list(const std::filesystem::path& file);

std::string study_to_csv(const LanguageStudy& study);
std::string matrix_to_csv(const SimilarityMatrix& matrix);
// Square heatmap, cell_px per entry, values mapped from [lo, hi] onto a blue-to-yellow ramp.
Raster render_heatmap(const std::vector<std::vector<double>>& values, double lo, double hi, int cell_px = 32);

}  // namespace geoalign
