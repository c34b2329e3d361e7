#include "geoalign/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "geoalign/error.hpp"
#include "geoalign/io.hpp"
#include "geoalign/log.hpp"
#include "geoalign/text.hpp"

namespace geoalign {

std::string_view to_string(MaskMode mode) {
  switch (mode) {
    case MaskMode::MeanOffset: return "mean_offset";
    case MaskMode::PooledOffset: return "pooled_offset";
    case MaskMode::PerPosition: return "per_position";
  }
  return "?";
}

MaskMode parse_mask_mode(std::string_view name) {
  for (MaskMode m : {MaskMode::MeanOffset, MaskMode::PooledOffset, MaskMode::PerPosition}) {
    if (name == to_string(m)) return m;
  }
  throw Error(ErrorCode::BadConfig,
              "unknown mask mode '" + std::string(name) + "' (known: mean_offset, pooled_offset, per_position)");
}

EmbeddingService::EmbeddingService(std::shared_ptr<TextImageEncoder> encoder) : encoder_(std::move(encoder)) {
  if (!encoder_) throw Error(ErrorCode::ModelUnavailable, "no text/image encoder configured");
}

TextEncoding EmbeddingService::embed_text(std::string_view text) {
  TextEncoding out;
  {
    std::lock_guard lock(mutex_);
    out = encoder_->encode_text(text);
  }
  if (out.truncated) {
    log_warn("prompt exceeds the " + std::to_string(encoder_->context_length()) +
             "-token context and was truncated: " + std::string(text.substr(0, 60)));
  }
  return out;
}

Embedding EmbeddingService::embed_image(const Raster& image) {
  if (image.empty()) throw Error(ErrorCode::BadImage, "cannot embed an empty image");
  std::lock_guard lock(mutex_);
  return encoder_->encode_image(image);
}

CultureMask EmbeddingService::build_culture_mask(const CultureProfile& profile) {
  if (trim(profile.mask_text).empty()) {
    throw Error(ErrorCode::EmptyMaskText, "culture '" + profile.name + "' has no mask_text");
  }
  if (!std::isfinite(profile.mask_multiplier)) {
    throw Error(ErrorCode::InvalidProfile, profile.name + ": mask_multiplier must be finite");
  }
  TextEncoding enc = embed_text(profile.mask_text);
  CultureMask mask;
  mask.source_text = profile.mask_text;
  mask.pooled = std::move(enc.pooled);
  mask.sequence = std::move(enc.sequence);
  mask.multiplier = profile.mask_multiplier;
  return mask;
}

std::string EmbeddingService::model_id() const { return encoder_->model_id(); }
std::size_t EmbeddingService::dim() const { return encoder_->dim(); }
std::size_t EmbeddingService::context_length() const { return encoder_->context_length(); }

TokenCounter EmbeddingService::token_counter() {
  return [this](std::string_view text) {
    std::lock_guard lock(mutex_);
    return encoder_->count_tokens(text);
  };
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "cosine of vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  // sqrt(na * nb) keeps cos(v, v) exactly 1 where sqrt(na) * sqrt(nb) may round below it.
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double cosine_similarity(const Embedding& a, const Embedding& b) { return cosine_similarity(a.vector, b.vector); }

TokenSequenceEmbedding apply_mask(const TokenSequenceEmbedding& prompt, const CultureMask& mask, MaskMode mode) {
  const auto& m = mask.sequence;
  if (m.dim != prompt.dim) {
    throw Error(ErrorCode::DimensionMismatch,
                "mask dim " + std::to_string(m.dim) + " vs prompt dim " + std::to_string(prompt.dim));
  }
  TokenSequenceEmbedding out = prompt;
  const std::size_t d = prompt.dim;
  const double k = mask.multiplier;

  if (mode == MaskMode::PerPosition) {
    if (m.length != prompt.length) {
      throw Error(ErrorCode::DimensionMismatch,
                  "mask length " + std::to_string(m.length) + " vs prompt length " + std::to_string(prompt.length));
    }
    for (std::size_t i = 0; i < prompt.length; ++i) {
      if (!prompt.attention_mask[i] || !m.attention_mask[i]) continue;
      auto row = out.row(i);
      auto off = m.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] += k * off[j];
    }
    return out;
  }

  std::vector<double> offset(d, 0.0);
  if (mode == MaskMode::PooledOffset) {
    if (mask.pooled.dim() != d) {
      throw Error(ErrorCode::DimensionMismatch,
                  "pooled mask dim " + std::to_string(mask.pooled.dim()) + " vs prompt dim " + std::to_string(d));
    }
    offset = mask.pooled.vector;
  } else {
    std::size_t n = 0;
    for (std::size_t i = 0; i < m.length; ++i) {
      if (!m.attention_mask[i]) continue;
      auto row = m.row(i);
      for (std::size_t j = 0; j < d; ++j) offset[j] += row[j];
      ++n;
    }
    if (n == 0) throw Error(ErrorCode::EmptyMaskText, "mask sequence has no real tokens");
    for (double& v : offset) v /= static_cast<double>(n);
  }
  for (std::size_t i = 0; i < prompt.length; ++i) {
    if (!prompt.attention_mask[i]) continue;
    auto row = out.row(i);
    for (std::size_t j = 0; j < d; ++j) row[j] += k * offset[j];
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> LanguageStudy::pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < languages.size(); ++i) {
    for (std::size_t j = i + 1; j < languages.size(); ++j) out.emplace_back(i, j);
  }
  return out;
}

double LanguageStudy::mean_vector_spread() const {
  double lo = 1.0;
  double hi = -1.0;
  for (const auto& [i, j] : pairs()) {
    lo = std::min(lo, mean_vector[i][j]);
    hi = std::max(hi, mean_vector[i][j]);
  }
  return hi < lo ? 0.0 : hi - lo;
}

LanguageStudy language_similarity_study(EmbeddingService& service,
                                        const std::map<std::string, std::vector<std::string>>& word_lists) {
  if (word_lists.empty()) throw Error(ErrorCode::EmptyInput, "no word lists given");
  const std::size_t n_words = word_lists.begin()->second.size();
  for (const auto& [lang, words] : word_lists) {
    if (words.size() != n_words) {
      throw Error(ErrorCode::InvalidParams, "word list '" + lang + "' has " + std::to_string(words.size()) +
                                                " entries, expected " + std::to_string(n_words));
    }
  }

  // Rows blank in any language carry no aligned pair.
  std::vector<std::size_t> rows;
  for (std::size_t w = 0; w < n_words; ++w) {
    bool complete = true;
    for (const auto& [lang, words] : word_lists) complete = complete && !trim(words[w]).empty();
    if (complete) rows.push_back(w);
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "word lists contain no aligned words");

  LanguageStudy study;
  study.words_per_language = rows.size();
  std::vector<std::vector<Embedding>> embedded;
  for (const auto& [lang, words] : word_lists) {
    study.languages.push_back(lang);
    auto& per_lang = embedded.emplace_back();
    for (std::size_t w : rows) per_lang.push_back(service.embed_text(trim(words[w])).pooled);
  }

  const std::size_t n_lang = study.languages.size();
  const auto pairs = study.pairs();
  study.per_word.assign(rows.size(), std::vector<double>(pairs.size(), 0.0));
  study.translated_pair.assign(n_lang, std::vector<double>(n_lang, 1.0));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    double sum = 0.0;
    for (std::size_t w = 0; w < rows.size(); ++w) {
      study.per_word[w][p] = cosine_similarity(embedded[i][w], embedded[j][w]);
      sum += study.per_word[w][p];
    }
    study.translated_pair[i][j] = study.translated_pair[j][i] = sum / static_cast<double>(rows.size());
  }

  for (std::size_t i = 0; i < n_lang; ++i) {
    Embedding mean = embedded[i].front();
    for (std::size_t w = 1; w < rows.size(); ++w) {
      for (std::size_t k = 0; k < mean.vector.size(); ++k) mean.vector[k] += embedded[i][w].vector[k];
    }
    for (double& v : mean.vector) v /= static_cast<double>(rows.size());
    study.mean_vectors.push_back(std::move(mean));
  }
  study.mean_vector.assign(n_lang, std::vector<double>(n_lang, 1.0));
  for (const auto& [i, j] : pairs) {
    study.mean_vector[i][j] = study.mean_vector[j][i] = cosine_similarity(study.mean_vectors[i], study.mean_vectors[j]);
  }
  return study;
}

SimilarityMatrix concept_similarity(EmbeddingService& service, const std::vector<std::string>& labels) {
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "no concepts given");
  std::vector<Embedding> embedded;
  for (const auto& label : labels) embedded.push_back(service.embed_text(label).pooled);
  SimilarityMatrix out{labels, std::vector<std::vector<double>>(labels.size(), std::vector<double>(labels.size()))};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i; j < labels.size(); ++j) {
      out.values[i][j] = out.values[j][i] = i == j ? 1.0 : cosine_similarity(embedded[i], embedded[j]);
    }
  }
  return out;
}

std::vector<std::string> read_word_list(const std::filesystem::path& file) {
  std::string text = read_text(file);
  if (!is_valid_utf8(text)) throw Error(ErrorCode::BadEncoding, file.string() + " is not valid UTF-8");
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    words.push_back(trim(std::string_view(text).substr(start, end - start)));
    start = end + 1;
  }
  while (!words.empty() && words.back().empty()) words.pop_back();
  return words;
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string square_csv(const std::vector<std::string>& labels, const std::vector<std::vector<double>>& values) {
  std::string out = "label";
  for (const auto& l : labels) out += "," + csv_field(l);
  out += "\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += csv_field(labels[i]);
    for (double v : values[i]) out += "," + fmt(v);
    out += "\n";
  }
  return out;
}

}  // namespace

std::string study_to_csv(const LanguageStudy& study) {
  std::string out = "# translated-pair mean similarity\n" + square_csv(study.languages, study.translated_pair);
  out += "# mean-language-vector similarity\n" + square_csv(study.languages, study.mean_vector);
  out += "# mean-vector spread," + fmt(study.mean_vector_spread()) + "\n";
  return out;
}

std::string matrix_to_csv(const SimilarityMatrix& matrix) { return square_csv(matrix.labels, matrix.values); }

Raster render_heatmap(const std::vector<std::vector<double>>& values, double lo, double hi, int cell_px) {
  if (values.empty() || cell_px <= 0) throw Error(ErrorCode::EmptyInput, "empty heatmap");
  static constexpr double kRamp[3][3] = {{68, 1, 84}, {33, 145, 140}, {253, 231, 37}};
  const int n = static_cast<int>(values.size());
  Raster out(n * cell_px, n * cell_px);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = j < static_cast<int>(values[i].size()) ? values[i][j] : lo;
      const double t = hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.5;
      const int seg = t < 0.5 ? 0 : 1;
      const double u = t < 0.5 ? t * 2 : (t - 0.5) * 2;
      std::uint8_t rgb[3];
      for (int c = 0; c < 3; ++c) {
        rgb[c] = static_cast<std::uint8_t>(std::lround(kRamp[seg][c] * (1 - u) + kRamp[seg + 1][c] * u));
      }
      for (int y = 0; y < cell_px; ++y) {
        for (int x = 0; x < cell_px; ++x) {
          std::uint8_t* p = out.pixel(j * cell_px + x, i * cell_px + y);
          p[0] = rgb[0];
          p[1] = rgb[1];
          p[2] = rgb[2];
        }
      }
    }
  }
  return out;
}

}  // namespace geoalign
