#include "geoalign/stub_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "geoalign/error.hpp"
#include "geoalign/text.hpp"

namespace geoalign {

namespace {

constexpr std::string_view kStartToken = "<|startoftext|>";
constexpr std::string_view kEndToken = "<|endoftext|>";

// Average-pools an image to grid x grid cells, scales to [-0.5, 0.5] and appends a constant 1.
std::vector<double> pooled_pixels(const Raster& image, int grid) {
  std::vector<double> out(static_cast<std::size_t>(grid) * grid * 3 + 1, 0.0);
  for (int gy = 0; gy < grid; ++gy) {
    const int y0 = gy * image.height / grid;
    const int y1 = std::max(y0 + 1, (gy + 1) * image.height / grid);
    for (int gx = 0; gx < grid; ++gx) {
      const int x0 = gx * image.width / grid;
      const int x1 = std::max(x0 + 1, (gx + 1) * image.width / grid);
      double sum[3] = {0, 0, 0};
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const auto* p = image.pixel(x, y);
          for (int c = 0; c < 3; ++c) sum[c] += p[c];
        }
      }
      const double count = static_cast<double>((y1 - y0) * (x1 - x0));
      for (int c = 0; c < 3; ++c) {
        out[(static_cast<std::size_t>(gy) * grid + gx) * 3 + c] = sum[c] / count / 255.0 - 0.5;
      }
    }
  }
  out.back() = 1.0;
  return out;
}

std::vector<double> project(const std::vector<double>& matrix, const std::vector<double>& x, std::size_t rows) {
  std::vector<double> out(rows, 0.0);
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* w = matrix.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
    out[r] = acc;
  }
  return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> gaussian_vector(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; };  // (0, 1]
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; i += 2) {
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    out[i] = r * std::cos(theta);
    if (i + 1 < n) out[i + 1] = r * std::sin(theta);
  }
  return out;
}

HashTextImageEncoder::HashTextImageEncoder(std::size_t dim, std::size_t context_length)
    : dim_(dim), context_length_(context_length) {
  if (dim == 0 || context_length < 2) throw Error(ErrorCode::InvalidParams, "stub encoder needs dim > 0 and L >= 2");
  constexpr int kGrid = 16;
  const std::size_t inputs = kGrid * kGrid * 3 + 1;
  image_projection_ = gaussian_vector(fnv1a64("hash-clip-stub/image"), dim_ * inputs);
  const double scale = 1.0 / std::sqrt(static_cast<double>(inputs));
  for (double& w : image_projection_) w *= scale;
}

std::vector<std::string> HashTextImageEncoder::text_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(to_lower_ascii(text))) out.push_back(std::move(t.text));
  return out;
}

std::vector<double> HashTextImageEncoder::token_vector(std::string_view token) const {
  auto v = gaussian_vector(fnv1a64(token), dim_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  for (double& x : v) x *= scale;
  return v;
}

std::vector<double> HashTextImageEncoder::position_vector(std::size_t position) const {
  auto v = gaussian_vector(0x9E3779B97F4A7C15ULL * (position + 1), dim_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  for (double& x : v) x *= scale;
  return v;
}

std::size_t HashTextImageEncoder::count_tokens(std::string_view text) { return text_tokens(text).size(); }

TextEncoding HashTextImageEncoder::encode_text(std::string_view text) {
  TextEncoding out;
  std::vector<std::string> content = text_tokens(text);
  if (content.size() > context_length_ - 2) {
    content.resize(context_length_ - 2);
    out.truncated = true;
  }
  out.tokens.emplace_back(kStartToken);
  for (auto& t : content) out.tokens.push_back(std::move(t));
  out.tokens.emplace_back(kEndToken);
  const std::size_t real = out.tokens.size();

  out.sequence = TokenSequenceEmbedding(context_length_, dim_);
  // Padding positions repeat the end token, as CLIP's tokenizer does.
  std::vector<double> prev = token_vector(kEndToken);
  std::vector<double> cur;
  for (std::size_t j = 0; j < context_length_; ++j) {
    cur = token_vector(j < real ? std::string_view(out.tokens[j]) : kEndToken);
    const auto pos = position_vector(j);
    auto row = out.sequence.row(j);
    for (std::size_t k = 0; k < dim_; ++k) row[k] = cur[k] + (j > 0 ? 0.5 * prev[k] : 0.0) + 0.25 * pos[k];
    out.sequence.attention_mask[j] = j < real ? 1 : 0;
    prev.swap(cur);
  }

  out.pooled.modality = Modality::Text;
  out.pooled.model_id = model_id();
  out.pooled.vector.assign(dim_, 0.0);
  for (std::size_t j = 1; j < real; ++j) {
    auto row = out.sequence.row(j);
    for (std::size_t k = 0; k < dim_; ++k) out.pooled.vector[k] += row[k];
  }
  for (double& v : out.pooled.vector) v /= static_cast<double>(real - 1);
  return out;
}

Embedding HashTextImageEncoder::encode_image(const Raster& image) {
  if (image.empty()) throw Error(ErrorCode::BadImage, "cannot embed an empty image");
  const Raster resized = resize_bilinear(image, 224, 224);
  Embedding out;
  out.modality = Modality::Image;
  out.model_id = model_id();
  out.vector = project(image_projection_, pooled_pixels(resized, 16), dim_);
  return out;
}

StubInceptionExtractor::StubInceptionExtractor() {
  constexpr std::size_t inputs = 13 * 13 * 3 + 1;
  projection_ = gaussian_vector(fnv1a64("inception-stub/projection"), 2048 * inputs);
  const double scale = 4.0 / std::sqrt(static_cast<double>(inputs));
  for (double& w : projection_) w *= scale;
}

std::vector<double> StubInceptionExtractor::extract(const Raster& image) {
  if (image.empty()) throw Error(ErrorCode::BadImage, "cannot extract features from an empty image");
  auto features = project(projection_, pooled_pixels(image, 13), 2048);
  for (double& f : features) f = std::max(0.0, f);
  return features;
}

}  // namespace geoalign
