#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geoalign/image.hpp"

namespace geoalign {

// Pooled image features (Inception-V3 pool3 for the real model).
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual int input_size() const { return 299; }
  // `image` is already input_size() x input_size().
  virtual std::vector<double> extract(const Raster& image) = 0;
};

struct FeatureSet {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> features;  // rows x cols, row-major
  std::string source_label;
  std::string extractor_id;

  FeatureSet() = default;
  FeatureSet(std::size_t n, std::size_t d) : rows(n), cols(d), features(n * d, 0.0) {}

  std::span<double> row(std::size_t i) { return {features.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * cols, cols}; }
};

FeatureSet make_feature_set(const std::vector<std::vector<double>>& rows, std::string label = {});

// Resizes every image to the extractor's input size (bilinear) and stacks the
// feature vectors in input order. Throws TooFewImages for fewer than two images.
FeatureSet extract_inception_features(std::span<const Raster> images, FeatureExtractor& extractor,
                                      std::string label = {});
FeatureSet extract_inception_features(const std::vector<std::filesystem::path>& files,
                                      FeatureExtractor& extractor, std::string label = {});

enum class FrechetRoute {
  LowRank,  // both sets have no more rows than dimensions: exact, via the rows' cross product
  Full,     // eigendecomposition of the symmetrized covariance product
};

struct FrechetResult {
  double distance = 0.0;
  double mean_term = 0.0;   // |mu_a - mu_b|^2
  double trace_term = 0.0;  // Tr(S_a + S_b - 2 (S_a S_b)^(1/2))
  FrechetRoute route = FrechetRoute::Full;
  bool regularized = false;  // both covariances were near-singular and epsilon * I was added
};

inline constexpr double kFrechetEpsilon = 1e-6;

// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)) with unbiased covariances.
// Throws DimensionMismatch, TooFewImages or NumericalFailure.
FrechetResult frechet_details(const FeatureSet& a, const FeatureSet& b);
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

struct FidRow {
  std::string label;
  double fid = 0.0;
  std::size_t n_images = 0;
};

struct FidReport {
  std::string extractor_id;
  std::string interpolation = "bilinear";
  int input_size = 299;
  std::size_t n_original = 0;
  std::vector<FidRow> rows;  // one per method, then the pooled row

  std::string to_markdown() const;
  std::string to_csv() const;
};

inline constexpr std::string_view kPooledLabel = "All Methods";

// One row per (label, dir) in order, plus a pooled row over every method image.
// A directory that is missing or holds fewer than two PNGs raises an error naming its label.
FidReport fid_report(const std::filesystem::path& original_dir,
                     const std::vector<std::pair<std::string, std::filesystem::path>>& method_dirs,
                     FeatureExtractor& extractor);

enum class Rating { VeryPoor = -2, Poor = -1, Acceptable = 0, Good = 1, VeryGood = 2 };

std::string_view to_string(Rating rating);
// Accepts "Very Poor", "VeryPoor", "very_poor" etc. Throws BadSurvey.
Rating parse_rating(std::string_view label);

inline constexpr int kPictureCount = 4;
// picture_index 1..4: original, Method 1, Method 2, Method 3
std::string_view picture_label(int picture_index);

struct SurveyResponse {
  std::string respondent_id;
  std::string book_id;
  int page_index = 0;
  int picture_index = 0;
  // Rating value in [-2, 2]. Aggregated inputs such as earlier page means
  // enter as single-respondent rows with a fractional score.
  double score = 0.0;

  static SurveyResponse rated(std::string respondent, std::string book, int page, int picture, Rating r) {
    return {std::move(respondent), std::move(book), page, picture, static_cast<double>(static_cast<int>(r))};
  }
};

struct PageScores {
  int page_index = 0;
  std::array<std::optional<double>, kPictureCount> mean;
  std::array<std::size_t, kPictureCount> n{};
};

struct BookScores {
  std::string book_id;
  std::vector<PageScores> pages;  // ascending page index
  std::array<std::optional<double>, kPictureCount> column_average;
};

struct SurveyReport {
  std::vector<BookScores> books;  // ascending book id
  std::size_t n_responses = 0;

  const BookScores& book(std::string_view id) const;
  std::string to_markdown() const;
  std::string to_csv() const;
};

// Page mean = mean over respondents; column average = mean of the page means.
// Throws EmptyInput or BadSurvey.
SurveyReport likert_aggregate(std::span<const SurveyResponse> responses);

// Columns respondent_id, book_id, page_index, picture_index, rating (any order,
// header required). rating is a label or a number in [-2, 2].
std::vector<SurveyResponse> parse_survey_csv(std::string_view csv);
std::vector<SurveyResponse> read_survey_csv(const std::filesystem::path& file);

// Fixed three-decimal rendering used by every report ("-0.091", "0.000").
std::string format3(double value);

}  // namespace geoalign
