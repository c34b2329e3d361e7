#include "geoalign/evaluation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "geoalign/error.hpp"
#include "geoalign/io.hpp"
#include "geoalign/text.hpp"

namespace geoalign {

namespace fs = std::filesystem;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

FeatureSet make_feature_set(const std::vector<std::vector<double>>& rows, std::string label) {
  if (rows.empty()) return {};
  FeatureSet out(rows.size(), rows.front().size());
  out.source_label = std::move(label);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != out.cols) throw Error(ErrorCode::DimensionMismatch, "ragged feature rows");
    std::copy(rows[i].begin(), rows[i].end(), out.row(i).begin());
  }
  return out;
}

FeatureSet extract_inception_features(std::span<const Raster> images, FeatureExtractor& extractor,
                                      std::string label) {
  if (images.size() < 2) {
    throw Error(ErrorCode::TooFewImages, (label.empty() ? std::string("feature set") : label) + " has " +
                                             std::to_string(images.size()) + " image(s), need at least 2");
  }
  const int size = extractor.input_size();
  FeatureSet out(images.size(), extractor.dim());
  out.source_label = std::move(label);
  out.extractor_id = extractor.id();
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto v = extractor.extract(resize_bilinear(images[i], size, size));
    if (v.size() != out.cols) throw Error(ErrorCode::DimensionMismatch, "extractor returned a vector of wrong size");
    for (double x : v) {
      if (!std::isfinite(x)) throw Error(ErrorCode::NumericalFailure, "non-finite image feature");
    }
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

FeatureSet extract_inception_features(const std::vector<fs::path>& files, FeatureExtractor& extractor,
                                      std::string label) {
  if (files.size() < 2) {
    throw Error(ErrorCode::TooFewImages, (label.empty() ? std::string("feature set") : label) + " has " +
                                             std::to_string(files.size()) + " image(s), need at least 2");
  }
  std::vector<Raster> images;
  images.reserve(files.size());
  for (const auto& f : files) images.push_back(read_png(f));
  return extract_inception_features(images, extractor, std::move(label));
}

namespace {

struct Centered {
  Eigen::VectorXd mean;
  Matrix x;  // rows minus mean, scaled by 1/sqrt(n-1)
};

Centered center(const FeatureSet& s) {
  Eigen::Map<const Matrix> m(s.features.data(), static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
  Centered c;
  c.mean = m.colwise().mean().transpose();
  c.x = (m.rowwise() - c.mean.transpose()) / std::sqrt(static_cast<double>(s.rows - 1));
  return c;
}

// Tr(sqrt(S_a S_b)) = sum of singular values of X_a X_b^T when S = X^T X.
double trace_sqrt_low_rank(const Matrix& xa, const Matrix& xb) {
  const Matrix cross = xa * xb.transpose();
  Eigen::BDCSVD<Matrix> svd(cross);
  return svd.singularValues().sum();
}

struct Spectrum {
  Eigen::VectorXd values;
  Matrix vectors;
  bool singular = false;
};

Spectrum spectrum(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> e(s);
  if (e.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "covariance eigendecomposition failed");
  Spectrum out{e.eigenvalues(), e.eigenvectors()};
  const double top = std::max(out.values.maxCoeff(), 0.0);
  out.singular = out.values.minCoeff() <= kFrechetEpsilon * std::max(top, 1.0);
  return out;
}

// Tr(sqrt(R S R)) with R = sqrt(S_r + eps I), a symmetric PSD product.
double trace_sqrt_rooted(const Spectrum& r_spec, const Matrix& s, double eps) {
  const Eigen::VectorXd root = (r_spec.values.array() + eps).cwiseMax(0.0).sqrt().matrix();
  const Matrix r = r_spec.vectors * root.asDiagonal() * r_spec.vectors.transpose();
  Matrix m = r * s * r;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> em(m, Eigen::EigenvaluesOnly);
  if (em.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "matrix square root did not converge");
  // Round-off in the null space would otherwise enter as sqrt(1e-18) ~ 1e-9.
  const Eigen::VectorXd lambda = em.eigenvalues();
  const double cutoff = std::numeric_limits<double>::epsilon() * static_cast<double>(lambda.size()) *
                        std::max(lambda.maxCoeff(), 0.0);
  double total = 0.0;
  for (double l : lambda) {
    if (l > cutoff) total += std::sqrt(l);
  }
  return total;
}

// Tr(sqrt(S_a S_b)) = Tr(sqrt(R S_b R)) with R = sqrt(S_a). The root is taken
// of a well-conditioned covariance when there is one; only when both are
// near-singular is eps I added, and then both orders are averaged so the
// result stays symmetric.
double trace_sqrt_full(const Matrix& sa, const Matrix& sb, bool& regularized) {
  const Spectrum ea = spectrum(sa);
  const Spectrum eb = spectrum(sb);
  regularized = ea.singular && eb.singular;
  if (regularized) {
    return 0.5 * (trace_sqrt_rooted(ea, sb, kFrechetEpsilon) + trace_sqrt_rooted(eb, sa, kFrechetEpsilon));
  }
  return ea.singular ? trace_sqrt_rooted(eb, sa, 0.0) : trace_sqrt_rooted(ea, sb, 0.0);
}

}  // namespace

FrechetResult frechet_details(const FeatureSet& a, const FeatureSet& b) {
  if (a.cols != b.cols) {
    throw Error(ErrorCode::DimensionMismatch,
                "feature dimensions differ: " + std::to_string(a.cols) + " vs " + std::to_string(b.cols));
  }
  for (const FeatureSet* s : {&a, &b}) {
    if (s->rows < 2) {
      throw Error(ErrorCode::TooFewImages, "feature set '" + s->source_label + "' needs at least 2 rows");
    }
    if (s->features.size() != s->rows * s->cols) throw Error(ErrorCode::DimensionMismatch, "malformed feature set");
  }
  const Centered ca = center(a);
  const Centered cb = center(b);

  FrechetResult out;
  out.mean_term = (ca.mean - cb.mean).squaredNorm();
  const double tr_a = ca.x.squaredNorm();
  const double tr_b = cb.x.squaredNorm();
  double tr_sqrt = 0.0;
  if (std::max(a.rows, b.rows) <= a.cols) {
    out.route = FrechetRoute::LowRank;
    tr_sqrt = trace_sqrt_low_rank(ca.x, cb.x);
  } else {
    out.route = FrechetRoute::Full;
    const Matrix sa = ca.x.transpose() * ca.x;
    const Matrix sb = cb.x.transpose() * cb.x;
    tr_sqrt = trace_sqrt_full(sa, sb, out.regularized);
  }
  out.trace_term = tr_a + tr_b - 2.0 * tr_sqrt;
  const double d = out.mean_term + out.trace_term;
  if (!std::isfinite(d)) throw Error(ErrorCode::NumericalFailure, "Frechet distance is not finite");
  // The true value is non-negative; clip round-off below zero.
  out.distance = std::max(0.0, d);
  return out;
}

double frechet_distance(const FeatureSet& a, const FeatureSet& b) { return frechet_details(a, b).distance; }

std::string format3(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string FidReport::to_markdown() const {
  std::string out = "| Method | FID Score (against original) | Number of Images |\n|---|---:|---:|\n";
  for (const auto& r : rows) out += "| " + r.label + " | " + format3(r.fid) + " | " + std::to_string(r.n_images) + " |\n";
  out += "\nFeatures: " + extractor_id + ", " + std::to_string(input_size) + "x" + std::to_string(input_size) + " " +
         interpolation + " resize; " + std::to_string(n_original) + " original images.\n";
  return out;
}

std::string FidReport::to_csv() const {
  std::string out = "method,fid,n_images,extractor,interpolation,input_size,n_original\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.fid);
    out += "\"" + r.label + "\"," + buf + "," + std::to_string(r.n_images) + "," + extractor_id + "," +
           interpolation + "," + std::to_string(input_size) + "," + std::to_string(n_original) + "\n";
  }
  return out;
}

FidReport fid_report(const fs::path& original_dir,
                     const std::vector<std::pair<std::string, fs::path>>& method_dirs, FeatureExtractor& extractor) {
  if (method_dirs.empty()) throw Error(ErrorCode::EmptyInput, "no generated image sets given");
  auto load = [&](const std::string& label, const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, label + ": image directory not found: " + dir.string());
    try {
      return extract_inception_features(list_png_files(dir), extractor, label);
    } catch (const Error& e) {
      throw Error(e.code(), label + ": " + e.what());
    }
  };
  FidReport report;
  report.extractor_id = extractor.id();
  report.input_size = extractor.input_size();
  const FeatureSet original = load("Original", original_dir);
  report.n_original = original.rows;

  std::vector<std::vector<double>> pooled;
  for (const auto& [label, dir] : method_dirs) {
    const FeatureSet set = load(label, dir);
    report.rows.push_back({label, frechet_distance(set, original), set.rows});
    for (std::size_t i = 0; i < set.rows; ++i) pooled.emplace_back(set.row(i).begin(), set.row(i).end());
  }
  const FeatureSet all = make_feature_set(pooled, std::string(kPooledLabel));
  report.rows.push_back({std::string(kPooledLabel), frechet_distance(all, original), all.rows});
  return report;
}

// ---------------------------------------------------------------------------
// survey

std::string_view to_string(Rating rating) {
  switch (rating) {
    case Rating::VeryPoor: return "Very Poor";
    case Rating::Poor: return "Poor";
    case Rating::Acceptable: return "Acceptable";
    case Rating::Good: return "Good";
    case Rating::VeryGood: return "Very Good";
  }
  return "?";
}

Rating parse_rating(std::string_view label) {
  std::string key;
  for (char c : label) {
    if (c != ' ' && c != '_' && c != '-') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "verypoor") return Rating::VeryPoor;
  if (key == "poor") return Rating::Poor;
  if (key == "acceptable") return Rating::Acceptable;
  if (key == "good") return Rating::Good;
  if (key == "verygood") return Rating::VeryGood;
  throw Error(ErrorCode::BadSurvey, "unknown rating '" + std::string(label) + "'");
}

std::string_view picture_label(int picture_index) {
  switch (picture_index) {
    case 1: return "Original";
    case 2: return "Method 1";
    case 3: return "Method 2";
    case 4: return "Method 3";
  }
  throw Error(ErrorCode::BadSurvey, "picture_index must be 1..4");
}

const BookScores& SurveyReport::book(std::string_view id) const {
  for (const auto& b : books) {
    if (b.book_id == id) return b;
  }
  throw Error(ErrorCode::EmptyInput, "no survey responses for book '" + std::string(id) + "'");
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? format3(*v) : "-"; }

}  // namespace

std::string SurveyReport::to_markdown() const {
  std::string out;
  for (const auto& b : books) {
    out += "### " + b.book_id + "\n\n| Page | Original | Method 1 | Method 2 | Method 3 |\n|---:|---:|---:|---:|---:|\n";
    for (const auto& p : b.pages) {
      out += "| " + std::to_string(p.page_index);
      for (const auto& m : p.mean) out += " | " + cell(m);
      out += " |\n";
    }
    out += "| Average";
    for (const auto& m : b.column_average) out += " | " + cell(m);
    out += " |\n\n";
  }
  return out;
}

std::string SurveyReport::to_csv() const {
  std::string out = "book_id,page_index,original,method1,method2,method3\n";
  for (const auto& b : books) {
    for (const auto& p : b.pages) {
      out += b.book_id + "," + std::to_string(p.page_index);
      for (const auto& m : p.mean) out += "," + (m ? format3(*m) : std::string());
      out += "\n";
    }
    out += b.book_id + ",average";
    for (const auto& m : b.column_average) out += "," + (m ? format3(*m) : std::string());
    out += "\n";
  }
  return out;
}

SurveyReport likert_aggregate(std::span<const SurveyResponse> responses) {
  if (responses.empty()) throw Error(ErrorCode::EmptyInput, "no survey responses");
  struct Acc {
    std::array<double, kPictureCount> sum{};
    std::array<std::size_t, kPictureCount> n{};
  };
  std::map<std::string, std::map<int, Acc>> acc;
  for (const auto& r : responses) {
    if (r.picture_index < 1 || r.picture_index > kPictureCount) {
      throw Error(ErrorCode::BadSurvey, "picture_index " + std::to_string(r.picture_index) + " outside 1..4");
    }
    if (r.page_index < 1) throw Error(ErrorCode::BadSurvey, "page_index must be positive");
    if (!std::isfinite(r.score) || r.score < -2.0 || r.score > 2.0) {
      throw Error(ErrorCode::BadSurvey, "rating " + std::to_string(r.score) + " outside [-2, 2]");
    }
    auto& a = acc[r.book_id][r.page_index];
    a.sum[r.picture_index - 1] += r.score;
    ++a.n[r.picture_index - 1];
  }

  SurveyReport report;
  report.n_responses = responses.size();
  for (const auto& [book_id, pages] : acc) {
    BookScores b;
    b.book_id = book_id;
    std::array<double, kPictureCount> col_sum{};
    std::array<std::size_t, kPictureCount> col_n{};
    for (const auto& [page, a] : pages) {
      PageScores ps;
      ps.page_index = page;
      ps.n = a.n;
      for (int k = 0; k < kPictureCount; ++k) {
        if (a.n[k] == 0) continue;
        ps.mean[k] = a.sum[k] / static_cast<double>(a.n[k]);
        col_sum[k] += *ps.mean[k];
        ++col_n[k];
      }
      b.pages.push_back(ps);
    }
    for (int k = 0; k < kPictureCount; ++k) {
      if (col_n[k] > 0) b.column_average[k] = col_sum[k] / static_cast<double>(col_n[k]);
    }
    report.books.push_back(std::move(b));
  }
  return report;
}

namespace {

std::vector<std::vector<std::string>> parse_csv_rows(std::string_view csv) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < csv.size(); ++i) {
    const char c = csv[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < csv.size() && csv[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        row.push_back(trim(field));
        field.clear();
        any = true;
        break;
      case '\r': break;
      case '\n':
        if (any || !field.empty()) {
          row.push_back(trim(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        any = false;
        break;
      default:
        field.push_back(c);
        if (c != ' ' && c != '\t') any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::BadSurvey, "unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(trim(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

int parse_int(const std::string& s, const char* what, std::size_t line) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::BadSurvey, "line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
}

double parse_score(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  try {
    return static_cast<double>(static_cast<int>(parse_rating(s)));
  } catch (const Error&) {
    throw Error(ErrorCode::BadSurvey, "line " + std::to_string(line) + ": bad rating '" + s + "'");
  }
}

}  // namespace

std::vector<SurveyResponse> parse_survey_csv(std::string_view csv) {
  if (csv.rfind("\xEF\xBB\xBF", 0) == 0) csv.remove_prefix(3);
  const auto rows = parse_csv_rows(csv);
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "survey CSV is empty");
  static constexpr std::array<std::string_view, 5> kColumns = {"respondent_id", "book_id", "page_index",
                                                               "picture_index", "rating"};
  std::array<std::size_t, 5> at{};
  for (std::size_t k = 0; k < kColumns.size(); ++k) {
    const auto& header = rows.front();
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return iequals_ascii(h, kColumns[k]); });
    if (it == header.end()) throw Error(ErrorCode::BadSurvey, "survey CSV lacks column '" + std::string(kColumns[k]) + "'");
    at[k] = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<SurveyResponse> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::size_t need = *std::max_element(at.begin(), at.end()) + 1;
    if (r.size() < need) throw Error(ErrorCode::BadSurvey, "line " + std::to_string(i + 1) + ": too few columns");
    SurveyResponse s;
    s.respondent_id = r[at[0]];
    s.book_id = r[at[1]];
    s.page_index = parse_int(r[at[2]], "page_index", i + 1);
    s.picture_index = parse_int(r[at[3]], "picture_index", i + 1);
    s.score = parse_score(r[at[4]], i + 1);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyInput, "survey CSV has a header but no responses");
  return out;
}

std::vector<SurveyResponse> read_survey_csv(const fs::path& file) { return parse_survey_csv(read_text(file)); }

}  // namespace geoalign
