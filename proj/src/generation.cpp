#include "geoalign/generation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numbers>

#include "geoalign/error.hpp"
#include "geoalign/io.hpp"
#include "geoalign/stub_models.hpp"
#include "json.hpp"

namespace geoalign {

namespace fs = std::filesystem;
using nlohmann::json;

void validate_params(const GenerationParams& p, int latent_factor) {
  if (p.width <= 0 || p.height <= 0 || p.width % latent_factor != 0 || p.height % latent_factor != 0) {
    throw Error(ErrorCode::InvalidSize, std::to_string(p.width) + "x" + std::to_string(p.height) +
                                            " is not a positive multiple of " + std::to_string(latent_factor));
  }
  if (!std::isfinite(p.guidance_scale) || p.guidance_scale < 0) {
    throw Error(ErrorCode::InvalidParams, "guidance_scale must be finite and >= 0");
  }
  if (p.steps < 1 || p.steps > 1000) throw Error(ErrorCode::InvalidParams, "steps must be in 1..1000");
}

void validate_windows(const CrossAttentionParams& ca) {
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!in_unit(ca.spatial_start) || !in_unit(ca.spatial_end) || !in_unit(ca.tokens_start) ||
      !in_unit(ca.tokens_end)) {
    throw Error(ErrorCode::InvalidWindow, "window bounds must lie in [0, 1]");
  }
  if (ca.spatial_end <= ca.spatial_start) {
    throw Error(ErrorCode::InvalidWindow, "spatial_end must be greater than spatial_start");
  }
  if (ca.tokens_end < ca.tokens_start) {
    throw Error(ErrorCode::InvalidWindow, "tokens_end must not be less than tokens_start");
  }
}

void validate_cross_attention(const CrossAttentionParams& ca, std::size_t editorial_sequence_length) {
  validate_windows(ca);
  for (const auto& tw : ca.token_weights) {
    if (tw.token_index >= editorial_sequence_length) {
      throw Error(ErrorCode::TokenIndexOutOfRange,
                  "token index " + std::to_string(tw.token_index) + " outside the editorial prompt's " +
                      std::to_string(editorial_sequence_length) + " tokens");
    }
    if (!std::isfinite(tw.weight)) throw Error(ErrorCode::InvalidParams, "token weights must be finite");
  }
}

// ---------------------------------------------------------------------------
// stub backend

namespace {

constexpr int kChannels = 4;
constexpr int kTrainSteps = 1000;

std::vector<double> alphas_cumprod() {
  // scaled-linear schedule
  const double b0 = std::sqrt(0.00085);
  const double b1 = std::sqrt(0.012);
  std::vector<double> out(kTrainSteps);
  double prod = 1.0;
  for (int i = 0; i < kTrainSteps; ++i) {
    const double s = b0 + (b1 - b0) * i / (kTrainSteps - 1);
    prod *= 1.0 - s * s;
    out[i] = prod;
  }
  return out;
}

// "leading" spacing with offset 1.
std::vector<int> timesteps(int steps) {
  const int ratio = kTrainSteps / steps;
  std::vector<int> out;
  for (int k = steps - 1; k >= 0; --k) out.push_back(std::min(k * ratio + 1, kTrainSteps - 1));
  return out;
}

std::vector<double> scaled_gaussian(std::string_view name, std::size_t n, double scale) {
  auto v = gaussian_vector(fnv1a64(name), n);
  for (double& x : v) x *= scale;
  return v;
}

// Longest common subsequence alignment: pairs (edit position, initial position).
std::vector<std::pair<std::size_t, std::size_t>> align_tokens(const std::vector<std::string>& init,
                                                              const std::vector<std::string>& edit) {
  const std::size_t n = init.size();
  const std::size_t m = edit.size();
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      dp[i][j] = init[i] == edit[j] ? dp[i + 1][j + 1] + 1 : std::max(dp[i + 1][j], dp[i][j + 1]);
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n && j < m) {
    if (init[i] == edit[j]) {
      out.emplace_back(j++, i++);
    } else if (dp[i + 1][j] >= dp[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

// Maps a latent to RGB, loosely following the linear latent-to-colour
// approximation commonly used for Stable Diffusion previews.
constexpr double kLatentToRgb[kChannels][3] = {
    {0.298, 0.207, 0.208}, {0.187, 0.286, 0.173}, {-0.158, 0.189, 0.264}, {-0.184, -0.271, -0.473}};

}  // namespace

struct StubDiffusionBackend::EditPlan {
  Conditioning initial;
  std::vector<std::pair<std::size_t, std::size_t>> token_map;
  std::vector<double> weights;  // per edit token
  double spatial_start = 0.0;
  double spatial_end = 1.0;
  double tokens_start = 0.0;
  double tokens_end = 1.0;
};

StubDiffusionBackend::StubDiffusionBackend(std::shared_ptr<EmbeddingService> embeddings)
    : embeddings_(std::move(embeddings)) {
  if (!embeddings_) throw Error(ErrorCode::ModelUnavailable, "stub backend needs a text encoder");
  length_ = embeddings_->context_length();
  dim_ = embeddings_->dim();
  w_key_ = scaled_gaussian("stub-ddim/key", kChannels * dim_, 1.0);
  w_value_ = scaled_gaussian("stub-ddim/value", kChannels * dim_, 1.0);
  w_query_ = scaled_gaussian("stub-ddim/query", kChannels * 8, 1.0);
  uncond_ = prepare(embeddings_->embed_text("").sequence);
}

std::pair<std::size_t, std::size_t> StubDiffusionBackend::conditioning_shape() const { return {length_, dim_}; }

std::size_t StubDiffusionBackend::sequence_length(std::string_view prompt) {
  return embeddings_->embed_text(prompt).tokens.size();
}

StubDiffusionBackend::Conditioning StubDiffusionBackend::prepare(const TokenSequenceEmbedding& seq) const {
  if (seq.length != length_ || seq.dim != dim_ || seq.rows.size() != length_ * dim_ ||
      seq.attention_mask.size() != length_) {
    throw Error(ErrorCode::ShapeMismatch, "conditioning is " + std::to_string(seq.length) + "x" +
                                              std::to_string(seq.dim) + ", backend expects " +
                                              std::to_string(length_) + "x" + std::to_string(dim_));
  }
  Conditioning c;
  for (std::size_t i = 0; i < seq.length; ++i) {
    if (!seq.attention_mask[i]) continue;
    const auto row = seq.row(i);
    for (const auto* w : {&w_key_, &w_value_}) {
      auto& out = w == &w_key_ ? c.keys : c.values;
      for (int k = 0; k < kChannels; ++k) {
        double acc = 0.0;
        const double* wr = w->data() + k * dim_;
        for (std::size_t d = 0; d < dim_; ++d) acc += wr[d] * row[d];
        out.push_back(acc);
      }
    }
    ++c.n;
  }
  if (c.n == 0) throw Error(ErrorCode::ShapeMismatch, "conditioning has no real tokens");
  return c;
}

Raster StubDiffusionBackend::sample(const Conditioning& cond, const GenerationParams& params,
                                    const EditPlan* edit) const {
  const int w = params.width / 8;
  const int h = params.height / 8;
  const std::size_t npos = static_cast<std::size_t>(w) * h;
  const auto abar = alphas_cumprod();
  const auto ts = timesteps(params.steps);
  const int ratio = kTrainSteps / params.steps;

  std::vector<double> pos(npos * 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = 2.0 * std::numbers::pi * (x + 0.5) / w;
      const double v = 2.0 * std::numbers::pi * (y + 0.5) / h;
      double* p = pos.data() + (static_cast<std::size_t>(y) * w + x) * 4;
      p[0] = std::sin(u);
      p[1] = std::cos(u);
      p[2] = std::sin(v);
      p[3] = std::cos(v);
    }
  }

  struct Maps {
    std::vector<double> attention;  // npos x n
    std::vector<double> spatial;    // npos x 4
  };
  struct Inject {
    const Maps* from = nullptr;
    bool tokens = false;
    bool spatial = false;
  };

  // Denoiser: predicts x0 from token attention plus a 3x3 mixing of its output,
  // returns the implied noise and optionally the maps it used.
  auto predict = [&](const std::vector<double>& x, double a, const Conditioning& c, const Inject& inject,
                     const std::vector<double>* weights, Maps* record) {
    std::vector<double> attn(npos * c.n);
    std::vector<double> o(npos * kChannels, 0.0);
    for (std::size_t p = 0; p < npos; ++p) {
      double feat[8];
      for (int k = 0; k < 4; ++k) {
        feat[k] = x[p * 4 + k];
        feat[4 + k] = pos[p * 4 + k];
      }
      double q[kChannels];
      for (int k = 0; k < kChannels; ++k) {
        double acc = 0.0;
        for (int f = 0; f < 8; ++f) acc += w_query_[k * 8 + f] * feat[f];
        q[k] = acc;
      }
      double* row = attn.data() + p * c.n;
      double mx = -1e300;
      for (std::size_t j = 0; j < c.n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < kChannels; ++k) acc += q[k] * c.keys[j * kChannels + k];
        row[j] = acc * 0.5;
        mx = std::max(mx, row[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < c.n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      }
      for (std::size_t j = 0; j < c.n; ++j) row[j] /= sum;
    }
    if (record) record->attention = attn;
    if (inject.tokens) {
      for (std::size_t p = 0; p < npos; ++p) {
        for (const auto& [e, i] : edit->token_map) attn[p * c.n + e] = inject.from->attention[p * edit->initial.n + i];
      }
    }
    if (weights) {
      for (std::size_t p = 0; p < npos; ++p) {
        for (std::size_t j = 0; j < c.n; ++j) attn[p * c.n + j] *= (*weights)[j];
      }
    }
    for (std::size_t p = 0; p < npos; ++p) {
      for (std::size_t j = 0; j < c.n; ++j) {
        const double aw = attn[p * c.n + j];
        for (int k = 0; k < kChannels; ++k) o[p * kChannels + k] += aw * c.values[j * kChannels + k];
      }
    }
    std::vector<double> s(npos * kChannels, 0.0);
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        double acc[kChannels] = {0, 0, 0, 0};
        int count = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy;
            const int xq = xx + dx;
            if (yy < 0 || yy >= h || xq < 0 || xq >= w) continue;
            for (int k = 0; k < kChannels; ++k) acc[k] += o[(static_cast<std::size_t>(yy) * w + xq) * kChannels + k];
            ++count;
          }
        }
        for (int k = 0; k < kChannels; ++k) s[(static_cast<std::size_t>(y) * w + xx) * kChannels + k] = acc[k] / count;
      }
    }
    if (record) record->spatial = s;
    const std::vector<double>& spatial = inject.spatial ? inject.from->spatial : s;

    std::vector<double> eps(npos * kChannels);
    std::vector<double> x0(npos * kChannels);
    const double sa = std::sqrt(a);
    const double sb = std::sqrt(1.0 - a);
    for (std::size_t i = 0; i < eps.size(); ++i) {
      x0[i] = std::tanh(o[i] + 0.5 * spatial[i] + 0.25 * x[i]);
      eps[i] = (x[i] - sa * x0[i]) / sb;
    }
    return eps;
  };

  std::vector<double> x = gaussian_vector(params.seed, npos * kChannels);
  std::vector<double> x0(npos * kChannels, 0.0);
  const std::vector<double>* weights = edit && !edit->weights.empty() ? &edit->weights : nullptr;
  for (int t : ts) {
    const double a = abar[t];
    const double a_prev = t - ratio >= 0 ? abar[t - ratio] : abar[0];
    const auto eps_u = predict(x, a, uncond_, {}, nullptr, nullptr);
    std::vector<double> eps_c;
    if (edit) {
      const double t_scale = static_cast<double>(t) / kTrainSteps;
      Maps init;
      predict(x, a, edit->initial, {}, nullptr, &init);
      Inject inject{&init, edit->tokens_start <= t_scale && t_scale <= edit->tokens_end,
                    edit->spatial_start <= t_scale && t_scale <= edit->spatial_end};
      eps_c = predict(x, a, cond, inject, weights, nullptr);
    } else {
      eps_c = predict(x, a, cond, {}, nullptr, nullptr);
    }
    const double sa = std::sqrt(a);
    const double sb = std::sqrt(1.0 - a);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = eps_u[i] + params.guidance_scale * (eps_c[i] - eps_u[i]);
      x0[i] = (x[i] - sb * e) / sa;
      x[i] = std::sqrt(a_prev) * x0[i] + std::sqrt(1.0 - a_prev) * e;
    }
  }

  Raster small(w, h);
  for (std::size_t p = 0; p < npos; ++p) {
    std::uint8_t* px = small.rgb.data() + p * 3;
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kChannels; ++k) acc += kLatentToRgb[k][c] * x0[p * kChannels + k];
      px[c] = static_cast<std::uint8_t>(std::lround(255.0 * (0.5 + 0.5 * std::tanh(2.5 * acc))));
    }
  }
  return resize_bilinear(small, params.width, params.height);
}

Raster StubDiffusionBackend::txt2img(const GenerationParams& params) {
  return from_conditioning(embeddings_->embed_text(params.prompt).sequence, params);
}

Raster StubDiffusionBackend::from_conditioning(const TokenSequenceEmbedding& cond, const GenerationParams& params) {
  validate_params(params, latent_factor());
  return sample(prepare(cond), params, nullptr);
}

Raster StubDiffusionBackend::prompt_to_prompt(const GenerationParams& initial, const CrossAttentionParams& ca) {
  validate_params(initial, latent_factor());
  const TextEncoding init = embeddings_->embed_text(initial.prompt);
  const TextEncoding edit = embeddings_->embed_text(ca.editorial_prompt);
  validate_cross_attention(ca, edit.tokens.size());

  EditPlan plan;
  plan.initial = prepare(init.sequence);
  plan.token_map = align_tokens(init.tokens, edit.tokens);
  plan.spatial_start = ca.spatial_start;
  plan.spatial_end = ca.spatial_end;
  plan.tokens_start = ca.tokens_start;
  plan.tokens_end = ca.tokens_end;
  const Conditioning cond = prepare(edit.sequence);
  if (!ca.token_weights.empty()) {
    plan.weights.assign(cond.n, 1.0);
    for (const auto& tw : ca.token_weights) plan.weights[tw.token_index] = tw.weight;
  }
  return sample(cond, initial, &plan);
}

// ---------------------------------------------------------------------------
// records

std::string_view to_string(Method method) {
  switch (method) {
    case Method::M1: return "M1";
    case Method::M2: return "M2";
    case Method::M3: return "M3";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  if (text == "1" || text == "M1" || text == "m1") return Method::M1;
  if (text == "2" || text == "M2" || text == "m2") return Method::M2;
  if (text == "3" || text == "M3" || text == "m3") return Method::M3;
  throw Error(ErrorCode::InvalidParams, "unknown method '" + std::string(text) + "' (expected 1, 2 or 3)");
}

std::string conditioning_digest(const TokenSequenceEmbedding& cond) {
  std::vector<std::uint8_t> bytes(cond.rows.size() * sizeof(double) + cond.attention_mask.size());
  std::memcpy(bytes.data(), cond.rows.data(), cond.rows.size() * sizeof(double));
  std::memcpy(bytes.data() + cond.rows.size() * sizeof(double), cond.attention_mask.data(),
              cond.attention_mask.size());
  return sha256_hex(bytes);
}

Generator::Generator(std::shared_ptr<DiffusionBackend> backend) : backend_(std::move(backend)) {
  if (!backend_) throw Error(ErrorCode::ModelUnavailable, "no diffusion backend configured");
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

GenerationResult Generator::finish(Raster image, GenerationRecord record, double seconds) {
  GenerationResult out;
  out.png = encode_png(image);
  out.image = std::move(image);
  record.backend_id = backend_->id();
  record.image_hash = sha256_hex(out.png);
  record.wall_time_s = seconds;
  out.record = std::move(record);
  return out;
}

GenerationResult Generator::txt2img(const GenerationParams& params) {
  validate_params(params, backend_->latent_factor());
  std::lock_guard lock(device_);
  const auto start = std::chrono::steady_clock::now();
  Raster image = backend_->txt2img(params);
  GenerationRecord record;
  record.params = params;
  record.method = Method::M1;
  return finish(std::move(image), std::move(record), seconds_since(start));
}

GenerationResult Generator::from_embedding(const TokenSequenceEmbedding& cond, const GenerationParams& params,
                                           std::optional<MaskDescriptor> mask) {
  validate_params(params, backend_->latent_factor());
  const auto [l, d] = backend_->conditioning_shape();
  if (cond.length != l || cond.dim != d) {
    throw Error(ErrorCode::ShapeMismatch, "conditioning is " + std::to_string(cond.length) + "x" +
                                              std::to_string(cond.dim) + ", backend expects " + std::to_string(l) +
                                              "x" + std::to_string(d));
  }
  std::lock_guard lock(device_);
  const auto start = std::chrono::steady_clock::now();
  Raster image = backend_->from_conditioning(cond, params);
  GenerationRecord record;
  record.params = params;
  record.method = Method::M2;
  record.mask = std::move(mask);
  record.conditioning_digest = conditioning_digest(cond);
  return finish(std::move(image), std::move(record), seconds_since(start));
}

GenerationResult Generator::prompt_to_prompt(const GenerationParams& initial, const CrossAttentionParams& ca) {
  validate_params(initial, backend_->latent_factor());
  std::lock_guard lock(device_);
  validate_cross_attention(ca, backend_->sequence_length(ca.editorial_prompt));
  const auto start = std::chrono::steady_clock::now();
  Raster image = backend_->prompt_to_prompt(initial, ca);
  GenerationRecord record;
  record.params = initial;
  record.method = Method::M3;
  record.cross_attention = ca;
  return finish(std::move(image), std::move(record), seconds_since(start));
}

std::string record_to_json(const GenerationRecord& r, bool include_timing) {
  json j;
  j["schema_version"] = r.schema_version;
  j["backend"] = r.backend_id;
  j["method"] = std::string(to_string(r.method));
  j["params"] = {{"prompt", r.params.prompt},
                 {"seed", r.params.seed},
                 {"guidance_scale", r.params.guidance_scale},
                 {"steps", r.params.steps},
                 {"width", r.params.width},
                 {"height", r.params.height},
                 {"model_id", r.params.model_id}};
  if (r.cross_attention) {
    const auto& ca = *r.cross_attention;
    json weights = json::array();
    for (const auto& tw : ca.token_weights) weights.push_back({tw.token_index, tw.weight});
    j["cross_attention"] = {{"editorial_prompt", ca.editorial_prompt},
                            {"spatial_start", ca.spatial_start},
                            {"spatial_end", ca.spatial_end},
                            {"tokens_start", ca.tokens_start},
                            {"tokens_end", ca.tokens_end},
                            {"token_weights", weights}};
  }
  if (r.mask) {
    j["mask"] = {{"culture", r.mask->culture},
                 {"mask_text", r.mask->mask_text},
                 {"multiplier", r.mask->multiplier},
                 {"mode", r.mask->mode},
                 {"encoder", r.mask->encoder_id}};
  }
  if (r.conditioning_digest) j["conditioning_sha256"] = *r.conditioning_digest;
  if (r.method3_fallback) j["method3_fallback"] = true;
  j["image"] = {{"path", r.image_path}, {"sha256", r.image_hash}};
  if (include_timing) j["wall_time_s"] = r.wall_time_s;
  return j.dump(2) + "\n";
}

GenerationRecord record_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    GenerationRecord r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kRecordSchemaVersion) {
      throw Error(ErrorCode::BadConfig, "unsupported manifest schema " + std::to_string(r.schema_version));
    }
    r.backend_id = j.value("backend", "");
    r.method = parse_method(j.at("method").get<std::string>());
    const auto& p = j.at("params");
    r.params.prompt = p.at("prompt").get<std::string>();
    r.params.seed = p.at("seed").get<std::uint64_t>();
    r.params.guidance_scale = p.at("guidance_scale").get<double>();
    r.params.steps = p.at("steps").get<int>();
    r.params.width = p.at("width").get<int>();
    r.params.height = p.at("height").get<int>();
    r.params.model_id = p.at("model_id").get<std::string>();
    if (j.contains("cross_attention")) {
      const auto& c = j["cross_attention"];
      CrossAttentionParams ca;
      ca.editorial_prompt = c.at("editorial_prompt").get<std::string>();
      ca.spatial_start = c.at("spatial_start").get<double>();
      ca.spatial_end = c.at("spatial_end").get<double>();
      ca.tokens_start = c.at("tokens_start").get<double>();
      ca.tokens_end = c.at("tokens_end").get<double>();
      for (const auto& tw : c.at("token_weights")) {
        ca.token_weights.push_back({tw.at(0).get<std::size_t>(), tw.at(1).get<double>()});
      }
      r.cross_attention = std::move(ca);
    }
    if (j.contains("mask")) {
      const auto& m = j["mask"];
      r.mask = MaskDescriptor{m.at("culture").get<std::string>(), m.at("mask_text").get<std::string>(),
                              m.at("multiplier").get<double>(), m.at("mode").get<std::string>(),
                              m.at("encoder").get<std::string>()};
    }
    if (j.contains("conditioning_sha256")) r.conditioning_digest = j["conditioning_sha256"].get<std::string>();
    r.method3_fallback = j.value("method3_fallback", false);
    r.image_path = j.at("image").at("path").get<std::string>();
    r.image_hash = j.at("image").at("sha256").get<std::string>();
    r.wall_time_s = j.value("wall_time_s", 0.0);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("malformed generation manifest: ") + e.what());
  }
}

GenerationRecord save_result(const GenerationResult& result, const fs::path& png_path, const fs::path& manifest_path) {
  write_file_atomic(png_path, result.png);
  GenerationRecord record = result.record;
  record.image_path = png_path.lexically_relative(manifest_path.parent_path()).generic_string();
  if (record.image_path.empty()) record.image_path = png_path.generic_string();
  write_file_atomic(manifest_path, record_to_json(record));
  return record;
}

std::vector<SeedScore> seed_search(Generator& generator, EmbeddingService& embeddings, const GenerationParams& params,
                                   const Raster& reference, std::size_t n, std::uint64_t base_seed) {
  if (n == 0) throw Error(ErrorCode::InvalidParams, "seed search needs n >= 1");
  const Embedding ref = embeddings.embed_image(reference);
  std::vector<SeedScore> scores;
  scores.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    GenerationParams p = params;
    p.seed = base_seed + k;
    const auto result = generator.txt2img(p);
    scores.push_back({p.seed, cosine_similarity(embeddings.embed_image(result.image), ref)});
  }
  std::stable_sort(scores.begin(), scores.end(),
                   [](const SeedScore& a, const SeedScore& b) { return a.similarity > b.similarity; });
  return scores;
}

}  // namespace geoalign
