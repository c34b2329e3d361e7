#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

#include "geoalign/embedding.hpp"
#include "geoalign/evaluation.hpp"
#include "geoalign/generation.hpp"

namespace geoalign {

// Child process speaking newline-delimited JSON on stdin/stdout: one request
// object per line, one response object per line. Responses carry "ok": true
// or "ok": false with an "error" string. The real models run behind this
// boundary (tools/geoalign_bridge.py).
class BridgeProcess {
 public:
  // argv[0] is looked up on PATH. Throws ModelUnavailable when it cannot start.
  explicit BridgeProcess(std::vector<std::string> argv);
  ~BridgeProcess();
  BridgeProcess(const BridgeProcess&) = delete;
  BridgeProcess& operator=(const BridgeProcess&) = delete;

  // Sends one request and returns the response line. Throws BackendFailure on
  // a protocol error or an "ok": false response, ModelUnavailable when the
  // bridge could not load the model.
  std::string call(const std::string& request_json);

  const std::vector<std::string>& argv() const { return argv_; }

 private:
  std::string read_line();

  std::vector<std::string> argv_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::mutex mutex_;
};

class BridgeTextImageEncoder final : public TextImageEncoder {
 public:
  BridgeTextImageEncoder(std::shared_ptr<BridgeProcess> bridge, std::string model);

  std::string model_id() const override { return model_id_; }
  std::size_t dim() const override { return dim_; }
  std::size_t context_length() const override { return context_length_; }
  TextEncoding encode_text(std::string_view text) override;
  Embedding encode_image(const Raster& image) override;
  std::size_t count_tokens(std::string_view text) override;

 private:
  std::shared_ptr<BridgeProcess> bridge_;
  std::string model_;
  std::string model_id_;
  std::size_t dim_ = 0;
  std::size_t context_length_ = 0;
};

class BridgeDiffusionBackend final : public DiffusionBackend {
 public:
  BridgeDiffusionBackend(std::shared_ptr<BridgeProcess> bridge, std::string model);

  std::string id() const override { return id_; }
  int latent_factor() const override { return latent_factor_; }
  std::pair<std::size_t, std::size_t> conditioning_shape() const override { return {length_, dim_}; }
  std::size_t sequence_length(std::string_view prompt) override;

  Raster txt2img(const GenerationParams& params) override;
  Raster from_conditioning(const TokenSequenceEmbedding& cond, const GenerationParams& params) override;
  Raster prompt_to_prompt(const GenerationParams& initial, const CrossAttentionParams& ca) override;

 private:
  std::shared_ptr<BridgeProcess> bridge_;
  std::string model_;
  std::string id_;
  int latent_factor_ = 8;
  std::size_t length_ = 0;
  std::size_t dim_ = 0;
};

class BridgeFeatureExtractor final : public FeatureExtractor {
 public:
  BridgeFeatureExtractor(std::shared_ptr<BridgeProcess> bridge, std::string model);

  std::string id() const override { return id_; }
  std::size_t dim() const override { return dim_; }
  int input_size() const override { return input_size_; }
  std::vector<double> extract(const Raster& image) override;

 private:
  std::shared_ptr<BridgeProcess> bridge_;
  std::string model_;
  std::string id_;
  std::size_t dim_ = 0;
  int input_size_ = 299;
};

// Little-endian float32 packing used for vectors on the wire.
std::string pack_f32(std::span<const double> values);
std::vector<double> unpack_f32(std::string_view base64);

}  // namespace geoalign
