#include "geoalign/bridge.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "geoalign/error.hpp"
#include "geoalign/io.hpp"
#include "json.hpp"

namespace geoalign {

using nlohmann::json;

BridgeProcess::BridgeProcess(std::vector<std::string> argv) : argv_(std::move(argv)) {
  if (argv_.empty()) throw Error(ErrorCode::ModelUnavailable, "empty bridge command");
  // A bridge that dies mid-request must surface as an error, not kill this process.
  signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  int err_pipe[2];  // reports exec failure from the child
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0 || pipe2(err_pipe, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::ModelUnavailable, std::string("pipe: ") + std::strerror(errno));
  }
  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);

  pid_ = fork();
  if (pid_ < 0) throw Error(ErrorCode::ModelUnavailable, std::string("fork: ") + std::strerror(errno));
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[0]);
    execvp(args[0], args.data());
    const int e = errno;
    (void)!write(err_pipe[1], &e, sizeof e);
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  close(err_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  // Later children must not inherit these ends, or EOF never reaches this bridge.
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  int exec_errno = 0;
  const ssize_t n = read(err_pipe[0], &exec_errno, sizeof exec_errno);
  close(err_pipe[0]);
  if (n == sizeof exec_errno) {
    waitpid(pid_, nullptr, 0);
    pid_ = -1;
    close(to_child_);
    close(from_child_);
    throw Error(ErrorCode::ModelUnavailable, "cannot start '" + argv_[0] + "': " + std::strerror(exec_errno));
  }
}

BridgeProcess::~BridgeProcess() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    // Closing stdin asks the bridge to exit; give it a moment before killing it.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) return;
      usleep(20000);
    }
    kill(pid_, SIGTERM);
    waitpid(pid_, &status, 0);
  }
}

std::string BridgeProcess::read_line() {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[65536];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::BackendFailure, "bridge '" + argv_[0] + "' closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string BridgeProcess::call(const std::string& request_json) {
  std::lock_guard lock(mutex_);
  if (pid_ <= 0) throw Error(ErrorCode::BackendFailure, "bridge is not running");
  std::string line = request_json;
  line.push_back('\n');
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = write(to_child_, line.data() + off, line.size() - off);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::BackendFailure, "cannot write to bridge '" + argv_[0] + "'");
    off += static_cast<std::size_t>(n);
  }
  std::string response = read_line();
  json j;
  try {
    j = json::parse(response);
  } catch (const json::exception&) {
    throw Error(ErrorCode::BackendFailure, "bridge sent a malformed response: " + response.substr(0, 200));
  }
  if (!j.is_object() || !j.value("ok", false)) {
    const std::string err = j.is_object() ? j.value("error", "unspecified error") : "not an object";
    const bool unavailable = j.is_object() && j.value("code", "") == "model_unavailable";
    throw Error(unavailable ? ErrorCode::ModelUnavailable : ErrorCode::BackendFailure, "bridge: " + err);
  }
  return response;
}

std::string pack_f32(std::span<const double> values) {
  std::vector<std::uint8_t> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = static_cast<float>(values[i]);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<std::uint8_t>(u >> (8 * b));
  }
  return base64_encode(bytes);
}

std::vector<double> unpack_f32(std::string_view base64) {
  const auto bytes = base64_decode(base64);
  if (bytes.size() % 4 != 0) throw Error(ErrorCode::BackendFailure, "float32 payload has a partial value");
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
    float f;
    std::memcpy(&f, &u, 4);
    out[i] = f;
  }
  return out;
}

namespace {

json call_json(BridgeProcess& bridge, const json& request) {
  try {
    return json::parse(bridge.call(request.dump()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendFailure, std::string("bridge response: ") + e.what());
  }
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendFailure, std::string("bridge response: ") + e.what());
  }
}

json params_json(const GenerationParams& p) {
  return {{"prompt", p.prompt},     {"seed", p.seed},   {"guidance_scale", p.guidance_scale},
          {"steps", p.steps},       {"width", p.width}, {"height", p.height},
          {"model_id", p.model_id}};
}

Raster png_from(const json& response) {
  return decode_png(base64_decode(response.at("png").get<std::string>()));
}

}  // namespace

BridgeTextImageEncoder::BridgeTextImageEncoder(std::shared_ptr<BridgeProcess> bridge, std::string model)
    : bridge_(std::move(bridge)), model_(std::move(model)) {
  guarded([&] {
    const json info = call_json(*bridge_, {{"op", "clip_info"}, {"model", model_}});
    model_id_ = info.at("model_id").get<std::string>();
    dim_ = info.at("dim").get<std::size_t>();
    context_length_ = info.at("context_length").get<std::size_t>();
    return 0;
  });
}

TextEncoding BridgeTextImageEncoder::encode_text(std::string_view text) {
  return guarded([&] {
    const json r = call_json(*bridge_, {{"op", "encode_text"}, {"model", model_}, {"text", std::string(text)}});
    TextEncoding out;
    out.pooled.vector = unpack_f32(r.at("pooled").get<std::string>());
    out.pooled.modality = Modality::Text;
    out.pooled.model_id = model_id_;
    out.sequence = TokenSequenceEmbedding(r.at("length").get<std::size_t>(), r.at("dim").get<std::size_t>());
    out.sequence.rows = unpack_f32(r.at("sequence").get<std::string>());
    out.sequence.attention_mask = r.at("attention_mask").get<std::vector<std::uint8_t>>();
    if (out.sequence.rows.size() != out.sequence.length * out.sequence.dim ||
        out.sequence.attention_mask.size() != out.sequence.length) {
      throw Error(ErrorCode::BackendFailure, "bridge returned an inconsistent token sequence");
    }
    out.tokens = r.at("tokens").get<std::vector<std::string>>();
    out.truncated = r.value("truncated", false);
    return out;
  });
}

Embedding BridgeTextImageEncoder::encode_image(const Raster& image) {
  return guarded([&] {
    const json r =
        call_json(*bridge_, {{"op", "encode_image"}, {"model", model_}, {"png", base64_encode(encode_png(image))}});
    Embedding out;
    out.vector = unpack_f32(r.at("vector").get<std::string>());
    out.modality = Modality::Image;
    out.model_id = model_id_;
    return out;
  });
}

std::size_t BridgeTextImageEncoder::count_tokens(std::string_view text) {
  return guarded([&] {
    return call_json(*bridge_, {{"op", "count_tokens"}, {"model", model_}, {"text", std::string(text)}})
        .at("count")
        .get<std::size_t>();
  });
}

BridgeDiffusionBackend::BridgeDiffusionBackend(std::shared_ptr<BridgeProcess> bridge, std::string model)
    : bridge_(std::move(bridge)), model_(std::move(model)) {
  guarded([&] {
    const json info = call_json(*bridge_, {{"op", "sd_info"}, {"model", model_}});
    id_ = info.at("model_id").get<std::string>();
    latent_factor_ = info.value("latent_factor", 8);
    length_ = info.at("length").get<std::size_t>();
    dim_ = info.at("dim").get<std::size_t>();
    return 0;
  });
}

std::size_t BridgeDiffusionBackend::sequence_length(std::string_view prompt) {
  return guarded([&] {
    return call_json(*bridge_, {{"op", "sequence_length"}, {"model", model_}, {"prompt", std::string(prompt)}})
        .at("length")
        .get<std::size_t>();
  });
}

Raster BridgeDiffusionBackend::txt2img(const GenerationParams& params) {
  return guarded([&] {
    return png_from(call_json(*bridge_, {{"op", "txt2img"}, {"model", model_}, {"params", params_json(params)}}));
  });
}

Raster BridgeDiffusionBackend::from_conditioning(const TokenSequenceEmbedding& cond, const GenerationParams& params) {
  return guarded([&] {
    return png_from(call_json(*bridge_, {{"op", "from_conditioning"},
                                         {"model", model_},
                                         {"params", params_json(params)},
                                         {"length", cond.length},
                                         {"dim", cond.dim},
                                         {"conditioning", pack_f32(cond.rows)},
                                         {"attention_mask", cond.attention_mask}}));
  });
}

Raster BridgeDiffusionBackend::prompt_to_prompt(const GenerationParams& initial, const CrossAttentionParams& ca) {
  return guarded([&] {
    json weights = json::array();
    for (const auto& tw : ca.token_weights) weights.push_back({tw.token_index, tw.weight});
    return png_from(call_json(*bridge_, {{"op", "prompt_to_prompt"},
                                         {"model", model_},
                                         {"params", params_json(initial)},
                                         {"cross_attention",
                                          {{"editorial_prompt", ca.editorial_prompt},
                                           {"spatial_start", ca.spatial_start},
                                           {"spatial_end", ca.spatial_end},
                                           {"tokens_start", ca.tokens_start},
                                           {"tokens_end", ca.tokens_end},
                                           {"token_weights", weights}}}}));
  });
}

BridgeFeatureExtractor::BridgeFeatureExtractor(std::shared_ptr<BridgeProcess> bridge, std::string model)
    : bridge_(std::move(bridge)), model_(std::move(model)) {
  guarded([&] {
    const json info = call_json(*bridge_, {{"op", "inception_info"}, {"model", model_}});
    id_ = info.at("model_id").get<std::string>();
    dim_ = info.at("dim").get<std::size_t>();
    input_size_ = info.value("input_size", 299);
    return 0;
  });
}

std::vector<double> BridgeFeatureExtractor::extract(const Raster& image) {
  return guarded([&] {
    const json r = call_json(*bridge_,
                             {{"op", "inception_features"}, {"model", model_}, {"png", base64_encode(encode_png(image))}});
    auto v = unpack_f32(r.at("vector").get<std::string>());
    if (v.size() != dim_) throw Error(ErrorCode::BackendFailure, "bridge returned a feature vector of wrong size");
    return v;
  });
}

}  // namespace geoalign
