#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geoalign {

enum class ErrorCode {
  // corpus
  EmptyBook,
  MissingAsset,
  BadEncoding,
  BadManifest,
  InvalidPage,
  // prompt pipeline
  BudgetUnsatisfiable,
  BudgetExceeded,
  NoNouns,
  UnknownCulture,
  InvalidProfile,
  // embedding
  ModelUnavailable,
  DimensionMismatch,
  ZeroVector,
  EmptyMaskText,
  BadImage,
  // generation
  InvalidSize,
  InvalidParams,
  ShapeMismatch,
  InvalidWindow,
  TokenIndexOutOfRange,
  BackendFailure,
  // evaluation
  TooFewImages,
  NumericalFailure,
  EmptyInput,
  BadSurvey,
  // plumbing
  Io,
  BadConfig,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library surfaces as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace geoalign
