#include "geoalign/error.hpp"

namespace geoalign {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyBook: return "EmptyBook";
    case ErrorCode::MissingAsset: return "MissingAsset";
    case ErrorCode::BadEncoding: return "BadEncoding";
    case ErrorCode::BadManifest: return "BadManifest";
    case ErrorCode::InvalidPage: return "InvalidPage";
    case ErrorCode::BudgetUnsatisfiable: return "BudgetUnsatisfiable";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::NoNouns: return "NoNouns";
    case ErrorCode::UnknownCulture: return "UnknownCulture";
    case ErrorCode::InvalidProfile: return "InvalidProfile";
    case ErrorCode::ModelUnavailable: return "ModelUnavailable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyMaskText: return "EmptyMaskText";
    case ErrorCode::BadImage: return "BadImage";
    case ErrorCode::InvalidSize: return "InvalidSize";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::TokenIndexOutOfRange: return "TokenIndexOutOfRange";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::TooFewImages: return "TooFewImages";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BadSurvey: return "BadSurvey";
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

}  // namespace geoalign
