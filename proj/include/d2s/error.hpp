#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace d2s {

enum class ErrorCode {
  SchemaError,
  EmptyDocument,
  EmptyCorpus,
  InvalidN,
  EmptyReference,
  NoNgrams,
  InvalidK,
  SpanOutOfRange,
  DegenerateConfig,
  ServiceUnavailable,
  DimensionMismatch,
  Timeout,
  InvalidWindow,
  EmptySnippets,
  AlphaOutOfRange,
  EmptyTitle,
  NoFigures,
  NoEligibleSlides,
  EmptyContext,
  EmptyGeneration,
  EmptyLine,
  DegenerateLabels,
  EmptyTraining,
  UnfittedModel,
  MisalignedCorpora,
  BindError,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::InvalidN: return "InvalidN";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::NoNgrams: return "NoNgrams";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::SpanOutOfRange: return "SpanOutOfRange";
    case ErrorCode::DegenerateConfig: return "DegenerateConfig";
    case ErrorCode::ServiceUnavailable: return "ServiceUnavailable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::EmptySnippets: return "EmptySnippets";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::EmptyTitle: return "EmptyTitle";
    case ErrorCode::NoFigures: return "NoFigures";
    case ErrorCode::NoEligibleSlides: return "NoEligibleSlides";
    case ErrorCode::EmptyContext: return "EmptyContext";
    case ErrorCode::EmptyGeneration: return "EmptyGeneration";
    case ErrorCode::EmptyLine: return "EmptyLine";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::EmptyTraining: return "EmptyTraining";
    case ErrorCode::UnfittedModel: return "UnfittedModel";
    case ErrorCode::MisalignedCorpora: return "MisalignedCorpora";
    case ErrorCode::BindError: return "BindError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (CLI exit codes, HTTP status mapping) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace d2s
