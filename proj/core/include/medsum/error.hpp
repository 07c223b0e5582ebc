#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medsum {

enum class ErrorCode {
    // corpus
    MissingColumn,
    InvalidHeader,
    EmptyDialogue,
    EmptySet,
    DuplicateId,
    MalformedFile,
    InvalidArgument,
    // embedding
    ProviderFailure,
    DimensionMismatch,
    ZeroVector,
    NonFiniteValue,
    EmptyText,
    // selection
    EmptyCandidatePool,
    InvalidLambda,
    InvalidK,
    // prompting
    NoExamples,
    WrongExampleCount,
    InvalidExample,
    MissingTemplate,
    UnresolvedPlaceholder,
    EmptyInput,
    InvalidStage,
    // llm-client
    InvalidConfig,
    ProviderExhausted,
    ProviderError,
    CacheCorrupt,
    // classification
    UnparseableLabel,
    IdMismatch,
    UnknownId,
    // metrics
    EmptySummary,
    EmptyArticle,
    MissingGeneration,
    // cli / pipeline
    ContextLengthRisk,
    UnsupportedTask,
    MissingPredictions,
    Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

}  // namespace medsum
