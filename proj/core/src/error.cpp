#include "medsum/error.hpp"

namespace medsum {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::InvalidHeader: return "InvalidHeader";
        case ErrorCode::EmptyDialogue: return "EmptyDialogue";
        case ErrorCode::EmptySet: return "EmptySet";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::MalformedFile: return "MalformedFile";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ProviderFailure: return "ProviderFailure";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::EmptyCandidatePool: return "EmptyCandidatePool";
        case ErrorCode::InvalidLambda: return "InvalidLambda";
        case ErrorCode::InvalidK: return "InvalidK";
        case ErrorCode::NoExamples: return "NoExamples";
        case ErrorCode::WrongExampleCount: return "WrongExampleCount";
        case ErrorCode::InvalidExample: return "InvalidExample";
        case ErrorCode::MissingTemplate: return "MissingTemplate";
        case ErrorCode::UnresolvedPlaceholder: return "UnresolvedPlaceholder";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::InvalidStage: return "InvalidStage";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::ProviderExhausted: return "ProviderExhausted";
        case ErrorCode::ProviderError: return "ProviderError";
        case ErrorCode::CacheCorrupt: return "CacheCorrupt";
        case ErrorCode::UnparseableLabel: return "UnparseableLabel";
        case ErrorCode::IdMismatch: return "IdMismatch";
        case ErrorCode::UnknownId: return "UnknownId";
        case ErrorCode::EmptySummary: return "EmptySummary";
        case ErrorCode::EmptyArticle: return "EmptyArticle";
        case ErrorCode::MissingGeneration: return "MissingGeneration";
        case ErrorCode::ContextLengthRisk: return "ContextLengthRisk";
        case ErrorCode::UnsupportedTask: return "UnsupportedTask";
        case ErrorCode::MissingPredictions: return "MissingPredictions";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace medsum
