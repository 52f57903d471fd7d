#include "inbedder/error.hpp"

namespace inbedder {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NegativeInput: return "NegativeInput";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyField: return "EmptyField";
    case ErrorCode::MalformedTemplate: return "MalformedTemplate";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::BackendUnreachable: return "BackendUnreachable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::UnsupportedMode: return "UnsupportedMode";
    case ErrorCode::MissingConfigEntry: return "MissingConfigEntry";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::MissingRecord: return "MissingRecord";
    case ErrorCode::LayerMissing: return "LayerMissing";
    case ErrorCode::MethodUnavailableForMode: return "MethodUnavailableForMode";
    case ErrorCode::DegenerateRecord: return "DegenerateRecord";
    case ErrorCode::EmptySamples: return "EmptySamples";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyHistogram: return "EmptyHistogram";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::NoRelevant: return "NoRelevant";
    case ErrorCode::EmptyQueries: return "EmptyQueries";
    case ErrorCode::MissingCriterion: return "MissingCriterion";
    case ErrorCode::DuplicateUtterance: return "DuplicateUtterance";
    case ErrorCode::ServiceError: return "ServiceError";
    case ErrorCode::UnparseableResponse: return "UnparseableResponse";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::EmptyAnswer: return "EmptyAnswer";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::UnknownCorpus: return "UnknownCorpus";
    case ErrorCode::UnknownJob: return "UnknownJob";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace inbedder
