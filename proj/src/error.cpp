#include "itelab/error.hpp"

namespace itelab {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IllegalAction: return "IllegalAction";
    case ErrorCode::IllegalMove: return "IllegalMove";
    case ErrorCode::MalformedPathway: return "MalformedPathway";
    case ErrorCode::BucketInfeasible: return "BucketInfeasible";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoCorruptionPossible: return "NoCorruptionPossible";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::InconsistentBuckets: return "InconsistentBuckets";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace itelab
