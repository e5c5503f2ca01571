#include "sonder/error.hpp"

namespace sonder {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateVector: return "DegenerateVector";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::InvalidLambda: return "InvalidLambda";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateRank: return "DuplicateRank";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::CorruptStore: return "CorruptStore";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InvalidResponse: return "InvalidResponse";
    case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::EmptyArm: return "EmptyArm";
  }
  return "Unknown";
}

}  // namespace sonder
