#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sonder {

enum class ErrorCode {
  InvalidInput,
  InvalidConfig,
  ProviderUnavailable,
  DimensionMismatch,
  DegenerateVector,
  EmptyCorpus,
  DegenerateWeights,
  InvalidLambda,
  ParseError,
  DuplicateRank,
  InvalidRecord,
  NotFound,
  CorruptStore,
  NoConvergence,
  EmptyInput,
  RankDeficient,
  InvalidResponse,
  DegenerateDistribution,
  EmptyArm,
};

std::string_view to_string(ErrorCode code) noexcept;

// Base for every error raised by the library. Callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sonder
