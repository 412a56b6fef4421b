#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace exhaz {

enum class ErrorCode {
  MalformedRow,
  MissingCell,
  NegativeRate,
  DuplicateCell,
  UnknownStratum,
  ZeroHazardPath,
  NumericalOverflow,
  NonFiniteLikelihood,
  NonPositive,
  DimensionMismatch,
  SEsUnavailable,
  NoEligibleFit,
  TargetUnreachable,
  Config,
  Io,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the likelihood when a per-patient term is NaN/Inf.
class NonFiniteLikelihood : public Error {
 public:
  NonFiniteLikelihood(std::size_t index, const std::string& what)
      : Error(ErrorCode::NonFiniteLikelihood, what), index_(index) {}

  std::size_t patient_index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace exhaz
