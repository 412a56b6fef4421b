#include "exhaz/error.hpp"

namespace exhaz {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::NegativeRate: return "NegativeRate";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::UnknownStratum: return "UnknownStratum";
    case ErrorCode::ZeroHazardPath: return "ZeroHazardPath";
    case ErrorCode::NumericalOverflow: return "NumericalOverflow";
    case ErrorCode::NonFiniteLikelihood: return "NonFiniteLikelihood";
    case ErrorCode::NonPositive: return "NonPositive";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SEsUnavailable: return "SEsUnavailable";
    case ErrorCode::NoEligibleFit: return "NoEligibleFit";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace exhaz
