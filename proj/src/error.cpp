#include "selclust/error.hpp"

namespace selclust {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::config: return "config_error";
    case ErrorCode::data: return "data_error";
    case ErrorCode::invalid_pair: return "invalid_pair";
    case ErrorCode::invalid_contrast: return "invalid_contrast";
    case ErrorCode::degenerate_direction: return "degenerate_direction";
    case ErrorCode::degenerate_support: return "degenerate_support";
    case ErrorCode::unstable_estimate: return "unstable_estimate";
    case ErrorCode::not_positive_definite: return "not_positive_definite";
    case ErrorCode::unsupported_linkage: return "unsupported_linkage";
  }
  return "unknown";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::unsupported_linkage:
      return 2;
    case ErrorCode::data:
    case ErrorCode::invalid_pair:
      return 3;
    case ErrorCode::invalid_contrast:
    case ErrorCode::degenerate_direction:
    case ErrorCode::degenerate_support:
    case ErrorCode::unstable_estimate:
    case ErrorCode::not_positive_definite:
      return 4;
  }
  return 1;
}

}  // namespace selclust
