#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace selclust {

enum class ErrorCode {
  config,               // bad command line or configuration
  data,                 // malformed input data
  invalid_pair,         // clusters overlap, out of range, or not in the clustering
  invalid_contrast,     // zero contrast vector
  degenerate_direction, // zero difference in cluster means
  degenerate_support,   // truncation set carries no probability mass
  unstable_estimate,    // Monte Carlo estimate has no surviving samples
  not_positive_definite,
  unsupported_linkage,
};

std::string_view to_string(ErrorCode code);

/// Process exit code for an error: 2 config, 3 data, 4 numerical degeneracy.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace selclust
