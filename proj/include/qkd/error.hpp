#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qkd {

enum class ErrorCode {
  domain,                  // argument outside its mathematical domain
  statistics_insufficient, // finite-size corrected decoy rate is not positive
  no_single_photon_bound,  // single-photon yield bound is not positive
  unidentifiable,          // fit data cannot determine the model
  insufficient_scan_range, // fringe scan does not cover a full period
  config_mismatch,         // tallies from different configurations
  parse,                   // malformed input text
  validation,              // value violates a type invariant
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qkd
