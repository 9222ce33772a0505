#pragma once

#include <stdexcept>
#include <string>

namespace relzero {

enum class Errc {
  invalid_argument,
  io,
  unsupported_format,
  malformed,
  dimension_mismatch,
  out_of_range,
  unreachable_target,
  wrong_key,
  corrupt_payload,
  missing_record,
  duplicate_record,
  crc_mismatch,
  divergence,
  degenerate_input,
};

const char* errc_name(Errc code) noexcept;

// Every failure in the library surfaces as this exception; code() lets
// callers (and the CLI exit-code mapping) branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace relzero
