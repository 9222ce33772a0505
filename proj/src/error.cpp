#include "relzero/error.hpp"

namespace relzero {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::io: return "io error";
    case Errc::unsupported_format: return "unsupported format";
    case Errc::malformed: return "malformed input";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::out_of_range: return "out of range";
    case Errc::unreachable_target: return "unreachable target";
    case Errc::wrong_key: return "wrong key";
    case Errc::corrupt_payload: return "corrupt payload";
    case Errc::missing_record: return "missing record";
    case Errc::duplicate_record: return "duplicate record";
    case Errc::crc_mismatch: return "crc mismatch";
    case Errc::divergence: return "divergence";
    case Errc::degenerate_input: return "degenerate input";
  }
  return "unknown";
}

}  // namespace relzero
