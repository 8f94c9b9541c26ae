#include "alterforge/error.hpp"

namespace alterforge {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::unknown_axis: return "unknown_axis";
    case Errc::value_range: return "value_range";
    case Errc::duration_range: return "duration_range";
    case Errc::empty_script: return "empty_script";
    case Errc::invalid_script: return "invalid_script";
    case Errc::trace_too_long: return "trace_too_long";
    case Errc::unknown_segment: return "unknown_segment";
    case Errc::transport: return "transport";
    case Errc::empty_completion: return "empty_completion";
    case Errc::too_many_lines: return "too_many_lines";
    case Errc::compile_failed: return "compile_failed";
    case Errc::missing_fixture: return "missing_fixture";
    case Errc::unknown_record: return "unknown_record";
    case Errc::storage_io: return "storage_io";
    case Errc::schema_version_mismatch: return "schema_version_mismatch";
    case Errc::degenerate_input: return "degenerate_input";
    case Errc::degenerate_rank: return "degenerate_rank";
    case Errc::invalid_state: return "invalid_state";
    case Errc::conflict: return "conflict";
    case Errc::malformed: return "malformed";
  }
  return "unknown";
}

}  // namespace alterforge
