#pragma once

#include <string_view>

namespace alterforge::detail {

// Data files compiled into the library (prompt templates, stopword list).
// Returns an empty view for unknown names.
std::string_view embedded_resource(std::string_view name);

}  // namespace alterforge::detail
