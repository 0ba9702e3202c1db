#pragma once

#include <ostream>
#include <string>

#include <json.hpp>

namespace cotransport {

using Json = nlohmann::json;

/// Sorted keys, floats as %.17g, non-finite floats as null. indent < 0 gives
/// a single line.
std::string canonical_dump(const Json& value, int indent = -1);
void write_canonical(std::ostream& out, const Json& value, int indent = -1);

// %.17g
std::string format_double(double v);

}  // namespace cotransport
