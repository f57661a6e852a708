#pragma once

#include <string>

#include "json.hpp"

namespace squeezelab {

/// Round-trip text for a double: 17 significant digits, `%.17g`.
std::string format_double(double x);

/// JSON text with every floating-point number written by format_double.
/// Non-finite numbers become null. indent < 0 gives a single line.
std::string dump_json(const nlohmann::json& value, int indent = -1);

}  // namespace squeezelab
