#pragma once

#include <json.hpp>

#include <string>
#include <string_view>

namespace mrlab {

using Json = nlohmann::ordered_json;

/// Parses the TOML subset used by experiment files into a JSON object (key order preserved):
/// tables, dotted table headers, arrays of tables, dotted keys, basic and literal strings,
/// integers, floats (incl. inf/nan), booleans, nested (multi-line) arrays and inline tables.
/// Dates and multi-line strings are not supported. Errors throw InvalidArgument naming the line.
Json parse_toml(std::string_view text);

Json load_toml_file(const std::string& path);

}  // namespace mrlab
