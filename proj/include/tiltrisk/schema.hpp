#pragma once

// Validation against the subset of JSON Schema used by the shipped report
// schema: type, const, enum, required, properties, additionalProperties
// (boolean), items, minItems, minimum, anyOf and local $ref.

#include <string>
#include <vector>

#include "json.hpp"

namespace tiltrisk {

// One message per violation, prefixed with the JSON pointer of the value.
std::vector<std::string> schema_errors(const nlohmann::json& instance, const nlohmann::json& schema);

}  // namespace tiltrisk
