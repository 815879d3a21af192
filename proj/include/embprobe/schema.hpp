#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace embprobe {

// Checks `doc` against a JSON Schema subset: type, properties, required,
// additionalProperties (bool), items, enum, minimum, maximum, minItems,
// maxItems and local "$ref": "#/$defs/name". Returns one message per
// violation, empty when valid.
std::vector<std::string> schema_errors(const nlohmann::json& schema, const nlohmann::json& doc);

// Checked-in schemas compiled into the library.
const nlohmann::json& api_schema();
const nlohmann::json& config_schema();

// Validates `doc` against api_schema()["$defs"][definition].
std::vector<std::string> api_payload_errors(const std::string& definition,
                                            const nlohmann::json& doc);

}  // namespace embprobe
