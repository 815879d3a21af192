#include "embprobe/schema.hpp"

#include "embedded_schemas.hpp"
#include "embprobe/error.hpp"

namespace embprobe {

using json = nlohmann::json;

namespace {

bool has_type(const json& doc, const std::string& type) {
  if (type == "object") return doc.is_object();
  if (type == "array") return doc.is_array();
  if (type == "string") return doc.is_string();
  if (type == "integer") return doc.is_number_integer();
  if (type == "number") return doc.is_number();
  if (type == "boolean") return doc.is_boolean();
  if (type == "null") return doc.is_null();
  return false;
}

class Checker {
 public:
  explicit Checker(const json& root) : root_(root) {}

  void check(const json& schema, const json& doc, const std::string& where) {
    if (schema.contains("$ref")) {
      const auto ref = schema["$ref"].get<std::string>();
      const std::string prefix = "#/$defs/";
      if (!ref.starts_with(prefix) || !root_.contains("$defs") ||
          !root_["$defs"].contains(ref.substr(prefix.size()))) {
        errors.push_back(where + ": unresolved $ref " + ref);
        return;
      }
      check(root_["$defs"][ref.substr(prefix.size())], doc, where);
      return;
    }
    if (schema.contains("type")) {
      const auto& t = schema["type"];
      bool ok = false;
      if (t.is_array()) {
        for (const auto& alt : t) ok = ok || has_type(doc, alt.get<std::string>());
      } else {
        ok = has_type(doc, t.get<std::string>());
      }
      if (!ok) {
        errors.push_back(where + ": expected type " + t.dump() + ", got " + doc.type_name());
        return;
      }
    }
    if (schema.contains("enum")) {
      bool found = false;
      for (const auto& v : schema["enum"]) found = found || v == doc;
      if (!found) errors.push_back(where + ": value " + doc.dump() + " not in enum");
    }
    if (doc.is_number()) {
      if (schema.contains("minimum") && doc.get<double>() < schema["minimum"].get<double>()) {
        errors.push_back(where + ": below minimum");
      }
      if (schema.contains("maximum") && doc.get<double>() > schema["maximum"].get<double>()) {
        errors.push_back(where + ": above maximum");
      }
    }
    if (doc.is_object()) {
      if (schema.contains("required")) {
        for (const auto& key : schema["required"]) {
          if (!doc.contains(key.get<std::string>())) {
            errors.push_back(where + ": missing required '" + key.get<std::string>() + "'");
          }
        }
      }
      const json props = schema.value("properties", json::object());
      const bool closed = schema.contains("additionalProperties") &&
                          schema["additionalProperties"].is_boolean() &&
                          !schema["additionalProperties"].get<bool>();
      for (const auto& [key, value] : doc.items()) {
        if (props.contains(key)) {
          check(props[key], value, where + "." + key);
        } else if (closed) {
          errors.push_back(where + ": unknown key '" + key + "'");
        }
      }
    }
    if (doc.is_array()) {
      if (schema.contains("minItems") && doc.size() < schema["minItems"].get<std::size_t>()) {
        errors.push_back(where + ": fewer than minItems");
      }
      if (schema.contains("maxItems") && doc.size() > schema["maxItems"].get<std::size_t>()) {
        errors.push_back(where + ": more than maxItems");
      }
      if (schema.contains("items")) {
        for (std::size_t i = 0; i < doc.size(); ++i) {
          check(schema["items"], doc[i], where + "[" + std::to_string(i) + "]");
        }
      }
    }
  }

  std::vector<std::string> errors;

 private:
  const json& root_;
};

}  // namespace

std::vector<std::string> schema_errors(const json& schema, const json& doc) {
  Checker c(schema);
  c.check(schema, doc, "$");
  return std::move(c.errors);
}

const json& api_schema() {
  static const json schema = json::parse(detail::kApiSchemaText);
  return schema;
}

const json& config_schema() {
  static const json schema = json::parse(detail::kConfigSchemaText);
  return schema;
}

std::vector<std::string> api_payload_errors(const std::string& definition, const json& doc) {
  const auto& root = api_schema();
  if (!root["$defs"].contains(definition)) {
    throw ValidationError("api schema has no definition '" + definition + "'");
  }
  Checker c(root);
  c.check(root["$defs"][definition], doc, "$");
  return std::move(c.errors);
}

}  // namespace embprobe
