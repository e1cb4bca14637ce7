#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace personaforge::service {

class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Violation {
  std::string path;  // JSON pointer into the document
  std::string message;
};

/// Validator for the JSON Schema subset used by the API schemas: type, enum,
/// const, properties, required, additionalProperties, items, minItems,
/// maxItems, minimum, maximum, minLength, maxLength, pattern, anyOf, oneOf and
/// local "#/definitions/..." references. Annotation keywords ($schema, $id,
/// title, description, definitions) are ignored; anything else is rejected
/// when the schema is loaded.
class Schema {
 public:
  explicit Schema(nlohmann::json document);

  std::vector<Violation> validate(const nlohmann::json& instance) const;
  bool accepts(const nlohmann::json& instance) const { return validate(instance).empty(); }
  const nlohmann::json& document() const { return document_; }

 private:
  void check_keywords(const nlohmann::json& node, const std::string& where) const;
  void validate_node(const nlohmann::json& schema, const nlohmann::json& instance,
                     const std::string& path, std::vector<Violation>& out) const;
  const nlohmann::json& resolve(const std::string& ref) const;

  nlohmann::json document_;
};

/// Schemas compiled into the library from api/schemas, keyed by file stem.
class SchemaCatalog {
 public:
  static const SchemaCatalog& builtin();

  const Schema& at(const std::string& name) const;
  std::vector<std::string> names() const;
  std::vector<Violation> validate(const std::string& name, const nlohmann::json& instance) const {
    return at(name).validate(instance);
  }

 private:
  std::map<std::string, Schema> schemas_;
};

/// Name -> schema text pairs generated at build time.
const std::map<std::string, std::string>& embedded_schema_sources();

}  // namespace personaforge::service
