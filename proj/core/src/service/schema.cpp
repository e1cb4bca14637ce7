#include "personaforge/service/schema.hpp"

#include <cmath>
#include <regex>
#include <set>

namespace personaforge::service {

using nlohmann::json;

namespace {

const std::set<std::string>& supported_keywords() {
  static const std::set<std::string> k = {
      "$schema", "$id", "title", "description", "definitions", "$ref", "type", "enum", "const",
      "properties", "required", "additionalProperties", "items", "minItems", "maxItems",
      "minimum", "maximum", "minLength", "maxLength", "pattern", "anyOf", "oneOf"};
  return k;
}

bool has_type(const json& instance, const std::string& type) {
  if (type == "object") return instance.is_object();
  if (type == "array") return instance.is_array();
  if (type == "string") return instance.is_string();
  if (type == "boolean") return instance.is_boolean();
  if (type == "null") return instance.is_null();
  if (type == "number") return instance.is_number();
  if (type == "integer") {
    if (instance.is_number_integer()) return true;
    if (!instance.is_number_float()) return false;
    const double v = instance.get<double>();
    return std::isfinite(v) && std::floor(v) == v;
  }
  throw SchemaError("unknown type '" + type + "'");
}

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

}  // namespace

Schema::Schema(json document) : document_(std::move(document)) {
  if (!document_.is_object()) throw SchemaError("schema must be an object");
  check_keywords(document_, "#");
}

void Schema::check_keywords(const json& node, const std::string& where) const {
  if (node.is_boolean()) return;
  if (!node.is_object()) throw SchemaError(where + ": subschema must be an object or boolean");
  for (const auto& [key, value] : node.items()) {
    if (!supported_keywords().count(key)) {
      throw SchemaError(where + ": unsupported keyword '" + key + "'");
    }
    if (key == "properties" || key == "definitions") {
      for (const auto& [name, sub] : value.items()) check_keywords(sub, where + "/" + key + "/" + name);
    } else if (key == "items" || (key == "additionalProperties" && value.is_object())) {
      check_keywords(value, where + "/" + key);
    } else if (key == "anyOf" || key == "oneOf") {
      for (std::size_t i = 0; i < value.size(); ++i) check_keywords(value[i], where + "/" + key + "/" + std::to_string(i));
    } else if (key == "$ref") {
      resolve(value.get<std::string>());
    } else if (key == "pattern") {
      std::regex(value.get<std::string>(), std::regex::ECMAScript);
    }
  }
}

const json& Schema::resolve(const std::string& ref) const {
  const std::string prefix = "#/definitions/";
  if (ref.rfind(prefix, 0) != 0) throw SchemaError("only local definition references are supported: " + ref);
  const std::string name = ref.substr(prefix.size());
  const auto defs = document_.find("definitions");
  if (defs == document_.end() || !defs->contains(name)) throw SchemaError("unresolved reference " + ref);
  return (*defs)[name];
}

std::vector<Violation> Schema::validate(const json& instance) const {
  std::vector<Violation> out;
  validate_node(document_, instance, "", out);
  return out;
}

void Schema::validate_node(const json& schema, const json& instance, const std::string& path,
                           std::vector<Violation>& out) const {
  const std::string at = path.empty() ? "/" : path;
  if (schema.is_boolean()) {
    if (!schema.get<bool>()) out.push_back({at, "no value is allowed here"});
    return;
  }
  if (const auto ref = schema.find("$ref"); ref != schema.end()) {
    validate_node(resolve(ref->get<std::string>()), instance, path, out);
  }
  if (const auto type = schema.find("type"); type != schema.end()) {
    bool ok = false;
    if (type->is_array()) {
      for (const auto& t : *type) ok = ok || has_type(instance, t.get<std::string>());
    } else {
      ok = has_type(instance, type->get<std::string>());
    }
    if (!ok) {
      out.push_back({at, "expected type " + type->dump()});
      return;
    }
  }
  if (const auto e = schema.find("enum"); e != schema.end()) {
    if (std::find(e->begin(), e->end(), instance) == e->end()) {
      out.push_back({at, "value " + instance.dump() + " is not one of " + e->dump()});
    }
  }
  if (const auto c = schema.find("const"); c != schema.end() && *c != instance) {
    out.push_back({at, "value must equal " + c->dump()});
  }
  if (instance.is_number()) {
    const double v = instance.get<double>();
    if (const auto m = schema.find("minimum"); m != schema.end() && v < m->get<double>()) {
      out.push_back({at, "value " + instance.dump() + " is below the minimum " + m->dump()});
    }
    if (const auto m = schema.find("maximum"); m != schema.end() && v > m->get<double>()) {
      out.push_back({at, "value " + instance.dump() + " is above the maximum " + m->dump()});
    }
  }
  if (instance.is_string()) {
    const std::string& s = instance.get_ref<const std::string&>();
    if (const auto m = schema.find("minLength"); m != schema.end() && utf8_length(s) < m->get<std::size_t>()) {
      out.push_back({at, "string shorter than " + m->dump()});
    }
    if (const auto m = schema.find("maxLength"); m != schema.end() && utf8_length(s) > m->get<std::size_t>()) {
      out.push_back({at, "string longer than " + m->dump()});
    }
    if (const auto p = schema.find("pattern"); p != schema.end()) {
      if (!std::regex_search(s, std::regex(p->get<std::string>(), std::regex::ECMAScript))) {
        out.push_back({at, "string does not match " + p->dump()});
      }
    }
  }
  if (instance.is_array()) {
    if (const auto m = schema.find("minItems"); m != schema.end() && instance.size() < m->get<std::size_t>()) {
      out.push_back({at, "fewer than " + m->dump() + " items"});
    }
    if (const auto m = schema.find("maxItems"); m != schema.end() && instance.size() > m->get<std::size_t>()) {
      out.push_back({at, "more than " + m->dump() + " items"});
    }
    if (const auto items = schema.find("items"); items != schema.end()) {
      for (std::size_t i = 0; i < instance.size(); ++i) {
        validate_node(*items, instance[i], path + "/" + std::to_string(i), out);
      }
    }
  }
  if (instance.is_object()) {
    const auto props = schema.find("properties");
    if (const auto req = schema.find("required"); req != schema.end()) {
      for (const auto& name : *req) {
        if (!instance.contains(name.get<std::string>())) {
          out.push_back({at, "missing required property '" + name.get<std::string>() + "'"});
        }
      }
    }
    const auto extra = schema.find("additionalProperties");
    for (const auto& [key, value] : instance.items()) {
      const std::string child = path + "/" + escape_pointer(key);
      if (props != schema.end() && props->contains(key)) {
        validate_node((*props)[key], value, child, out);
      } else if (extra != schema.end()) {
        if (extra->is_boolean() && !extra->get<bool>()) {
          out.push_back({child, "property '" + key + "' is not allowed"});
        } else if (extra->is_object()) {
          validate_node(*extra, value, child, out);
        }
      }
    }
  }
  if (const auto any = schema.find("anyOf"); any != schema.end()) {
    bool ok = false;
    for (const auto& sub : *any) {
      std::vector<Violation> trial;
      validate_node(sub, instance, path, trial);
      ok = ok || trial.empty();
    }
    if (!ok) out.push_back({at, "value matches none of the anyOf alternatives"});
  }
  if (const auto one = schema.find("oneOf"); one != schema.end()) {
    int hits = 0;
    for (const auto& sub : *one) {
      std::vector<Violation> trial;
      validate_node(sub, instance, path, trial);
      hits += trial.empty();
    }
    if (hits != 1) out.push_back({at, "value matches " + std::to_string(hits) + " oneOf alternatives, expected 1"});
  }
}

const SchemaCatalog& SchemaCatalog::builtin() {
  static const SchemaCatalog catalog = [] {
    SchemaCatalog c;
    for (const auto& [name, text] : embedded_schema_sources()) {
      try {
        c.schemas_.emplace(name, Schema(json::parse(text)));
      } catch (const std::exception& e) {
        throw SchemaError("schema " + name + ": " + e.what());
      }
    }
    return c;
  }();
  return catalog;
}

const Schema& SchemaCatalog::at(const std::string& name) const {
  const auto it = schemas_.find(name);
  if (it == schemas_.end()) throw std::out_of_range("unknown schema: " + name);
  return it->second;
}

std::vector<std::string> SchemaCatalog::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : schemas_) out.push_back(name);
  return out;
}

}  // namespace personaforge::service
