#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftbench/errors.hpp"
#include "shiftbench/jsonio.hpp"

namespace shiftbench {

// The K finite attribute sets plus the designated label / nuisance roles.
// Immutable after construction; records reference values by index only.
struct AttributeSchema {
  struct Attribute {
    std::string name;
    std::vector<std::string> values;
  };

  std::vector<Attribute> attributes;
  size_t label_index = 0;
  size_t nuisance_index = 0;

  size_t num_attributes() const { return attributes.size(); }

  size_t cardinality(size_t k) const {
    if (k >= attributes.size()) throw AxisError("attribute index out of range");
    return attributes[k].values.size();
  }

  size_t num_label_values() const { return cardinality(label_index); }
  size_t num_nuisance_values() const { return cardinality(nuisance_index); }

  void validate() const {
    if (attributes.empty()) throw SchemaError("no attributes");
    std::set<std::string> attr_names;
    for (const auto& a : attributes) {
      if (a.name.empty()) throw SchemaError("empty attribute name");
      if (!attr_names.insert(a.name).second)
        throw SchemaError("duplicate attribute name: " + a.name);
      if (a.values.empty())
        throw SchemaError("empty value set for attribute: " + a.name);
      std::set<std::string> names;
      for (const auto& v : a.values) {
        if (!names.insert(v).second)
          throw SchemaError("duplicate value '" + v + "' in attribute: " + a.name);
      }
    }
    if (label_index >= attributes.size())
      throw SchemaError("label_index out of range");
    if (nuisance_index >= attributes.size())
      throw SchemaError("nuisance_index out of range");
    if (label_index == nuisance_index)
      throw SchemaError("label_index equals nuisance_index");
  }

  // Same attribute sets with different label/nuisance roles.
  AttributeSchema with_roles(size_t label, size_t nuisance) const {
    AttributeSchema out = *this;
    out.label_index = label;
    out.nuisance_index = nuisance;
    out.validate();
    return out;
  }

  static AttributeSchema from_json(const std::string& text) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("schema JSON: ") + e.what());
    }
    AttributeSchema schema;
    try {
      for (const auto& a : doc.at("attributes")) {
        Attribute attr;
        attr.name = a.at("name").get<std::string>();
        for (const auto& v : a.at("values")) attr.values.push_back(v.get<std::string>());
        schema.attributes.push_back(std::move(attr));
      }
      long long l = doc.at("label_index").get<long long>();
      long long n = doc.at("nuisance_index").get<long long>();
      if (l < 0 || n < 0) throw SchemaError("negative attribute role index");
      schema.label_index = static_cast<size_t>(l);
      schema.nuisance_index = static_cast<size_t>(n);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("schema JSON: ") + e.what());
    }
    schema.validate();
    return schema;
  }

  std::string to_json() const {
    std::string out = "{\"attributes\":[";
    for (size_t k = 0; k < attributes.size(); ++k) {
      if (k) out += ',';
      out += "{\"name\":\"" + json_escape(attributes[k].name) + "\",\"values\":[";
      for (size_t v = 0; v < attributes[k].values.size(); ++v) {
        if (v) out += ',';
        out += '"' + json_escape(attributes[k].values[v]) + '"';
      }
      out += "]}";
    }
    out += "],\"label_index\":" + std::to_string(label_index);
    out += ",\"nuisance_index\":" + std::to_string(nuisance_index) + "}";
    return out;
  }
};

inline AttributeSchema load_schema(const std::string& json_text) {
  return AttributeSchema::from_json(json_text);
}

}  // namespace shiftbench
