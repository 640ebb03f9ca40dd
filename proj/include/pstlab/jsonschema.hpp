#pragma once

// Small structural validator for the JSON schemas shipped under schema/.
// Supports the subset those schemas use: type, enum, required, properties,
// additionalProperties (boolean), items (single schema), minItems, maxItems,
// minimum, maximum. Returns human-readable path-prefixed problems instead of
// throwing, so callers can report every mismatch at once.

#include <string>
#include <vector>

#include <json.hpp>

namespace pstlab::jsonschema {

namespace detail {

inline bool type_matches(const std::string& type, const nlohmann::json& value) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "null") return value.is_null();
    if (type == "integer") return value.is_number_integer();
    if (type == "number") return value.is_number();
    return false;
}

inline void validate_into(const nlohmann::json& schema, const nlohmann::json& value,
                          const std::string& path, std::vector<std::string>& problems) {
    const std::string where = path.empty() ? "<root>" : path;

    if (schema.contains("type")) {
        const auto& type = schema["type"];
        bool ok = false;
        if (type.is_string()) {
            ok = type_matches(type.get<std::string>(), value);
        } else {
            for (const auto& t : type)
                ok = ok || type_matches(t.get<std::string>(), value);
        }
        if (!ok) {
            problems.push_back(where + ": expected type " + type.dump() + ", got " +
                               value.type_name());
            return;  // further checks would only repeat the mismatch
        }
    }

    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& allowed : schema["enum"]) ok = ok || allowed == value;
        if (!ok)
            problems.push_back(where + ": value " + value.dump() + " not in enum " +
                               schema["enum"].dump());
    }

    if (value.is_number()) {
        if (schema.contains("minimum") &&
            value.get<double>() < schema["minimum"].get<double>())
            problems.push_back(where + ": value below minimum " +
                               schema["minimum"].dump());
        if (schema.contains("maximum") &&
            value.get<double>() > schema["maximum"].get<double>())
            problems.push_back(where + ": value above maximum " +
                               schema["maximum"].dump());
    }

    if (value.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema["required"])
                if (!value.contains(key.get<std::string>()))
                    problems.push_back(where + ": missing required key '" +
                                       key.get<std::string>() + "'");
        const bool closed = schema.contains("additionalProperties") &&
                            schema["additionalProperties"].is_boolean() &&
                            !schema["additionalProperties"].get<bool>();
        const nlohmann::json props =
            schema.contains("properties") ? schema["properties"] : nlohmann::json::object();
        for (const auto& [key, child] : value.items()) {
            if (props.contains(key))
                validate_into(props[key], child, path + "/" + key, problems);
            else if (closed)
                problems.push_back(where + ": unexpected key '" + key + "'");
        }
    }

    if (value.is_array()) {
        if (schema.contains("minItems") &&
            value.size() < schema["minItems"].get<std::size_t>())
            problems.push_back(where + ": fewer than " + schema["minItems"].dump() +
                               " items");
        if (schema.contains("maxItems") &&
            value.size() > schema["maxItems"].get<std::size_t>())
            problems.push_back(where + ": more than " + schema["maxItems"].dump() +
                               " items");
        if (schema.contains("items")) {
            std::size_t i = 0;
            for (const auto& child : value)
                validate_into(schema["items"], child, path + "/" + std::to_string(i++),
                              problems);
        }
    }
}

}  // namespace detail

/// All schema violations of `value`, empty when it conforms.
inline std::vector<std::string> validate(const nlohmann::json& schema,
                                         const nlohmann::json& value) {
    std::vector<std::string> problems;
    detail::validate_into(schema, value, "", problems);
    return problems;
}

}  // namespace pstlab::jsonschema
