#include "tiltrisk/schema.hpp"

#include <algorithm>

#include "tiltrisk/error.hpp"

namespace tiltrisk {

namespace {

using nlohmann::json;

bool has_type(const json& v, const std::string& type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    if (type == "integer") return v.is_number_integer();
    if (type == "number") return v.is_number();
    throw ConfigError("schema uses unsupported type '" + type + "'");
}

const json& resolve_ref(const json& root, const std::string& ref) {
    if (ref.rfind("#/", 0) != 0) throw ConfigError("only local schema references are supported: " + ref);
    return root.at(json::json_pointer(ref.substr(1)));
}

void check(const json& v, const json& schema, const json& root, const std::string& path,
           std::vector<std::string>& errors) {
    if (schema.contains("$ref")) {
        check(v, resolve_ref(root, schema["$ref"].get<std::string>()), root, path, errors);
        return;
    }
    const std::string where = path.empty() ? "/" : path;
    if (schema.contains("type")) {
        const json& t = schema["type"];
        const bool ok = t.is_array() ? std::any_of(t.begin(), t.end(), [&](const json& x) { return has_type(v, x); })
                                     : has_type(v, t.get<std::string>());
        if (!ok) {
            errors.push_back(where + ": expected type " + t.dump() + ", found " + v.type_name());
            return;
        }
    }
    if (schema.contains("const") && v != schema["const"]) {
        errors.push_back(where + ": expected " + schema["const"].dump());
    }
    if (schema.contains("enum")) {
        const json& e = schema["enum"];
        if (std::find(e.begin(), e.end(), v) == e.end()) errors.push_back(where + ": value " + v.dump() + " not allowed");
    }
    if (schema.contains("anyOf")) {
        const json& options = schema["anyOf"];
        const bool ok = std::any_of(options.begin(), options.end(), [&](const json& s) {
            std::vector<std::string> sub;
            check(v, s, root, path, sub);
            return sub.empty();
        });
        if (!ok) errors.push_back(where + ": matches none of the allowed alternatives");
    }
    if (schema.contains("minimum") && v.is_number() && v.get<double>() < schema["minimum"].get<double>()) {
        errors.push_back(where + ": value below minimum " + schema["minimum"].dump());
    }
    if (v.is_object()) {
        if (schema.contains("required")) {
            for (const auto& key : schema["required"]) {
                if (!v.contains(key.get<std::string>())) {
                    errors.push_back(where + ": missing required key '" + key.get<std::string>() + "'");
                }
            }
        }
        const json empty = json::object();
        const json& props = schema.contains("properties") ? schema["properties"] : empty;
        const bool closed = schema.contains("additionalProperties") && schema["additionalProperties"] == false;
        for (const auto& [key, value] : v.items()) {
            if (props.contains(key)) {
                check(value, props[key], root, path + "/" + key, errors);
            } else if (closed) {
                errors.push_back(where + ": unexpected key '" + key + "'");
            }
        }
    }
    if (v.is_array()) {
        if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>()) {
            errors.push_back(where + ": fewer than " + schema["minItems"].dump() + " items");
        }
        if (schema.contains("items")) {
            for (std::size_t k = 0; k < v.size(); ++k) {
                check(v[k], schema["items"], root, path + "/" + std::to_string(k), errors);
            }
        }
    }
}

}  // namespace

std::vector<std::string> schema_errors(const nlohmann::json& instance, const nlohmann::json& schema) {
    std::vector<std::string> errors;
    check(instance, schema, schema, "", errors);
    return errors;
}

}  // namespace tiltrisk
