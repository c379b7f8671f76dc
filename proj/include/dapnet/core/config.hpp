// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <json.hpp>

#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "dapnet/core/error.hpp"

namespace dapnet::core {

// Flat table of dotted config keys bound to fields of a config struct.
template <class T>
class FieldTable {
 public:
  struct Field {
    std::string key;
    std::string doc;
    std::function<nlohmann::json(const T&)> get;
    std::function<void(T&, const nlohmann::json&)> set;
  };

  // `access` maps T& to a reference of the bound field.
  template <class Access>
  void add(std::string key, std::string doc, Access access) {
    using V = std::remove_reference_t<decltype(access(std::declval<T&>()))>;
    Field f;
    f.key = key;
    f.doc = std::move(doc);
    f.get = [access](const T& c) { return nlohmann::json(access(const_cast<T&>(c))); };
    f.set = [access, key](T& c, const nlohmann::json& v) {
      if constexpr (std::is_same_v<V, bool>) {
        if (!v.is_boolean()) throw ConfigError("config key '" + key + "' expects true/false");
      } else if constexpr (std::is_integral_v<V>) {
        if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' expects an integer");
        if (std::is_unsigned_v<V> && v.get<long long>() < 0) {
          throw ConfigError("config key '" + key + "' expects a non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<V>) {
        if (!v.is_number()) throw ConfigError("config key '" + key + "' expects a number");
      } else {
        if (!v.is_string()) throw ConfigError("config key '" + key + "' expects a string");
      }
      access(c) = v.get<V>();
    };
    fields_.push_back(std::move(f));
  }

  // Field stored as text through explicit conversions (enums).
  template <class Get, class Set>
  void add_text(std::string key, std::string doc, Get get, Set set) {
    Field f;
    f.key = key;
    f.doc = std::move(doc);
    f.get = [get](const T& c) { return nlohmann::json(std::string(get(c))); };
    f.set = [set, key](T& c, const nlohmann::json& v) {
      if (!v.is_string()) throw ConfigError("config key '" + key + "' expects a string");
      set(c, v.get<std::string>());
    };
    fields_.push_back(std::move(f));
  }

  const std::vector<Field>& fields() const { return fields_; }

  const Field* find(const std::string& key) const {
    for (const auto& f : fields_) {
      if (f.key == key) return &f;
    }
    return nullptr;
  }

  // Returns false when the key is not in this table.
  bool apply(T& c, const std::string& key, const nlohmann::json& value) const {
    const Field* f = find(key);
    if (f == nullptr) return false;
    f->set(c, value);
    return true;
  }

  nlohmann::json to_json(const T& c) const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& f : fields_) out[f.key] = f.get(c);
    return out;
  }

  // Every key of `flat` must be known.
  T from_json(const nlohmann::json& flat, T base = T{}) const {
    for (const auto& [k, v] : flat.items()) {
      if (!apply(base, k, v)) throw ConfigError("unknown config key '" + k + "'");
    }
    return base;
  }

 private:
  std::vector<Field> fields_;
};

// {"a": {"b": 1}} -> {"a.b": 1}. Arrays are kept as values.
nlohmann::json flatten_json(const nlohmann::json& nested);

// Parses a command-line value: JSON literal when it parses, else a string.
nlohmann::json parse_cli_value(const std::string& text);

}  // namespace dapnet::core
