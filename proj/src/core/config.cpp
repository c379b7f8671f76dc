// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/core/config.hpp"

namespace dapnet::core {

namespace {

void flatten_into(const nlohmann::json& node, const std::string& prefix, nlohmann::json& out) {
  for (const auto& [k, v] : node.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten_into(v, key, out);
    } else {
      out[key] = v;
    }
  }
}

}  // namespace

nlohmann::json flatten_json(const nlohmann::json& nested) {
  if (!nested.is_object()) throw ConfigError("config root must be an object");
  nlohmann::json out = nlohmann::json::object();
  flatten_into(nested, "", out);
  return out;
}

nlohmann::json parse_cli_value(const std::string& text) {
  auto parsed = nlohmann::json::parse(text, nullptr, false);
  if (parsed.is_discarded()) return nlohmann::json(text);
  return parsed;
}

}  // namespace dapnet::core
