// Copyright 2026 The doalab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <initializer_list>
#include <json.hpp>
#include <string>
#include <string_view>

#include "doalab/error.hpp"

namespace doalab::detail {

using json = nlohmann::json;

// Unknown keys are configuration errors; all of them are reported at once.
inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                       std::string_view where) {
  if (!j.is_object()) throw Error(std::string(where) + " must be a JSON object");
  std::string unknown;
  for (const auto& item : j.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || item.key() == a;
    if (!ok) unknown += (unknown.empty() ? "" : ", ") + item.key();
  }
  if (!unknown.empty()) throw Error("unknown keys in " + std::string(where) + ": " + unknown);
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

inline json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error("invalid JSON in " + std::string(what) + ": " + e.what());
  }
}

}  // namespace doalab::detail
