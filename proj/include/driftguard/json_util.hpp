// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "driftguard/error.hpp"
#include "driftguard/model/task_spec.hpp"

namespace driftguard {

using json = nlohmann::json;

/// Strict reader over a JSON object: every access names its location and
/// leftover keys can be rejected. `E` is the error type thrown on mismatch.
template <typename E>
class JsonReader {
 public:
  JsonReader(const json& j, std::string location) : j_(j), location_(std::move(location)) {
    if (!j_.is_object()) fail("expected an object");
  }

  const std::string& location() const { return location_; }
  bool has(std::string_view key) const { return j_.contains(key); }

  const json& at(std::string_view key) const {
    if (!j_.contains(key)) fail("missing field '" + std::string(key) + "'");
    return j_.at(std::string(key));
  }

  template <typename T>
  T get(std::string_view key) const {
    const json& v = at(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      fail("field '" + std::string(key) + "' has the wrong type");
    }
  }

  template <typename T>
  T get_or(std::string_view key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  JsonReader child(std::string_view key) const { return JsonReader(at(key), path(key)); }
  std::string path(std::string_view key) const { return location_ + "." + std::string(key); }

  void only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [key, _] : j_.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        fail("unknown field '" + key + "'");
      }
    }
  }

  [[noreturn]] void fail(const std::string& what) const { throw E(location_ + ": " + what); }

 private:
  const json& j_;
  std::string location_;
};

inline json task_spec_to_json(const model::TaskSpec& spec) {
  return json{{"task_id", spec.task_id},
              {"label_names", spec.label_names},
              {"input_arity", std::string(model::to_string(spec.input_arity))},
              {"primary_metric", std::string(model::to_string(spec.primary_metric))},
              {"eval_splits", spec.eval_splits},
              {"positive_label", spec.positive_label}};
}

template <typename E>
model::TaskSpec task_spec_from_json(const json& j, const std::string& location) {
  JsonReader<E> r(j, location);
  r.only({"task_id", "label_names", "input_arity", "primary_metric", "eval_splits",
          "positive_label"});
  model::TaskSpec spec;
  spec.task_id = r.template get<std::string>("task_id");
  spec.label_names = r.template get<std::vector<std::string>>("label_names");
  try {
    spec.input_arity = model::parse_arity(r.template get_or<std::string>("input_arity", "one-segment"));
    spec.primary_metric =
        model::parse_metric(r.template get_or<std::string>("primary_metric", "accuracy"));
    spec.eval_splits = r.template get_or<std::vector<std::string>>("eval_splits", {"test"});
    spec.positive_label = r.template get_or<std::size_t>("positive_label", 1);
    spec.validate();
  } catch (const InvalidInput& e) {
    r.fail(e.what());
  }
  return spec;
}

}  // namespace driftguard
