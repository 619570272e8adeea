// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "driftguard/error.hpp"

namespace driftguard::model {

enum class InputArity { kOneSegment, kTwoSegment };
enum class PrimaryMetric { kAccuracy, kF1Binary, kF1Macro };

inline std::string_view to_string(InputArity a) {
  return a == InputArity::kOneSegment ? "one-segment" : "two-segment";
}
inline InputArity parse_arity(std::string_view s) {
  if (s == "one-segment") return InputArity::kOneSegment;
  if (s == "two-segment") return InputArity::kTwoSegment;
  throw InvalidInput("unknown input arity '" + std::string(s) + "'");
}

inline std::string_view to_string(PrimaryMetric m) {
  switch (m) {
    case PrimaryMetric::kAccuracy: return "accuracy";
    case PrimaryMetric::kF1Binary: return "f1_binary";
    case PrimaryMetric::kF1Macro: return "f1_macro";
  }
  return "accuracy";
}
inline PrimaryMetric parse_metric(std::string_view s) {
  if (s == "accuracy") return PrimaryMetric::kAccuracy;
  if (s == "f1_binary") return PrimaryMetric::kF1Binary;
  if (s == "f1_macro") return PrimaryMetric::kF1Macro;
  throw InvalidInput("unknown metric '" + std::string(s) + "'");
}

/// Static description of one classification task.
struct TaskSpec {
  std::string task_id;
  std::vector<std::string> label_names;
  InputArity input_arity = InputArity::kOneSegment;
  PrimaryMetric primary_metric = PrimaryMetric::kAccuracy;
  /// Labeled splits reported after every stage ("test", or "matched" and
  /// "mismatched" for multi-genre NLI style tasks).
  std::vector<std::string> eval_splits{"test"};
  /// Class treated as positive by f1_binary.
  std::size_t positive_label = 1;

  std::size_t class_count() const { return label_names.size(); }

  std::optional<std::size_t> label_index(std::string_view name) const {
    const auto it = std::find(label_names.begin(), label_names.end(), name);
    if (it == label_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - label_names.begin());
  }

  void validate() const {
    if (task_id.empty()) throw InvalidInput("task_id must be nonempty");
    if (label_names.size() < 2) {
      throw InvalidInput("task '" + task_id + "' needs at least 2 labels");
    }
    if (std::set<std::string>(label_names.begin(), label_names.end()).size() !=
        label_names.size()) {
      throw InvalidInput("task '" + task_id + "' has duplicate label names");
    }
    if (eval_splits.empty()) throw InvalidInput("task '" + task_id + "' has no eval splits");
    for (const auto& s : eval_splits) {
      if (s == "train" || s == "dev" || s == "unlabeled") {
        throw InvalidInput("eval split name '" + s + "' is reserved");
      }
    }
    if (positive_label >= label_names.size()) {
      throw InvalidInput("task '" + task_id + "' positive_label out of range");
    }
  }

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

}  // namespace driftguard::model
