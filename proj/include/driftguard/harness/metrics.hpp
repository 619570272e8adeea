// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "driftguard/data/dataset.hpp"
#include "driftguard/error.hpp"
#include "driftguard/model/multi_head_model.hpp"

namespace driftguard::harness {

struct Metrics {
  double accuracy = 0.0;
  double f1_binary = 0.0;  // for the task's positive label
  double f1_macro = 0.0;
  std::vector<std::size_t> support;  // gold count per class
  std::size_t count = 0;

  double primary(model::PrimaryMetric m) const {
    switch (m) {
      case model::PrimaryMetric::kAccuracy: return accuracy;
      case model::PrimaryMetric::kF1Binary: return f1_binary;
      case model::PrimaryMetric::kF1Macro: return f1_macro;
    }
    return accuracy;
  }
};

/// Accuracy, positive-class F1 and macro F1 from paired labels. Per-class F1
/// is 0 when precision + recall is 0. The macro average runs over classes
/// that occur in the gold labels or the predictions.
inline Metrics compute_metrics(std::span<const std::size_t> gold, std::span<const std::size_t> predicted,
                               std::size_t classes, std::size_t positive) {
  if (gold.size() != predicted.size()) throw InvalidInput("metrics: gold and predicted lengths differ");
  if (gold.empty()) throw InvalidInput("metrics: empty evaluation set");
  if (positive >= classes) throw InvalidInput("metrics: positive label out of range");
  std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  Metrics m;
  m.support.assign(classes, 0);
  m.count = gold.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::size_t g = gold[i];
    const std::size_t p = predicted[i];
    if (g >= classes || p >= classes) throw InvalidInput("metrics: label index out of range");
    ++m.support[g];
    if (g == p) {
      ++correct;
      ++tp[g];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  auto f1 = [&](std::size_t c) {
    const double denom = 2.0 * static_cast<double>(tp[c]) + static_cast<double>(fp[c] + fn[c]);
    return denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
  };
  m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  m.f1_binary = f1(positive);
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;
    total += f1(c);
    ++present;
  }
  m.f1_macro = present > 0 ? total / static_cast<double>(present) : 0.0;
  return m;
}

/// argmax with ties resolved to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

/// Eval-mode predictions of `task_id` over featurized rows.
inline std::vector<std::size_t> predict(const model::MultiHeadModel& m, const std::string& task_id,
                                        const data::FeatureTable& t) {
  const std::size_t head = m.head_index(task_id);
  std::vector<double> dense(m.input_dim(), 0.0);
  std::vector<std::size_t> out;
  out.reserve(t.size());
  for (const auto& row : t.rows) {
    row.scatter_into(dense);
    out.push_back(argmax(m.logits_at(head, dense)));
    for (auto idx : row.index) dense[idx] = 0.0;
  }
  return out;
}

inline Metrics evaluate(const model::MultiHeadModel& m, const std::string& task_id,
                        const data::FeatureTable& t) {
  if (t.size() == 0) throw InvalidInput("evaluate: split for '" + task_id + "' is empty");
  std::vector<std::size_t> gold;
  for (const auto& l : t.labels) {
    if (!l) throw InvalidInput("evaluate: split for '" + task_id + "' contains unlabeled examples");
    gold.push_back(*l);
  }
  const auto& spec = m.task(task_id);
  return compute_metrics(gold, predict(m, task_id, t), spec.class_count(), spec.positive_label);
}

/// Featurizes `split` of `d` with the model's featurizer and scores it.
inline Metrics evaluate(const model::MultiHeadModel& m, const data::TaskDataset& d, const std::string& split) {
  if (!d.has_split(split)) {
    throw InvalidInput("evaluate: task '" + d.task_id() + "' has no '" + split + "' split");
  }
  const data::HashingFeaturizer f(m.featurizer_config());
  return evaluate(m, d.task_id(), data::featurize_split(f, d, split));
}

}  // namespace driftguard::harness
