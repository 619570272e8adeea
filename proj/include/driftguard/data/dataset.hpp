// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <optional>
#include <string>
#include <vector>

#include "driftguard/data/featurizer.hpp"
#include "driftguard/error.hpp"
#include "driftguard/model/task_spec.hpp"
#include "driftguard/nn/rng.hpp"

namespace driftguard::data {

inline constexpr const char* kTrainSplit = "train";
inline constexpr const char* kDevSplit = "dev";
/// Label-free examples from a task's input distribution (distillation streams).
inline constexpr const char* kUnlabeledSplit = "unlabeled";

struct Example {
  std::string id;
  std::string text_a;
  std::optional<std::string> text_b;
  std::optional<std::size_t> label;
  std::string split = kTrainSplit;

  friend bool operator==(const Example&, const Example&) = default;
};

struct TaskDataset {
  model::TaskSpec spec;
  std::vector<Example> examples;
  std::string provenance;

  const std::string& task_id() const { return spec.task_id; }

  std::vector<const Example*> split(const std::string& name) const {
    std::vector<const Example*> out;
    for (const auto& e : examples) {
      if (e.split == name) out.push_back(&e);
    }
    return out;
  }

  std::size_t split_size(const std::string& name) const {
    return static_cast<std::size_t>(
        std::count_if(examples.begin(), examples.end(), [&](const Example& e) { return e.split == name; }));
  }

  bool has_split(const std::string& name) const { return split_size(name) > 0; }

  /// Split tags must be train, dev, unlabeled or one of the spec's eval
  /// splits; labels must index the spec's label set.
  void validate() const {
    spec.validate();
    for (const auto& e : examples) {
      if (e.text_a.empty()) throw DataError(spec.task_id + ": example '" + e.id + "' has empty text_a");
      const bool known = e.split == kTrainSplit || e.split == kDevSplit || e.split == kUnlabeledSplit ||
                         std::find(spec.eval_splits.begin(), spec.eval_splits.end(), e.split) !=
                             spec.eval_splits.end();
      if (!known) throw DataError(spec.task_id + ": example '" + e.id + "' has unknown split '" + e.split + "'");
      if (e.label && *e.label >= spec.class_count()) {
        throw DataError(spec.task_id + ": example '" + e.id + "' label out of range");
      }
      if (spec.input_arity == model::InputArity::kTwoSegment && !e.text_b) {
        throw DataError(spec.task_id + ": example '" + e.id + "' lacks text_b for a two-segment task");
      }
    }
  }

  friend bool operator==(const TaskDataset&, const TaskDataset&) = default;
};

/// Featurized rows of one split, ready for training or evaluation.
struct FeatureTable {
  std::vector<SparseFeatures> rows;
  std::vector<std::optional<std::size_t>> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return rows.size(); }
  bool fully_labeled() const {
    return std::all_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); });
  }
};

/// Featurizes examples in order. With threads > 1 contiguous chunks run in
/// parallel; the result is identical because each row is pure.
inline FeatureTable featurize_examples(const HashingFeaturizer& f,
                                       const std::vector<const Example*>& examples,
                                       std::size_t threads = 1) {
  FeatureTable t;
  const std::size_t n = examples.size();
  t.rows.resize(n);
  for (const Example* e : examples) {
    t.labels.push_back(e->label);
    t.ids.push_back(e->id);
  }
  auto one = [&](std::size_t i) {
    const Example* e = examples[i];
    std::optional<std::string_view> b;
    if (e->text_b) b = *e->text_b;
    t.rows[i] = f.featurize_sparse(e->text_a, b);
  };
  threads = std::max<std::size_t>(1, std::min(threads, n / 256 + 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) one(i);
    return t;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) one(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return t;
}

inline FeatureTable featurize_split(const HashingFeaturizer& f, const TaskDataset& d,
                                    const std::string& split, std::size_t threads = 1) {
  return featurize_examples(f, d.split(split), threads);
}


/// Ordered, disjoint index slices of a training split.
struct SliceSet {
  std::vector<std::vector<std::size_t>> slices;  // indices into TaskDataset::examples

  std::size_t count() const { return slices.size(); }
};

/// Seeded shuffle of the train split, then contiguous equal partitions; the
/// last slice absorbs the remainder.
inline SliceSet slice(const TaskDataset& d, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < d.examples.size(); ++i) {
    if (d.examples[i].split == kTrainSplit) train.push_back(i);
  }
  if (k == 0) throw InvalidInput("slice count must be >= 1");
  if (k > train.size()) {
    throw InvalidInput("cannot cut " + std::to_string(train.size()) + " training examples of '" +
                       d.task_id() + "' into " + std::to_string(k) + " slices");
  }
  nn::Rng rng(seed);
  rng.shuffle(train);
  const std::size_t base = train.size() / k;
  SliceSet out;
  for (std::size_t s = 0; s < k; ++s) {
    const auto begin = train.begin() + static_cast<std::ptrdiff_t>(s * base);
    const auto end = s + 1 == k ? train.end() : begin + static_cast<std::ptrdiff_t>(base);
    out.slices.emplace_back(begin, end);
  }
  return out;
}

/// Copy of `d` whose train split is exactly the examples at `train_indices`
/// (in that order). Other splits are kept, except unlabeled.
inline TaskDataset with_train_subset(const TaskDataset& d, const std::vector<std::size_t>& train_indices) {
  TaskDataset out{d.spec, {}, d.provenance};
  for (std::size_t i : train_indices) out.examples.push_back(d.examples.at(i));
  for (const auto& e : d.examples) {
    if (e.split != kTrainSplit && e.split != kUnlabeledSplit) out.examples.push_back(e);
  }
  return out;
}

/// Label-free copy of the selected examples, tagged as the unlabeled split.
inline TaskDataset as_unlabeled(const TaskDataset& d, const std::vector<const Example*>& picked) {
  TaskDataset out{d.spec, {}, d.provenance + " (unlabeled)"};
  for (const Example* e : picked) {
    Example copy = *e;
    copy.label.reset();
    copy.split = kUnlabeledSplit;
    out.examples.push_back(std::move(copy));
  }
  return out;
}

inline TaskDataset as_unlabeled(const TaskDataset& d, const std::vector<std::size_t>& indices) {
  std::vector<const Example*> picked;
  for (std::size_t i : indices) picked.push_back(&d.examples.at(i));
  return as_unlabeled(d, picked);
}

/// Repeats every training example `factor` times; other splits untouched.
inline TaskDataset upsample(const TaskDataset& d, std::size_t factor) {
  if (factor == 0) throw InvalidInput("upsample factor must be >= 1");
  TaskDataset out{d.spec, {}, d.provenance};
  for (const auto& e : d.examples) {
    const std::size_t copies = e.split == kTrainSplit ? factor : 1;
    for (std::size_t r = 0; r < copies; ++r) out.examples.push_back(e);
  }
  return out;
}

/// Index batches for one epoch: a permutation seeded with seed ^ epoch cut
/// into runs of batch_size; the final partial batch is kept.
inline std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw InvalidInput("batch size must be >= 1");
  const auto order = nn::permutation(n, seed ^ epoch);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace driftguard::data
