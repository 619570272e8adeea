// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "driftguard/data/dataset.hpp"
#include "driftguard/error.hpp"
#include "driftguard/json_util.hpp"
#include "driftguard/model/multi_head_model.hpp"

namespace driftguard::strategies {

/// Unlabeled inputs of one old task paired with the frozen teacher's raw
/// eval-mode logits. Temperature is applied later, at loss time.
struct SoftTargetSet {
  std::string task_id;
  std::vector<data::Example> examples;
  data::FeatureTable inputs;
  std::vector<std::vector<double>> teacher_logits;

  std::size_t size() const { return teacher_logits.size(); }
  bool empty() const { return teacher_logits.empty(); }

  friend bool operator==(const SoftTargetSet& a, const SoftTargetSet& b) {
    return a.task_id == b.task_id && a.examples == b.examples && a.teacher_logits == b.teacher_logits;
  }
};

namespace detail {

/// Runs body(i) for i in [0, n) over up to `threads` workers in contiguous
/// chunks. Results must be written to per-index slots, which keeps the merge
/// order independent of scheduling.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// Soft targets for `task_id` over every example of `stream` (all splits;
/// labels are dropped). The teacher is only read.
inline SoftTargetSet distill_targets(const model::MultiHeadModel& teacher, const std::string& task_id,
                                     const data::TaskDataset& stream, std::size_t threads = 1) {
  const std::size_t head = teacher.head_index(task_id);
  SoftTargetSet s;
  s.task_id = task_id;
  s.examples = stream.examples;
  for (auto& e : s.examples) e.label.reset();
  const data::HashingFeaturizer f(teacher.featurizer_config());
  std::vector<const data::Example*> ptrs;
  for (const auto& e : s.examples) ptrs.push_back(&e);
  s.inputs = data::featurize_examples(f, ptrs, threads);
  s.teacher_logits.resize(s.inputs.size());
  detail::parallel_for(s.inputs.size(), threads, [&](std::size_t i) {
    std::vector<double> dense(teacher.input_dim(), 0.0);
    s.inputs.rows[i].scatter_into(dense);
    s.teacher_logits[i] = teacher.logits_at(head, dense);
  });
  return s;
}

/// Soft targets over already featurized inputs.
inline SoftTargetSet distill_targets(const model::MultiHeadModel& teacher, const std::string& task_id,
                                     const data::FeatureTable& inputs) {
  const std::size_t head = teacher.head_index(task_id);
  SoftTargetSet s;
  s.task_id = task_id;
  s.inputs = inputs;
  for (auto& l : s.inputs.labels) l.reset();
  std::vector<double> dense(teacher.input_dim(), 0.0);
  for (const auto& row : inputs.rows) {
    row.scatter_into(dense);
    s.teacher_logits.push_back(teacher.logits_at(head, dense));
    for (auto idx : row.index) dense[idx] = 0.0;
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    data::Example e;
    e.id = inputs.ids[i];
    e.split = data::kUnlabeledSplit;
    s.examples.push_back(std::move(e));
  }
  return s;
}

/// One soft-target set per old task, each from that task's own stream.
inline std::map<std::string, SoftTargetSet> distill_targets(
    const model::MultiHeadModel& teacher, const std::vector<std::string>& old_task_ids,
    const std::map<std::string, data::TaskDataset>& streams, std::size_t threads = 1) {
  std::map<std::string, SoftTargetSet> out;
  for (const auto& id : old_task_ids) {
    auto it = streams.find(id);
    if (it == streams.end()) throw InvalidInput("no unlabeled stream for old task '" + id + "'");
    out.emplace(id, distill_targets(teacher, id, it->second, threads));
  }
  return out;
}

// ---- file form: one JSON document with raw logits ---------------------------

inline void write_soft_targets(const SoftTargetSet& s, const std::filesystem::path& path) {
  json rows = json::array();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& e = s.examples[i];
    json r{{"id", e.id}, {"text_a", e.text_a}, {"logits", s.teacher_logits[i]}};
    if (e.text_b) r["text_b"] = *e.text_b;
    rows.push_back(std::move(r));
  }
  const json doc{{"schema_version", 1}, {"task_id", s.task_id}, {"rows", rows}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace driftguard::strategies
