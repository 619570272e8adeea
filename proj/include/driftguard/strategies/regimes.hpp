// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "driftguard/data/dataset.hpp"
#include "driftguard/error.hpp"
#include "driftguard/model/multi_head_model.hpp"
#include "driftguard/strategies/config.hpp"
#include "driftguard/strategies/distill.hpp"
#include "driftguard/strategies/engine.hpp"
#include "driftguard/strategies/ewc.hpp"

namespace driftguard::strategies {

namespace detail {

inline void require_labeled(const PreparedTask& t) {
  if (t.train.size() == 0) throw InvalidInput("task '" + t.task_id() + "' has no labeled training examples");
}

inline std::vector<const PreparedTask*> with_new(const PreparedTask& task,
                                                 const std::vector<const PreparedTask*>& others) {
  std::vector<const PreparedTask*> all{&task};
  for (const PreparedTask* o : others) {
    if (o != &task && o->task_id() != task.task_id()) all.push_back(o);
  }
  return all;
}

/// Plain supervised loop on one head, optionally with EWC penalties.
inline StageReport train_labeled(model::MultiHeadModel& m, const PreparedTask& task, const StageConfig& cfg,
                                 const std::vector<const PreparedTask*>& report_tasks,
                                 std::span<const FisherDiagonal> fishers = {}) {
  cfg.validate();
  require_labeled(task);
  Trainer trainer(m, cfg, fishers);
  const LossTerm term{m.head_index(task.task_id()), &task.train, nullptr, nullptr, 0, cfg.weight(task.task_id())};
  const auto reported = with_new(task, report_tasks);
  auto epoch = [&](std::size_t e, std::size_t& steps) {
    LossBreakdown sum;
    for (const auto& rows : data::batches(task.train.size(), cfg.batch_size, cfg.seed, e)) {
      const StepBatch b{&term, rows};
      sum += trainer.step(std::span<const StepBatch>(&b, 1));
      ++steps;
    }
    return sum;
  };
  auto report = fit(m, cfg, epoch, reported, {task.task_id()});
  report.task_id = task.task_id();
  return report;
}

}  // namespace detail

/// Adds a head for `spec` unless one exists. The seed depends on the run
/// seed and the head's position.
inline void ensure_head(model::MultiHeadModel& m, const model::TaskSpec& spec, std::uint64_t seed) {
  if (!m.has_task(spec.task_id)) m.add_head(spec, nn::Rng::mix(seed ^ (0x4ead0000ULL + m.head_count())));
}

/// Single-task cross-entropy training with early stopping on its dev metric.
inline StageReport train_single(model::MultiHeadModel& m, const PreparedTask& task, const StageConfig& cfg,
                                const std::vector<const PreparedTask*>& report_tasks = {}) {
  ensure_head(m, task.spec, cfg.seed);
  return detail::train_labeled(m, task, cfg, report_tasks);
}

/// Draws task indices with probability proportional to their sizes.
class TaskSampler {
 public:
  TaskSampler(std::vector<double> sizes, std::uint64_t seed)
      : weights_(std::move(sizes)), rng_(nn::Rng::mix(seed ^ 0x5a3b1e5ULL)) {
    if (weights_.empty()) throw InvalidInput("task sampler needs at least one task");
  }
  std::size_t next() { return rng_.categorical(weights_); }

 private:
  std::vector<double> weights_;
  nn::Rng rng_;
};

/// Joint training. Each step samples one task (proportional to train size)
/// and one batch of it. An epoch is as many steps as all tasks have batches;
/// each task walks its own sequence of shuffled passes, so a single-task run
/// reproduces train_single exactly.
inline StageReport train_mtl(model::MultiHeadModel& m, const std::vector<const PreparedTask*>& tasks,
                             const StageConfig& cfg) {
  cfg.validate();
  if (tasks.empty()) throw InvalidInput("train_mtl: empty task list");
  std::vector<LossTerm> terms;
  std::vector<double> sizes;
  std::vector<std::string> ids;
  for (const PreparedTask* t : tasks) {
    detail::require_labeled(*t);
    ensure_head(m, t->spec, cfg.seed);
    sizes.push_back(static_cast<double>(t->train.size()));
    ids.push_back(t->task_id());
  }
  for (const PreparedTask* t : tasks) {
    terms.push_back({m.head_index(t->task_id()), &t->train, nullptr, nullptr, 0, cfg.weight(t->task_id())});
  }
  Trainer trainer(m, cfg);
  TaskSampler sampler(sizes, cfg.seed);

  struct Cursor {
    std::uint64_t seed;
    std::size_t pass = 0;
    std::size_t next = 0;
    std::vector<std::vector<std::size_t>> batches;
  };
  std::vector<Cursor> cursors;
  std::size_t steps_per_epoch = 0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    Cursor c;
    c.seed = t == 0 ? cfg.seed : cfg.seed ^ nn::Rng::mix(t);
    c.batches = data::batches(tasks[t]->train.size(), cfg.batch_size, c.seed, 0);
    steps_per_epoch += c.batches.size();
    cursors.push_back(std::move(c));
  }

  auto epoch = [&](std::size_t, std::size_t& steps) {
    LossBreakdown sum;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t t = sampler.next();
      Cursor& c = cursors[t];
      if (c.next == c.batches.size()) {
        ++c.pass;
        c.next = 0;
        c.batches = data::batches(tasks[t]->train.size(), cfg.batch_size, c.seed, c.pass);
      }
      const StepBatch b{&terms[t], c.batches[c.next++]};
      sum += trainer.step(std::span<const StepBatch>(&b, 1));
      ++steps;
    }
    return sum;
  };
  auto report = fit(m, cfg, epoch, tasks, ids);
  report.task_id = ids.back();
  return report;
}

/// A student ready for a continual stage: deep copy of the teacher plus a
/// fresh head for the new task.
inline model::MultiHeadModel make_student(const model::MultiHeadModel& teacher, const model::TaskSpec& spec,
                                          std::uint64_t seed) {
  if (teacher.has_task(spec.task_id)) throw Conflict("teacher already has a head for '" + spec.task_id + "'");
  auto student = teacher.clone_as_student();
  ensure_head(student, spec, seed);
  return student;
}

/// CE on the new task only; nothing is frozen, so old heads and the encoder move.
inline StageReport train_em(model::MultiHeadModel& student, const PreparedTask& new_task, const StageConfig& cfg,
                            const std::vector<const PreparedTask*>& report_tasks = {}) {
  return detail::train_labeled(student, new_task, cfg, report_tasks);
}

/// CE on the new task with everything but its head frozen.
inline StageReport train_ol(model::MultiHeadModel& student, const PreparedTask& new_task, const StageConfig& cfg,
                            const std::vector<const PreparedTask*>& report_tasks = {}) {
  student.set_freeze(model::FreezeScope::all_except(new_task.task_id()));
  auto report = detail::train_labeled(student, new_task, cfg, report_tasks);
  student.set_freeze(model::FreezeScope::none());
  return report;
}

/// CE on the new task plus (lambda/2) sum F (theta - anchor)^2 per old task.
/// With lambda = 0 the penalty is skipped entirely and this is train_em.
inline StageReport train_ewc(model::MultiHeadModel& student, const std::vector<FisherDiagonal>& fishers,
                             const PreparedTask& new_task, const StageConfig& cfg,
                             const std::vector<const PreparedTask*>& report_tasks = {}) {
  const auto params = student.parameters();
  const std::vector<const nn::Matrix*> view(params.begin(), params.end());
  for (const auto& f : fishers) require_congruent(f, view);
  return detail::train_labeled(student, new_task, cfg, report_tasks, fishers);
}

namespace detail {

/// New-task CE plus one distillation term per old task. Step i pairs new
/// batch i with batch (i mod k) of each stream, where every stream is shuffled
/// with the same (seed, epoch) as the new task and cut with the same batch
/// size. A stream equal to the new-task inputs therefore yields exactly the
/// new-task batches.
inline StageReport train_distill(model::MultiHeadModel& student, const model::MultiHeadModel& teacher,
                                 const PreparedTask& new_task,
                                 const std::vector<const SoftTargetSet*>& targets, const StageConfig& cfg,
                                 const std::vector<const PreparedTask*>& report_tasks) {
  cfg.validate();
  require_labeled(new_task);
  StageReport pre;
  std::vector<LossTerm> kd_terms;
  std::vector<const data::FeatureTable*> tables;
  for (const SoftTargetSet* s : targets) {
    if (s->empty()) {
      pre.warnings.push_back("empty unlabeled stream for '" + s->task_id + "': no distillation for it");
      continue;
    }
    LossTerm t;
    t.head = student.head_index(s->task_id);
    t.table = &s->inputs;
    t.weight = cfg.weight(s->task_id);
    if (cfg.streaming) {
      t.teacher = &teacher;
      t.teacher_head = teacher.head_index(s->task_id);
    } else {
      t.teacher_logits = &s->teacher_logits;
    }
    kd_terms.push_back(t);
  }
  const LossTerm new_term{student.head_index(new_task.task_id()), &new_task.train, nullptr, nullptr, 0,
                          cfg.weight(new_task.task_id())};
  Trainer trainer(student, cfg);
  const auto reported = with_new(new_task, report_tasks);
  std::vector<std::string> selection;
  for (const PreparedTask* t : reported) selection.push_back(t->task_id());

  auto epoch = [&](std::size_t e, std::size_t& steps) {
    LossBreakdown sum;
    const auto new_batches = data::batches(new_task.train.size(), cfg.batch_size, cfg.seed, e);
    std::vector<std::vector<std::vector<std::size_t>>> stream_batches;
    for (const auto& t : kd_terms) {
      stream_batches.push_back(data::batches(t.table->size(), cfg.batch_size, cfg.seed, e));
    }
    std::vector<StepBatch> step;
    for (std::size_t i = 0; i < new_batches.size(); ++i) {
      step.clear();
      step.push_back({&new_term, new_batches[i]});
      for (std::size_t k = 0; k < kd_terms.size(); ++k) {
        const auto& sb = stream_batches[k];
        step.push_back({&kd_terms[k], sb[i % sb.size()]});
      }
      sum += trainer.step(step);
      ++steps;
    }
    return sum;
  };
  auto report = fit(student, cfg, epoch, reported, selection);
  report.task_id = new_task.task_id();
  report.warnings.insert(report.warnings.begin(), pre.warnings.begin(), pre.warnings.end());
  return report;
}

inline void check_streams(const model::MultiHeadModel& student, const model::MultiHeadModel& teacher,
                          const PreparedTask& new_task, const std::map<std::string, SoftTargetSet>& targets) {
  for (const auto& [id, s] : targets) {
    if (!teacher.has_task(id)) throw NotFound("stream for '" + id + "' names no teacher head");
    if (s.task_id != id) throw InvalidInput("stream keyed '" + id + "' holds targets for '" + s.task_id + "'");
  }
  for (const auto& spec : teacher.tasks()) {
    if (!targets.contains(spec.task_id)) {
      throw InvalidInput("missing unlabeled stream for old task '" + spec.task_id + "'");
    }
    if (!student.has_task(spec.task_id)) throw InvalidInput("student lacks old head '" + spec.task_id + "'");
  }
  if (!student.has_task(new_task.task_id())) {
    throw InvalidInput("student lacks a head for new task '" + new_task.task_id() + "'");
  }
  if (teacher.has_task(new_task.task_id())) {
    throw Conflict("teacher already has a head for new task '" + new_task.task_id() + "'");
  }
}

}  // namespace detail

/// Distillation from each old task's own unlabeled stream (soft targets
/// produced by the frozen teacher) plus CE on the new task.
inline StageReport train_ukd(model::MultiHeadModel& student, const model::MultiHeadModel& teacher,
                             const PreparedTask& new_task, const std::map<std::string, SoftTargetSet>& targets,
                             const StageConfig& cfg, const std::vector<const PreparedTask*>& report_tasks = {}) {
  detail::check_streams(student, teacher, new_task, targets);
  std::vector<const SoftTargetSet*> ordered;
  for (const auto& spec : teacher.tasks()) ordered.push_back(&targets.at(spec.task_id));
  return detail::train_distill(student, teacher, new_task, ordered, cfg, report_tasks);
}

/// Convenience overload: distills the raw streams first.
inline StageReport train_ukd(model::MultiHeadModel& student, const model::MultiHeadModel& teacher,
                             const PreparedTask& new_task, const std::map<std::string, data::TaskDataset>& streams,
                             const StageConfig& cfg, const std::vector<const PreparedTask*>& report_tasks = {}) {
  for (const auto& [id, _] : streams) {
    if (!teacher.has_task(id)) throw NotFound("stream for '" + id + "' names no teacher head");
  }
  std::vector<std::string> old_ids;
  for (const auto& spec : teacher.tasks()) old_ids.push_back(spec.task_id);
  const auto targets = distill_targets(teacher, old_ids, streams);
  return train_ukd(student, teacher, new_task, targets, cfg, report_tasks);
}

/// Distillation computed on the new task's own training inputs.
inline StageReport train_tkd(model::MultiHeadModel& student, const model::MultiHeadModel& teacher,
                             const PreparedTask& new_task, const StageConfig& cfg,
                             const std::vector<const PreparedTask*>& report_tasks = {}) {
  std::map<std::string, SoftTargetSet> targets;
  for (const auto& spec : teacher.tasks()) {
    targets.emplace(spec.task_id, distill_targets(teacher, spec.task_id, new_task.train));
  }
  return train_ukd(student, teacher, new_task, targets, cfg, report_tasks);
}

}  // namespace driftguard::strategies
