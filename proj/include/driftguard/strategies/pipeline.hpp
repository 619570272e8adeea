// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Stage orchestration: the previous stage's model becomes a read-only teacher,
// a student is cloned from it, grows a head for the new task and is trained
// by the stage's strategy. Lineage, Fishers and checkpoints accumulate in the
// pipeline state.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "driftguard/error.hpp"
#include "driftguard/model/checkpoint.hpp"
#include "driftguard/strategies/regimes.hpp"

namespace driftguard::strategies {

/// How a fresh model is built when a stage needs one.
struct ModelRecipe {
  data::FeaturizerConfig featurizer;
  std::vector<std::size_t> hidden{64, 64, 64, 64};
  double dropout = 0.1;

  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d{featurizer.dimension};
    d.insert(d.end(), hidden.begin(), hidden.end());
    return d;
  }
  model::MultiHeadModel build(std::uint64_t seed) const {
    const auto d = dims();
    return model::MultiHeadModel::create(featurizer, d, seed, dropout);
  }
};

struct StageDescriptor {
  std::size_t stage = 1;  // 1-based position in the chain
  StageConfig config;
  const PreparedTask* new_task = nullptr;
  /// Every labeled task up to and including this stage (MTL trains on all).
  std::vector<const PreparedTask*> joint_tasks;
  /// Earlier tasks: evaluated each epoch and, for KD strategies, part of
  /// model selection.
  std::vector<const PreparedTask*> old_tasks;
  /// UKD only: one unlabeled stream per old task.
  std::map<std::string, data::TaskDataset> streams;
};

struct PipelineState {
  ModelRecipe recipe;
  std::optional<model::MultiHeadModel> model;
  std::vector<model::StageRecord> provenance;
  std::vector<FisherDiagonal> fishers;
  std::vector<StageReport> reports;
  std::vector<std::filesystem::path> checkpoints;
  /// Where stage checkpoints go; empty keeps everything in memory.
  std::filesystem::path checkpoint_dir;
  std::size_t threads = 1;
};

inline std::filesystem::path stage_checkpoint_path(const std::filesystem::path& dir, std::size_t stage) {
  return dir / ("stage-" + std::to_string(stage) + ".ckpt");
}

/// Fisher of the task a stage just learned, measured on that stage's model
/// over its training inputs (labels unused).
inline FisherDiagonal stage_fisher(const model::MultiHeadModel& m, const PreparedTask& task, const StageConfig& cfg,
                                   std::size_t stage) {
  const std::size_t n = std::min(cfg.fisher_samples, task.train.size());
  return estimate_fisher(m, task.task_id(), task.train, n, nn::Rng::mix(cfg.seed ^ (0xf15e0000ULL + stage)));
}

inline PipelineState run_stage(PipelineState state, const StageDescriptor& desc) {
  if (desc.new_task == nullptr) throw InvalidInput("stage " + std::to_string(desc.stage) + " names no task");
  const StageConfig& cfg = desc.config;
  cfg.validate();
  const PreparedTask& task = *desc.new_task;
  const Strategy s = cfg.strategy;
  const bool has_teacher = state.model.has_value() && state.model->head_count() > 0;

  StageReport report;
  if (s == Strategy::kST) {
    auto m = state.recipe.build(cfg.seed);
    report = train_single(m, task, cfg);
    state.model = std::move(m);
    state.provenance.clear();
  } else if (s == Strategy::kMTL) {
    auto m = state.recipe.build(cfg.seed);
    auto joint = desc.joint_tasks;
    if (std::find(joint.begin(), joint.end(), &task) == joint.end()) joint.push_back(&task);
    report = train_mtl(m, joint, cfg);
    state.model = std::move(m);
  } else if (!has_teacher) {
    // No old task yet: every continual strategy reduces to single-task training.
    auto m = state.recipe.build(cfg.seed);
    report = train_single(m, task, cfg);
    state.model = std::move(m);
  } else {
    const model::MultiHeadModel& teacher = *state.model;
    auto student = make_student(teacher, task.spec, cfg.seed);
    switch (s) {
      case Strategy::kEM: report = train_em(student, task, cfg, desc.old_tasks); break;
      case Strategy::kOL: report = train_ol(student, task, cfg, desc.old_tasks); break;
      case Strategy::kEWC: report = train_ewc(student, state.fishers, task, cfg, desc.old_tasks); break;
      case Strategy::kTKD: report = train_tkd(student, teacher, task, cfg, desc.old_tasks); break;
      case Strategy::kUKD: {
        if (desc.streams.empty()) {
          throw InvalidInput("UKD stage " + std::to_string(desc.stage) + " has no unlabeled streams");
        }
        std::vector<std::string> old_ids;
        for (const auto& spec : teacher.tasks()) old_ids.push_back(spec.task_id);
        const auto targets = distill_targets(teacher, old_ids, desc.streams, state.threads);
        report = train_ukd(student, teacher, task, targets, cfg, desc.old_tasks);
        break;
      }
      default: throw StateError("unhandled strategy");
    }
    state.model = std::move(student);
  }
  report.strategy = s;

  if (s == Strategy::kEWC) state.fishers.push_back(stage_fisher(*state.model, task, cfg, desc.stage));
  state.provenance.push_back({desc.stage, task.task_id(), to_string(s), cfg.seed});
  if (!state.checkpoint_dir.empty()) {
    const auto path = stage_checkpoint_path(state.checkpoint_dir, desc.stage);
    model::save(*state.model, path, state.provenance);
    state.checkpoints.push_back(path);
  }
  state.reports.push_back(std::move(report));
  return state;
}

}  // namespace driftguard::strategies
