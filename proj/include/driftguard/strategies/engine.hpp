// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// One optimizer loop shared by every regime. A step is a list of batches,
// each tied to a loss term (labels or soft targets on some head); the summed,
// per-term batch-averaged loss is backpropagated and Adam takes one step.

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "driftguard/data/dataset.hpp"
#include "driftguard/error.hpp"
#include "driftguard/harness/metrics.hpp"
#include "driftguard/json_util.hpp"
#include "driftguard/model/multi_head_model.hpp"
#include "driftguard/nn/adam.hpp"
#include "driftguard/nn/losses.hpp"
#include "driftguard/strategies/config.hpp"
#include "driftguard/strategies/ewc.hpp"

namespace driftguard::strategies {

/// A task featurized once: labeled train rows and (optional) dev rows.
struct PreparedTask {
  model::TaskSpec spec;
  data::FeatureTable train;
  data::FeatureTable dev;

  const std::string& task_id() const { return spec.task_id; }
  bool has_dev() const { return dev.size() > 0; }
};

/// Train rows keep only labeled examples of the train split.
inline PreparedTask prepare(const data::HashingFeaturizer& f, const data::TaskDataset& d,
                            std::size_t threads = 1) {
  PreparedTask p;
  p.spec = d.spec;
  std::vector<const data::Example*> labeled;
  for (const data::Example* e : d.split(data::kTrainSplit)) {
    if (e->label) labeled.push_back(e);
  }
  p.train = data::featurize_examples(f, labeled, threads);
  std::vector<const data::Example*> dev;
  for (const data::Example* e : d.split(data::kDevSplit)) {
    if (e->label) dev.push_back(e);
  }
  p.dev = data::featurize_examples(f, dev, threads);
  return p;
}

/// What a batch is scored against.
struct LossTerm {
  std::size_t head = 0;  // student head index
  const data::FeatureTable* table = nullptr;
  /// Null for label cross-entropy; otherwise raw teacher logits per row.
  const std::vector<std::vector<double>>* teacher_logits = nullptr;
  /// Streaming distillation: teacher evaluated per batch instead.
  const model::MultiHeadModel* teacher = nullptr;
  std::size_t teacher_head = 0;
  double weight = 1.0;

  bool distills() const { return teacher_logits != nullptr || teacher != nullptr; }
};

struct StepBatch {
  const LossTerm* term = nullptr;
  std::span<const std::size_t> rows;
};

struct LossBreakdown {
  double ce = 0.0;
  double kd = 0.0;
  double penalty = 0.0;
  double total() const { return ce + kd + penalty; }

  LossBreakdown& operator+=(const LossBreakdown& o) {
    ce += o.ce;
    kd += o.kd;
    penalty += o.penalty;
    return *this;
  }
};

class Trainer {
 public:
  Trainer(model::MultiHeadModel& m, const StageConfig& cfg, std::span<const FisherDiagonal> fishers = {})
      : model_(m),
        cfg_(cfg),
        fishers_(fishers),
        rng_(cfg.seed),
        dense_(m.input_dim(), 0.0),
        grads_(m.zero_gradients()),
        kd_options_{true, cfg.kd_t2_scaling},
        temperature_(cfg.temperature) {
    cfg.validate();
    if (use_penalty()) {
      const auto params = m.parameters();
      std::vector<const nn::Matrix*> view(params.begin(), params.end());
      for (const auto& f : fishers) require_congruent(f, view);
    }
  }

  bool use_penalty() const { return cfg_.ewc_lambda > 0.0 && !fishers_.empty(); }

  /// One optimizer step. Each batch contributes weight * mean loss over its rows.
  LossBreakdown step(std::span<const StepBatch> batches) {
    const LossBreakdown loss = accumulate(batches);
    auto params = model_.parameters();
    nn::adam_step(params, grads_, cfg_.learning_rate, adam_, model_.frozen_tensor_mask());
    ++steps_;
    return loss;
  }

  /// The loss of `batches` and its gradient (left in gradients()) without
  /// touching the parameters.
  LossBreakdown accumulate(std::span<const StepBatch> batches) {
    grads_.zero();
    LossBreakdown loss;
    for (const auto& b : batches) {
      if (b.rows.empty()) continue;
      const LossTerm& term = *b.term;
      const double w = term.weight / static_cast<double>(b.rows.size());
      for (std::size_t r : b.rows) {
        const auto& row = term.table->rows.at(r);
        row.scatter_into(dense_);
        const auto logits = model_.train_forward(term.head, dense_, rng_);
        nn::LossAndGrad lg;
        if (term.teacher != nullptr) {
          const auto t = term.teacher->logits_at(term.teacher_head, dense_);
          lg = nn::kd_loss_and_grad(t, logits, temperature_, kd_options_);
          loss.kd += w * lg.loss;
        } else if (term.teacher_logits != nullptr) {
          lg = nn::kd_loss_and_grad((*term.teacher_logits)[r], logits, temperature_, kd_options_);
          loss.kd += w * lg.loss;
        } else {
          const auto& label = term.table->labels[r];
          if (!label) throw InvalidInput("label loss on an unlabeled row");
          lg = nn::label_loss_and_grad(logits, *label);
          loss.ce += w * lg.loss;
        }
        for (auto idx : row.index) dense_[idx] = 0.0;
        model_.train_backward(term.head, lg.grad, grads_, w);
      }
    }
    if (use_penalty()) {
      const auto params = model_.parameters();
      std::vector<const nn::Matrix*> view(params.begin(), params.end());
      loss.penalty = ewc_penalty(view, fishers_, cfg_.ewc_lambda, &grads_);
    }
    return loss;
  }

  const nn::GradientSet& gradients() const { return grads_; }
  std::size_t steps() const { return steps_; }

 private:
  model::MultiHeadModel& model_;
  const StageConfig& cfg_;
  std::span<const FisherDiagonal> fishers_;
  nn::Rng rng_;
  std::vector<double> dense_;
  nn::GradientSet grads_;
  nn::AdamState adam_;
  nn::KdOptions kd_options_;
  nn::Temperature temperature_;
  std::size_t steps_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown loss;     // mean per step
  std::map<std::string, double> dev;
  double selection = std::numeric_limits<double>::quiet_NaN();
};

struct StageReport {
  Strategy strategy = Strategy::kST;
  std::string task_id;
  std::vector<EpochRecord> epochs;
  /// Epoch whose parameters were kept; 0 means no training happened.
  std::size_t chosen_epoch = 0;
  std::size_t steps = 0;
  std::map<std::string, double> final_dev;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

inline json stage_report_to_json(const StageReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", {{"ce", e.loss.ce}, {"kd", e.loss.kd}, {"penalty", e.loss.penalty}}},
                      {"dev", e.dev},
                      {"selection", std::isnan(e.selection) ? json(nullptr) : json(e.selection)}});
  }
  return json{{"strategy", to_string(r.strategy)},
              {"task_id", r.task_id},
              {"seed", r.seed},
              {"chosen_epoch", r.chosen_epoch},
              {"steps", r.steps},
              {"final_dev", r.final_dev},
              {"wall_seconds", r.wall_seconds},
              {"warnings", r.warnings},
              {"epochs", epochs}};
}

/// Primary dev metric for each task that has dev rows.
inline std::map<std::string, double> dev_scores(const model::MultiHeadModel& m,
                                                std::span<const PreparedTask* const> tasks) {
  std::map<std::string, double> out;
  for (const PreparedTask* t : tasks) {
    if (!t->has_dev()) continue;
    out[t->task_id()] = harness::evaluate(m, t->task_id(), t->dev).primary(t->spec.primary_metric);
  }
  return out;
}

/// Epoch loop with patience-based early stopping on the unweighted mean dev
/// metric of `selection` tasks. The best epoch's parameters are restored.
/// Without any dev rows for the selection tasks every epoch runs and the last
/// one is kept.
template <typename EpochFn>
StageReport fit(model::MultiHeadModel& m, const StageConfig& cfg, EpochFn&& run_epoch,
                std::span<const PreparedTask* const> report_tasks, const std::vector<std::string>& selection) {
  const auto started = std::chrono::steady_clock::now();
  StageReport report;
  report.strategy = cfg.strategy;
  report.seed = cfg.seed;
  EarlyStopper stopper(cfg.patience);
  std::vector<nn::Matrix> best;
  bool selectable = false;
  for (const PreparedTask* t : report_tasks) {
    for (const auto& s : selection) selectable = selectable || (t->task_id() == s && t->has_dev());
  }
  if (!selectable && cfg.max_epochs > 0) {
    report.warnings.push_back("no dev rows for model selection; keeping the last epoch");
  }

  for (std::size_t e = 0; e < cfg.max_epochs; ++e) {
    EpochRecord rec;
    rec.epoch = e + 1;
    std::size_t steps = 0;
    rec.loss = run_epoch(e, steps);
    if (steps > 0) {
      const double inv = 1.0 / static_cast<double>(steps);
      rec.loss.ce *= inv;
      rec.loss.kd *= inv;
      rec.loss.penalty *= inv;
    }
    report.steps += steps;
    rec.dev = dev_scores(m, report_tasks);
    if (selectable) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& s : selection) {
        if (auto it = rec.dev.find(s); it != rec.dev.end()) {
          sum += it->second;
          ++n;
        }
      }
      rec.selection = sum / static_cast<double>(n);
      if (stopper.observe(rec.epoch, rec.selection)) {
        best.clear();
        for (const auto* p : m.parameters()) best.push_back(*p);
      }
    }
    report.epochs.push_back(std::move(rec));
    if (selectable && stopper.should_stop()) break;
  }

  if (selectable && !report.epochs.empty()) {
    report.chosen_epoch = stopper.best_epoch();
    auto params = m.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = best[i];
    report.final_dev = report.epochs[report.chosen_epoch - 1].dev;
  } else {
    report.chosen_epoch = report.epochs.size();
    report.final_dev = dev_scores(m, report_tasks);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace driftguard::strategies
