// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Executes an experiment plan: every (chain, seed) pair runs its stages in
// order, evaluating each registered task on each named split after every
// stage. Stage checkpoints and rows are written as they complete, so a rerun
// with the same plan resumes after the last finished stage.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "driftguard/error.hpp"
#include "driftguard/harness/emit.hpp"
#include "driftguard/harness/plan.hpp"
#include "driftguard/harness/results.hpp"
#include "driftguard/strategies/distill.hpp"
#include "driftguard/strategies/pipeline.hpp"

namespace driftguard::harness {

/// Worker threads for parallel-safe phases: DRIFTGUARD_THREADS when set,
/// otherwise the hardware concurrency.
inline std::size_t thread_budget() {
  if (const char* v = std::getenv("DRIFTGUARD_THREADS"); v != nullptr && *v != '\0') {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1) {
      throw ConfigError("DRIFTGUARD_THREADS must be a positive integer, got '" + std::string(v) + "'");
    }
    return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct RunOptions {
  /// 0 means thread_budget().
  std::size_t threads = 0;
  /// Write checkpoints, stage rows and final tables under the output dir.
  bool write_outputs = true;
  /// Reuse completed stages found in the output dir.
  bool resume = true;
  std::ostream* log = nullptr;
};

struct ChainRun {
  std::string label;
  std::uint64_t seed = 0;
  /// Reports of the stages trained in this invocation (resumed ones are absent).
  std::vector<strategies::StageReport> reports;
  std::size_t resumed_stages = 0;
  /// Example ids each stage trained or distilled on.
  std::vector<std::set<std::string>> stage_examples;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path dir;
};

struct ExperimentResult {
  ResultTable table;
  std::vector<ChainRun> chains;
  std::vector<std::string> task_order;
};

inline std::filesystem::path chain_dir(const std::filesystem::path& out, const std::string& label,
                                       std::uint64_t seed) {
  return out / "runs" / (label + "-seed" + std::to_string(seed));
}

namespace detail {

/// Featurized views of one task that do not depend on the run seed.
struct TaskTables {
  std::map<std::string, data::FeatureTable> eval;  // by split
};

struct SeedData {
  std::vector<strategies::PreparedTask> prepared;       // chain order
  std::vector<data::SliceSet> slices;                   // slicing mode only
};

inline std::string stage_rows_name(std::size_t stage) { return "stage-" + std::to_string(stage) + ".rows.csv"; }

inline void write_atomic_text(const std::filesystem::path& path, const std::string& text) {
  model::detail::write_file_atomic(path, text);
}

}  // namespace detail

class ExperimentRunner {
 public:
  ExperimentRunner(ExperimentPlan plan, RunOptions options)
      : plan_(std::move(plan)), options_(options), tasks_(load_tasks(plan_)),
        featurizer_(plan_.model.featurizer) {
    threads_ = options_.threads == 0 ? thread_budget() : options_.threads;
  }

  const std::vector<LoadedTask>& tasks() const { return tasks_; }

  ExperimentResult run() {
    const std::size_t n_chains = plan_.chains.size() * plan_.seeds.size();
    // Chains run side by side; each one then works single-threaded.
    const std::size_t outer = std::min(threads_, n_chains);
    inner_threads_ = outer > 1 ? 1 : threads_;

    tables_.resize(tasks_.size());
    for (std::size_t j = 0; j < tasks_.size(); ++j) {
      for (const auto& split : tasks_[j].eval_splits) {
        tables_[j].eval[split] = data::featurize_split(featurizer_, tasks_[j].dataset, split, threads_);
      }
    }
    for (std::uint64_t seed : plan_.seeds) seed_data_.emplace(seed, make_seed_data(seed));

    std::vector<std::pair<std::size_t, std::uint64_t>> jobs;
    for (std::size_t c = 0; c < plan_.chains.size(); ++c) {
      for (std::uint64_t seed : plan_.seeds) jobs.emplace_back(c, seed);
    }
    std::vector<ChainRun> runs(jobs.size());
    std::vector<std::vector<ResultRow>> rows(jobs.size());
    strategies::detail::parallel_for(jobs.size(), outer, [&](std::size_t i) {
      runs[i] = run_one(plan_.chains[jobs[i].first], jobs[i].second, rows[i]);
    });

    ExperimentResult result;
    for (auto& r : rows) result.table.rows.insert(result.table.rows.end(), r.begin(), r.end());
    result.table.sort();
    result.chains = std::move(runs);
    for (const auto& t : tasks_) result.task_order.push_back(t.task_id());
    if (options_.write_outputs) write_outputs(result.table);
    return result;
  }

 private:
  detail::SeedData make_seed_data(std::uint64_t seed) const {
    detail::SeedData sd;
    const std::size_t n = tasks_.size();
    for (std::size_t j = 0; j < n; ++j) {
      const auto& t = tasks_[j];
      data::TaskDataset train_view = t.dataset;
      if (plan_.slicing) {
        sd.slices.push_back(data::slice(t.dataset, n - j, nn::Rng::mix(seed ^ nn::Rng::mix(0x511ce + j))));
        train_view = data::with_train_subset(t.dataset, sd.slices.back().slices[0]);
      }
      if (t.upsample > 1) train_view = data::upsample(train_view, t.upsample);
      sd.prepared.push_back(strategies::prepare(featurizer_, train_view, threads_));
    }
    return sd;
  }

  /// Unlabeled stream of old task j for stage k (both 0-based, j < k).
  data::TaskDataset stream(const detail::SeedData& sd, std::size_t j, std::size_t k) const {
    const auto& d = tasks_[j].dataset;
    if (plan_.slicing) return data::as_unlabeled(d, sd.slices[j].slices.at(k - j));
    return data::as_unlabeled(d, d.split(data::kUnlabeledSplit));
  }

  json fingerprint(const ChainSpec& chain, std::uint64_t seed) const {
    json plan = plan_.source;
    plan.erase("seeds");
    plan.erase("output_dir");
    plan.erase("strategies");
    plan.erase("baselines");
    json stages = json::array();
    for (Strategy s : chain.stages) stages.push_back(strategies::to_string(s));
    return json{{"plan", plan}, {"label", chain.label}, {"stages", stages}, {"seed", seed}};
  }

  void log(const std::string& line) {
    if (options_.log == nullptr) return;
    std::lock_guard lock(log_mutex_);
    *options_.log << line << std::endl;
  }

  std::vector<ResultRow> evaluate_stage(const model::MultiHeadModel& m, std::size_t stage, const std::string& label,
                                        std::uint64_t seed) const {
    std::vector<ResultRow> rows;
    for (std::size_t j = 0; j < tasks_.size(); ++j) {
      const auto& spec = tasks_[j].dataset.spec;
      if (!m.has_task(spec.task_id)) continue;
      for (const auto& split : tasks_[j].eval_splits) {
        const auto metrics = evaluate(m, spec.task_id, tables_[j].eval.at(split));
        rows.push_back(make_row(stage, spec, split, label, seed, metrics));
      }
    }
    return rows;
  }

  ChainRun run_one(const ChainSpec& chain, std::uint64_t seed, std::vector<ResultRow>& rows) {
    namespace fs = std::filesystem;
    const auto& sd = seed_data_.at(seed);
    const std::size_t n = tasks_.size();
    ChainRun run;
    run.label = chain.label;
    run.seed = seed;
    run.dir = chain_dir(plan_.output_dir, chain.label, seed);

    const std::string print = fingerprint(chain, seed).dump(1);
    bool resuming = false;
    if (options_.write_outputs) {
      const fs::path stamp = run.dir / "run.json";
      resuming = options_.resume && fs::exists(stamp) && detail::read_text(stamp) == print + "\n";
      if (!resuming) {
        fs::remove_all(run.dir);
        fs::create_directories(run.dir);
        detail::write_atomic_text(stamp, print + "\n");
      }
    }

    strategies::PipelineState state;
    state.recipe = plan_.model;
    state.threads = inner_threads_;
    if (options_.write_outputs) state.checkpoint_dir = run.dir;
    const bool continual = !chain.baseline();

    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t stage = k + 1;
      const Strategy s = chain.at(k);
      const auto cfg = plan_.stage_config(s, seed);
      const auto& task = sd.prepared[k];

      strategies::StageDescriptor desc;
      desc.stage = stage;
      desc.config = cfg;
      desc.new_task = &task;
      for (std::size_t j = 0; j <= k; ++j) desc.joint_tasks.push_back(&sd.prepared[j]);
      if (continual) {
        for (std::size_t j = 0; j < k; ++j) desc.old_tasks.push_back(&sd.prepared[j]);
      }
      if (s == Strategy::kUKD && continual) {
        for (std::size_t j = 0; j < k; ++j) desc.streams.emplace(tasks_[j].task_id(), stream(sd, j, k));
      }

      std::set<std::string> seen(task.train.ids.begin(), task.train.ids.end());
      if (s == Strategy::kMTL) {
        for (const auto* t : desc.joint_tasks) seen.insert(t->train.ids.begin(), t->train.ids.end());
      }
      for (const auto& [_, st] : desc.streams) {
        for (const auto& e : st.examples) seen.insert(e.id);
      }
      if (plan_.slicing && continual) {
        for (const auto& earlier : run.stage_examples) {
          for (const auto& id : seen) {
            if (earlier.contains(id)) {
              throw StateError("slicing violated: example '" + id + "' reaches more than one stage");
            }
          }
        }
      }
      run.stage_examples.push_back(std::move(seen));

      const fs::path ckpt = strategies::stage_checkpoint_path(run.dir, stage);
      const fs::path rows_file = run.dir / detail::stage_rows_name(stage);
      if (resuming && fs::exists(ckpt) && fs::exists(rows_file)) {
        auto loaded = model::load(ckpt);
        state.model = std::move(loaded.model);
        state.provenance = std::move(loaded.provenance);
        if (s == Strategy::kEWC) state.fishers.push_back(strategies::stage_fisher(*state.model, task, cfg, stage));
        state.checkpoints.push_back(ckpt);
        auto stage_rows = results_from_csv(detail::read_text(rows_file), rows_file.string()).rows;
        rows.insert(rows.end(), stage_rows.begin(), stage_rows.end());
        ++run.resumed_stages;
        log("[" + chain.label + " seed " + std::to_string(seed) + "] stage " + std::to_string(stage) + "/" +
            std::to_string(n) + " " + task.task_id() + ": resumed");
        continue;
      }
      resuming = false;  // later stages depend on this one

      state = strategies::run_stage(std::move(state), desc);
      const auto& report = state.reports.back();
      ResultTable stage_table{evaluate_stage(*state.model, stage, chain.label, seed)};
      if (options_.write_outputs) {
        detail::write_atomic_text(run.dir / ("stage-" + std::to_string(stage) + ".report.json"),
                                  stage_report_to_json(report).dump(1) + "\n");
        detail::write_atomic_text(rows_file, results_to_csv(stage_table));
      }
      rows.insert(rows.end(), stage_table.rows.begin(), stage_table.rows.end());
      run.reports.push_back(report);
      char timing[64];
      std::snprintf(timing, sizeof timing, "%.1f s", report.wall_seconds);
      log("[" + chain.label + " seed " + std::to_string(seed) + "] stage " + std::to_string(stage) + "/" +
          std::to_string(n) + " " + task.task_id() + " (" + strategies::to_string(s) + "): " +
          std::to_string(report.epochs.size()) + " epochs, kept " + std::to_string(report.chosen_epoch) + ", " +
          timing);
      for (const auto& w : report.warnings) log("  warning: " + w);
    }
    run.checkpoints = state.checkpoints;
    return run;
  }

  void write_outputs(const ResultTable& table) const {
    const auto& out = plan_.output_dir;
    emit(table, OutputFormat::kCsv, out / "results.csv");
    emit(table, OutputFormat::kJson, out / "results.json");
    emit(table, OutputFormat::kSvg, out / "chart.svg");
    const auto report = forgetting_report(table);
    detail::write_text(out / "report.csv", report_to_csv(report));
    detail::write_text(out / "report.json", report_to_json(report).dump(1) + "\n");
    detail::write_text(out / "plan.json", plan_.source.dump(1) + "\n");
  }

  ExperimentPlan plan_;
  RunOptions options_;
  std::vector<LoadedTask> tasks_;
  data::HashingFeaturizer featurizer_;
  std::size_t threads_ = 1;
  std::size_t inner_threads_ = 1;
  std::vector<detail::TaskTables> tables_;
  std::map<std::uint64_t, detail::SeedData> seed_data_;
  std::mutex log_mutex_;
};

inline ExperimentResult run_experiment(const ExperimentPlan& plan, RunOptions options = {}) {
  return ExperimentRunner(plan, options).run();
}

/// Runs every chain of the plan and returns its rows in canonical order.
inline ResultTable run_chain(const ExperimentPlan& plan, RunOptions options = {}) {
  return run_experiment(plan, options).table;
}

}  // namespace driftguard::harness
