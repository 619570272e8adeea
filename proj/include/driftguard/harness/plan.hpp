// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Experiment plans: one JSON document fixes the tasks, chain order, the
// strategies to chain, baselines, seeds, model and stage hyperparameters.
//
//   {
//     "schema_version": 1,
//     "name": "glue-like-2",
//     "preset": "glue-like-2",            // or "tasks": [...]
//     "data_seed": 17,
//     "order": ["nli", "pairs"],          // default: descending train size
//     "strategies": ["EM", "UKD", {"label": "mix", "stages": ["EM", "UKD"]}],
//     "baselines": ["ST", "MTL"],
//     "seeds": [17],
//     "slicing": false,
//     "model": {"featurizer": {...}, "hidden": [64, 64], "dropout": 0.1},
//     "stage": {"learning_rate": 0.01, ...},
//     "overrides": {"EWC": {"ewc_lambda": 1000}},
//     "output_dir": "runs/glue2"
//   }
//
// Task entries are {"synthetic": <generator spec>} or {"task": <task spec>,
// "data": "file.jsonl"}, each with an optional "upsample". Data paths are
// resolved against the plan file's directory; output_dir against the
// working directory.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "driftguard/data/io.hpp"
#include "driftguard/data/presets.hpp"
#include "driftguard/error.hpp"
#include "driftguard/json_util.hpp"
#include "driftguard/model/checkpoint.hpp"
#include "driftguard/strategies/config.hpp"
#include "driftguard/strategies/pipeline.hpp"

namespace driftguard::harness {

using strategies::StageConfig;
using strategies::Strategy;

inline constexpr int kPlanSchemaVersion = 1;

struct TaskSource {
  std::optional<data::SyntheticTaskSpec> synthetic;
  std::optional<model::TaskSpec> spec;
  std::filesystem::path data;
  std::size_t upsample = 1;

  std::string task_id() const { return synthetic ? synthetic->task.task_id : spec->task_id; }
};

/// A chained run. `stages` may be shorter than the chain; its last entry
/// then repeats.
struct ChainSpec {
  std::string label;
  std::vector<Strategy> stages;

  Strategy at(std::size_t stage_index) const { return stages.at(std::min(stage_index, stages.size() - 1)); }
  bool baseline() const {
    return stages.size() == 1 && (stages[0] == Strategy::kST || stages[0] == Strategy::kMTL);
  }
};

struct ExperimentPlan {
  std::string name = "experiment";
  std::optional<std::string> preset;
  std::uint64_t data_seed = 17;
  std::vector<TaskSource> tasks;
  std::vector<std::string> order;
  std::vector<ChainSpec> chains;  // baselines included, after the strategies
  std::vector<std::uint64_t> seeds{17};
  bool slicing = false;
  strategies::ModelRecipe model;
  StageConfig stage;
  std::map<Strategy, json> overrides;
  std::filesystem::path output_dir;
  json source;  // the document as read

  /// Stage hyperparameters for one strategy and seed.
  StageConfig stage_config(Strategy s, std::uint64_t seed) const {
    StageConfig c = stage;
    if (auto it = overrides.find(s); it != overrides.end()) {
      c = strategies::stage_config_from_json<ConfigError>(it->second, "overrides." + strategies::to_string(s), c);
    }
    c.strategy = s;
    c.seed = seed;
    return c;
  }
};

namespace detail {

inline void check_label(const std::string& s, const std::string& where) {
  if (s.empty() || s.find_first_of(",\"\n\r/\\") != std::string::npos) {
    throw ConfigError(where + ": '" + s + "' must be non-empty without commas, quotes, slashes or newlines");
  }
}

inline Strategy parse_strategy_cfg(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a strategy name");
  try {
    return strategies::parse_strategy(j.get<std::string>());
  } catch (const InvalidInput& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace detail

inline ExperimentPlan plan_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  JsonReader<ConfigError> r(j, "plan");
  r.only({"schema_version", "name", "preset", "data_seed", "tasks", "order", "strategies", "baselines", "seeds",
          "slicing", "model", "stage", "overrides", "output_dir"});
  if (r.get<int>("schema_version") != kPlanSchemaVersion) {
    r.fail("unsupported schema_version (expected " + std::to_string(kPlanSchemaVersion) + ")");
  }
  ExperimentPlan p;
  p.source = j;
  p.name = r.get_or<std::string>("name", p.name);
  p.data_seed = r.get_or<std::uint64_t>("data_seed", p.data_seed);

  if (r.has("preset") == r.has("tasks")) r.fail("give exactly one of 'preset' and 'tasks'");
  if (r.has("preset")) {
    p.preset = r.get<std::string>("preset");
    std::vector<data::PresetTask> tasks;
    try {
      tasks = data::preset(*p.preset, p.data_seed);
    } catch (const NotFound& e) {
      r.fail(e.what());
    }
    for (auto& t : tasks) p.tasks.push_back({std::move(t.spec), std::nullopt, {}, t.upsample});
    const data::PresetModel pm;
    p.model.featurizer.dimension = pm.feature_dimension;
    p.model.hidden = pm.hidden;
    p.model.dropout = pm.dropout;
    p.stage.learning_rate = pm.learning_rate;
    p.stage.batch_size = pm.batch_size;
  } else {
    const json& arr = r.at("tasks");
    if (!arr.is_array() || arr.empty()) r.fail("'tasks' must be a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string loc = "plan.tasks[" + std::to_string(i) + "]";
      JsonReader<ConfigError> t(arr[i], loc);
      t.only({"synthetic", "task", "data", "upsample"});
      TaskSource src;
      src.upsample = t.get_or<std::size_t>("upsample", 1);
      if (src.upsample == 0) t.fail("upsample must be >= 1");
      if (t.has("synthetic")) {
        if (t.has("task") || t.has("data")) t.fail("'synthetic' excludes 'task' and 'data'");
        src.synthetic = data::synthetic_spec_from_json<ConfigError>(t.at("synthetic"), t.path("synthetic"));
      } else {
        if (!t.has("task") || !t.has("data")) t.fail("needs 'synthetic' or both 'task' and 'data'");
        src.spec = task_spec_from_json<ConfigError>(t.at("task"), t.path("task"));
        src.data = t.get<std::string>("data");
        if (src.data.is_relative()) src.data = base_dir / src.data;
      }
      p.tasks.push_back(std::move(src));
    }
  }
  std::set<std::string> ids;
  for (const auto& t : p.tasks) {
    detail::check_label(t.task_id(), "plan.tasks");
    if (!ids.insert(t.task_id()).second) r.fail("duplicate task id '" + t.task_id() + "'");
  }

  p.order = r.get_or<std::vector<std::string>>("order", {});
  if (!p.order.empty()) {
    if (std::set<std::string>(p.order.begin(), p.order.end()) != ids || p.order.size() != ids.size()) {
      r.fail("'order' must list every task exactly once");
    }
  }

  std::set<std::string> labels;
  if (r.has("strategies")) {
    const json& arr = r.at("strategies");
    if (!arr.is_array()) r.fail("'strategies' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string loc = "plan.strategies[" + std::to_string(i) + "]";
      ChainSpec c;
      if (arr[i].is_string()) {
        c.stages = {detail::parse_strategy_cfg(arr[i], loc)};
        c.label = strategies::to_string(c.stages[0]);
      } else {
        JsonReader<ConfigError> cr(arr[i], loc);
        cr.only({"label", "stages"});
        c.label = cr.get<std::string>("label");
        const json& st = cr.at("stages");
        if (!st.is_array() || st.empty()) cr.fail("'stages' must be a non-empty array");
        for (std::size_t k = 0; k < st.size(); ++k) {
          c.stages.push_back(detail::parse_strategy_cfg(st[k], loc + ".stages[" + std::to_string(k) + "]"));
        }
      }
      for (Strategy s : c.stages) {
        if (!strategies::is_continual(s)) throw ConfigError(loc + ": ST and MTL belong in 'baselines'");
      }
      detail::check_label(c.label, loc);
      if (!labels.insert(c.label).second) throw ConfigError(loc + ": duplicate label '" + c.label + "'");
      p.chains.push_back(std::move(c));
    }
  }
  if (r.has("baselines")) {
    const json& arr = r.at("baselines");
    if (!arr.is_array()) r.fail("'baselines' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string loc = "plan.baselines[" + std::to_string(i) + "]";
      const Strategy s = detail::parse_strategy_cfg(arr[i], loc);
      if (strategies::is_continual(s)) throw ConfigError(loc + ": only ST and MTL are baselines");
      if (!labels.insert(strategies::to_string(s)).second) throw ConfigError(loc + ": duplicate baseline");
      p.chains.push_back({strategies::to_string(s), {s}});
    }
  }
  if (p.chains.empty()) r.fail("nothing to run: 'strategies' and 'baselines' are both empty");

  p.seeds = r.get_or<std::vector<std::uint64_t>>("seeds", p.seeds);
  if (p.seeds.empty()) r.fail("'seeds' must not be empty");
  if (std::set<std::uint64_t>(p.seeds.begin(), p.seeds.end()).size() != p.seeds.size()) r.fail("duplicate seed");
  p.slicing = r.get_or<bool>("slicing", false);

  if (r.has("model")) {
    JsonReader<ConfigError> m = r.child("model");
    m.only({"featurizer", "hidden", "dropout"});
    if (m.has("featurizer")) {
      p.model.featurizer = model::detail::featurizer_from_json<ConfigError>(m.at("featurizer"), m.path("featurizer"));
    }
    p.model.hidden = m.get_or<std::vector<std::size_t>>("hidden", p.model.hidden);
    p.model.dropout = m.get_or<double>("dropout", p.model.dropout);
    if (p.model.hidden.empty()) m.fail("'hidden' needs at least one layer");
    for (std::size_t h : p.model.hidden) {
      if (h == 0) m.fail("hidden sizes must be positive");
    }
    if (!(p.model.dropout >= 0.0 && p.model.dropout < 1.0)) m.fail("dropout must be in [0, 1)");
  }
  if (r.has("stage")) {
    json base = r.at("stage");
    if (base.is_object() && base.contains("strategy")) r.fail("'stage' must not name a strategy");
    if (base.is_object() && base.contains("seed")) r.fail("'stage' must not set a seed; use 'seeds'");
    p.stage = strategies::stage_config_from_json<ConfigError>(base, "plan.stage", p.stage);
  }
  if (r.has("overrides")) {
    const json& o = r.at("overrides");
    if (!o.is_object()) r.fail("'overrides' must be an object");
    for (const auto& [name, cfg] : o.items()) {
      const Strategy s = detail::parse_strategy_cfg(json(name), "plan.overrides");
      if (cfg.is_object() && (cfg.contains("strategy") || cfg.contains("seed"))) {
        throw ConfigError("plan.overrides." + name + ": must not set strategy or seed");
      }
      p.overrides[s] = cfg;
      (void)p.stage_config(s, 0);  // validate now
    }
  }
  p.output_dir = r.get_or<std::string>("output_dir", "runs/" + p.name);
  return p;
}

/// Reads and validates a plan file. A missing or unreadable file is a
/// configuration error naming the path.
inline ExperimentPlan load_plan(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return plan_from_json(j, path.parent_path());
}

/// The datasets of a plan in chain order, generated or loaded.
struct LoadedTask {
  data::TaskDataset dataset;
  std::size_t upsample = 1;
  /// Splits evaluated after every stage: dev (when present) then eval splits.
  std::vector<std::string> eval_splits;

  const std::string& task_id() const { return dataset.spec.task_id; }
};

/// Materializes every task and checks that the plan can run to completion:
/// labeled training data, declared eval splits, unlabeled streams for UKD and
/// enough training rows for the slicing protocol. Nothing is trained here.
inline std::vector<LoadedTask> load_tasks(const ExperimentPlan& plan) {
  std::vector<LoadedTask> loaded;
  for (const auto& src : plan.tasks) {
    LoadedTask t;
    t.upsample = src.upsample;
    if (src.synthetic) {
      t.dataset = data::gen_synthetic(*src.synthetic).dataset;
    } else {
      if (!std::filesystem::exists(src.data)) {
        throw ConfigError("dataset '" + src.data.string() + "' for task '" + src.spec->task_id + "' does not exist");
      }
      try {
        t.dataset = data::load_dataset(src.data, *src.spec);
      } catch (const DataError& e) {
        throw ConfigError(std::string("task '") + src.spec->task_id + "': " + e.what());
      }
    }
    loaded.push_back(std::move(t));
  }

  if (plan.order.empty()) {
    // Descending training-set size; ties keep plan order.
    std::stable_sort(loaded.begin(), loaded.end(), [](const LoadedTask& a, const LoadedTask& b) {
      return a.dataset.split_size(data::kTrainSplit) > b.dataset.split_size(data::kTrainSplit);
    });
  } else {
    std::vector<LoadedTask> ordered;
    for (const auto& id : plan.order) {
      auto it = std::find_if(loaded.begin(), loaded.end(), [&](const LoadedTask& t) { return t.task_id() == id; });
      ordered.push_back(std::move(*it));
    }
    loaded = std::move(ordered);
  }

  bool needs_streams = false;
  for (const auto& c : plan.chains) {
    for (Strategy s : c.stages) needs_streams = needs_streams || s == Strategy::kUKD;
  }
  const std::size_t n = loaded.size();
  for (std::size_t j = 0; j < n; ++j) {
    auto& t = loaded[j];
    const std::string& id = t.task_id();
    std::size_t labeled = 0;
    for (const auto* e : t.dataset.split(data::kTrainSplit)) labeled += e->label ? 1 : 0;
    if (labeled == 0) throw ConfigError("task '" + id + "' has no labeled training examples");
    if (t.dataset.has_split(data::kDevSplit)) t.eval_splits.push_back(data::kDevSplit);
    for (const auto& s : t.dataset.spec.eval_splits) {
      if (!t.dataset.has_split(s)) throw ConfigError("task '" + id + "' lacks its eval split '" + s + "'");
      if (s != data::kDevSplit) t.eval_splits.push_back(s);
    }
    if (plan.slicing) {
      const std::size_t need = n - j;
      if (t.dataset.split_size(data::kTrainSplit) < need) {
        throw ConfigError("task '" + id + "' has too few training examples for " + std::to_string(need) +
                          " slices");
      }
    } else if (needs_streams && j + 1 < n && !t.dataset.has_split(data::kUnlabeledSplit)) {
      throw ConfigError("task '" + id + "' has no unlabeled split to stream to later UKD stages; enable slicing "
                        "or add one");
    }
  }
  return loaded;
}

}  // namespace driftguard::harness
