// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Shipped synthetic benchmarks. Each task owns a disjoint vocabulary block so
// a model trained on one task sees none of the others' tokens.

#include <string>
#include <vector>

#include "driftguard/data/synthetic.hpp"

namespace driftguard::data {

struct PresetTask {
  SyntheticTaskSpec spec;
  /// Training-set repetition applied by the experiment plan (rare-task boost).
  std::size_t upsample = 1;
};

namespace detail {

inline constexpr std::size_t kPresetBlock = 400;

struct TaskRecipe {
  std::string id;
  std::vector<std::string> labels;
  model::InputArity arity = model::InputArity::kTwoSegment;
  model::PrimaryMetric metric = model::PrimaryMetric::kAccuracy;
  std::vector<std::string> eval_splits{"test"};
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t eval = 0;  // per eval split
  KeywordRecipe words;
  double prior_skew = 0.0;
  std::size_t min_length = 6;
  std::size_t max_length = 12;
  std::size_t upsample = 1;
};

inline PresetTask build(const TaskRecipe& r, std::size_t block, std::uint64_t seed) {
  SyntheticTaskSpec s;
  s.task.task_id = r.id;
  s.task.label_names = r.labels;
  s.task.input_arity = r.arity;
  s.task.primary_metric = r.metric;
  s.task.eval_splits = r.eval_splits;
  s.vocab_start = block * kPresetBlock;
  s.vocab_size = kPresetBlock;
  const std::size_t k = r.labels.size();
  const std::size_t used = r.words.shared_words + k * r.words.keywords_per_class;
  s.unigrams_a = keyword_unigrams(k, kPresetBlock, 0, r.words);
  if (r.arity == model::InputArity::kTwoSegment) {
    // Segment b uses the next stretch of the block so the two segments differ.
    s.unigrams_b = keyword_unigrams(k, kPresetBlock, used, r.words);
  }
  s.min_length = r.min_length;
  s.max_length = r.max_length;
  s.prior = zipf_prior(k, r.prior_skew);
  s.seed = nn::Rng::mix(seed ^ nn::Rng::mix(block + 1));
  s.split_sizes = {{kTrainSplit, r.train}, {kDevSplit, r.dev}, {kUnlabeledSplit, r.train}};
  for (const auto& split : r.eval_splits) s.split_sizes[split] = r.eval;
  return PresetTask{std::move(s), r.upsample};
}

inline std::vector<std::string> intents(const std::string& domain, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(domain + "_intent" + std::to_string(i));
  return out;
}

}  // namespace detail

/// Five sentence-pair tasks in descending size: a 3-way inference task with
/// matched/mismatched eval splits, then four binary tasks, the last of which
/// is small and upsampled 4x.
inline std::vector<PresetTask> glue_like(std::uint64_t seed = 17) {
  using model::PrimaryMetric;
  const KeywordRecipe words{4, 3.0, 10};
  std::vector<detail::TaskRecipe> recipes{
      {"nli", {"entailment", "neutral", "contradiction"}, model::InputArity::kTwoSegment,
       PrimaryMetric::kAccuracy, {"matched", "mismatched"}, 3000, 1000, 1000, words},
      {"pairs", {"different", "duplicate"}, model::InputArity::kTwoSegment, PrimaryMetric::kF1Binary,
       {"test"}, 2400, 1000, 1000, words},
      {"qa", {"not_entailment", "entailment"}, model::InputArity::kTwoSegment, PrimaryMetric::kAccuracy,
       {"test"}, 1800, 600, 1000, words},
      {"paraphrase", {"no", "yes"}, model::InputArity::kTwoSegment, PrimaryMetric::kF1Binary,
       {"test"}, 1200, 400, 1000, words},
      {"rte", {"not_entailment", "entailment"}, model::InputArity::kTwoSegment, PrimaryMetric::kAccuracy,
       {"test"}, 400, 300, 1000, words, 0.0, 6, 12, 4},
  };
  std::vector<PresetTask> out;
  for (std::size_t i = 0; i < recipes.size(); ++i) out.push_back(detail::build(recipes[i], i, seed));

  // The mismatched split of the first task mixes in class-independent filler
  // drawn from an unused stretch of its block: a genre shift that leaves the
  // Bayes rule unchanged.
  auto& nli = out[0].spec;
  const std::size_t used = 2 * (words.shared_words + 3 * words.keywords_per_class);
  nli.genres["mismatched"] = GenreNoise{nli.vocab_start + used, 40, 0.15};
  return out;
}

/// The first two glue-like tasks: the smallest forgetting testbed.
inline std::vector<PresetTask> glue_like_2(std::uint64_t seed = 17) {
  auto all = glue_like(seed);
  all.resize(2);
  return all;
}

/// Five intent-classification domains (5 to 13 intents) with Zipf-skewed
/// priors, scored by macro F1. Sizes shrink along the chain.
inline std::vector<PresetTask> assistant_like(std::uint64_t seed = 17) {
  using model::PrimaryMetric;
  const KeywordRecipe words{3, 30.0, 20};
  struct Domain {
    const char* name;
    std::size_t intents;
    std::size_t train, dev, test;
  };
  const Domain domains[] = {{"music", 12, 9500, 1000, 1000},
                            {"weather", 11, 6550, 1000, 1000},
                            {"timer", 5, 4975, 800, 1000},
                            {"shopping", 11, 3055, 600, 1000},
                            {"home", 13, 1980, 400, 1000}};
  std::vector<PresetTask> out;
  std::size_t block = 0;
  for (const auto& d : domains) {
    detail::TaskRecipe r;
    r.id = d.name;
    r.labels = detail::intents(d.name, d.intents);
    r.arity = model::InputArity::kOneSegment;
    r.metric = PrimaryMetric::kF1Macro;
    r.train = d.train;
    r.dev = d.dev;
    r.eval = d.test;
    r.words = words;
    r.prior_skew = 0.8;
    r.min_length = 5;
    r.max_length = 10;
    out.push_back(detail::build(r, block++, seed));
  }
  return out;
}

/// Model and optimizer settings the shipped benchmarks were calibrated with.
struct PresetModel {
  std::size_t feature_dimension = 1024;
  std::vector<std::size_t> hidden{64, 64, 64, 64};
  double dropout = 0.1;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
};

inline std::vector<std::string> preset_names() { return {"glue-like", "glue-like-2", "assistant-like"}; }

inline std::vector<PresetTask> preset(const std::string& name, std::uint64_t seed = 17) {
  if (name == "glue-like") return glue_like(seed);
  if (name == "glue-like-2") return glue_like_2(seed);
  if (name == "assistant-like") return assistant_like(seed);
  throw NotFound("unknown preset '" + name + "' (known: glue-like, glue-like-2, assistant-like)");
}

}  // namespace driftguard::data
