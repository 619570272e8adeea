// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <set>

#include "driftguard/data/dataset.hpp"
#include "driftguard/data/io.hpp"
#include "driftguard/data/presets.hpp"
#include "driftguard/data/synthetic.hpp"
#include "test_support.hpp"

using namespace driftguard;
using namespace driftguard::data;
using driftguard::testing::TempDir;

namespace {

model::TaskSpec pair_task() {
  auto s = driftguard::testing::binary_task("pair");
  s.input_arity = model::InputArity::kTwoSegment;
  return s;
}

TaskDataset numbered(std::size_t n) {
  TaskDataset d{driftguard::testing::binary_task("t"), {}, "test"};
  for (std::size_t i = 0; i < n; ++i) {
    d.examples.push_back({"e" + std::to_string(i), "x" + std::to_string(i), std::nullopt, i % 2, kTrainSplit});
  }
  d.examples.push_back({"dev0", "dev text", std::nullopt, 0, kDevSplit});
  return d;
}

double l2(const SparseFeatures& f) {
  double s = 0.0;
  for (double v : f.value) s += v * v;
  return std::sqrt(s);
}

SyntheticTaskSpec two_class_spec(std::vector<double> prior, std::size_t n) {
  SyntheticTaskSpec s;
  s.task = driftguard::testing::binary_task("syn");
  s.vocab_start = 100;
  s.vocab_size = 20;
  s.unigrams_a = keyword_unigrams(2, 20, 0, KeywordRecipe{10, 1.0, 0});
  // Keyword-only rows: class 0 uses tokens 0..9, class 1 uses 10..19.
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t k = 0; k < 20; ++k) s.unigrams_a[c][k] = (k / 10 == c) ? 0.1 : 0.0;
  }
  s.prior = std::move(prior);
  s.seed = 99;
  s.split_sizes = {{kTrainSplit, n}, {kDevSplit, 50}};
  return s;
}

}  // namespace

TEST_CASE("load_dataset tsv", "[data][io]") {
  TempDir dir("io");
  const auto spec = driftguard::testing::binary_task("t");
  {
    std::ofstream(dir / "ok.tsv") << "text_a\tlabel\nhello world\tpos\nbad day\tneg\nfine\tpos\n";
  }
  const auto d = load_dataset(dir / "ok.tsv", FileFormat::kTsv, spec);
  CHECK(d.examples.size() == 3);
  CHECK(d.examples[0].label == std::optional<std::size_t>{1});
  CHECK(d.split_size(kTrainSplit) == 3);

  {
    std::ofstream(dir / "bad.tsv") << "text_a\tlabel\nhello\tmaybe\n";
  }
  CHECK_THROWS_WITH(load_dataset(dir / "bad.tsv", FileFormat::kTsv, spec),
                    Catch::Matchers::ContainsSubstring("bad.tsv:2") &&
                        Catch::Matchers::ContainsSubstring("maybe"));

  {
    std::ofstream(dir / "arity.tsv") << "text_a\ttext_b\tlabel\nonly a\t\tpos\n";
  }
  CHECK_THROWS_AS(load_dataset(dir / "arity.tsv", FileFormat::kTsv, pair_task()), DataError);
  CHECK_THROWS_AS(load_dataset(dir / "absent.tsv", FileFormat::kTsv, spec), DataError);
  {
    std::ofstream(dir / "col.tsv") << "text_a\tcolour\nx\ty\n";
  }
  CHECK_THROWS_AS(load_dataset(dir / "col.tsv", FileFormat::kTsv, spec), DataError);
}

TEST_CASE("load_dataset jsonl", "[data][io]") {
  TempDir dir("jsonl");
  const auto spec = pair_task();
  {
    std::ofstream(dir / "u.jsonl") << R"({"text_a": "q one", "text_b": "a one"})" "\n"
                                   << R"({"text_a": "q two", "text_b": "a two", "split": "unlabeled"})" "\n"
                                   << R"({"text_a": "q three", "text_b": "a three", "label": 1})" "\n";
  }
  const auto d = load_dataset(dir / "u.jsonl", spec);
  REQUIRE(d.examples.size() == 3);
  CHECK_FALSE(d.examples[0].label.has_value());
  CHECK_FALSE(d.examples[1].label.has_value());
  CHECK(d.examples[1].split == kUnlabeledSplit);
  CHECK(d.examples[2].label == std::optional<std::size_t>{1});

  {
    std::ofstream(dir / "bad.jsonl") << R"({"text_a": "x", "text_b": "y", "lable": "pos"})" "\n";
  }
  CHECK_THROWS_WITH(load_dataset(dir / "bad.jsonl", spec), Catch::Matchers::ContainsSubstring("lable"));
}

TEST_CASE("load -> write -> load is lossless", "[data][io]") {
  TempDir dir("roundtrip");
  auto spec = pair_task();
  spec.eval_splits = {"matched", "mismatched"};
  TaskDataset d{spec, {}, "mem"};
  d.examples = {{"a", "first  one", "second", 1, kTrainSplit},
                {"b", "dev q", "dev a", 0, kDevSplit},
                {"c", "m q", "m a", 1, "matched"},
                {"d", "mm q", "mm a", 0, "mismatched"},
                {"e", "u q", "u a", std::nullopt, kUnlabeledSplit}};
  for (auto fmt : {FileFormat::kJsonl, FileFormat::kTsv}) {
    const auto path = dir / (fmt == FileFormat::kTsv ? "d.tsv" : "d.jsonl");
    if (fmt == FileFormat::kTsv) {
      write_tsv(d, path);
    } else {
      write_jsonl(d, path);
    }
    const auto once = load_dataset(path, fmt, spec);
    CHECK(once.examples == d.examples);
    const auto path2 = dir / (fmt == FileFormat::kTsv ? "d2.tsv" : "d2.jsonl");
    fmt == FileFormat::kTsv ? write_tsv(once, path2) : write_jsonl(once, path2);
    CHECK(load_dataset(path2, fmt, spec).examples == once.examples);
  }
}

TEST_CASE("featurize", "[data][featurizer]") {
  const HashingFeaturizer f;
  const auto a = f.featurize_sparse("The cat sat", std::string_view("a dog ran home"));
  CHECK(a.index == f.featurize_sparse("The cat sat", std::string_view("a dog ran home")).index);
  CHECK(a.value == f.featurize_sparse("The cat sat", std::string_view("a dog ran home")).value);
  CHECK(std::abs(l2(a) - 1.0) < 1e-9);
  CHECK(f.featurize_sparse("THE  Cat\tsat").index == f.featurize_sparse("the cat sat").index);
  CHECK_THROWS_AS(f.featurize_sparse("   "), InvalidInput);

  // Golden values from tests/oracles/featurizer_oracle.py (independent
  // reference). Every entry has magnitude 1/sqrt(12).
  const double m = 1.0 / std::sqrt(12.0);
  const std::vector<std::uint32_t> ab_index{20, 509, 835, 1370, 1700, 2436, 2801, 3023, 3099, 3162, 3502, 3928};
  const std::vector<double> ab_sign{1, 1, 1, 1, 1, 1, 1, -1, 1, -1, 1, 1};
  const std::vector<std::uint32_t> ba_index{610, 646, 1336, 1359, 1371, 2174, 2902, 3208, 3268, 3427, 3539, 3913};
  const std::vector<double> ba_sign{1, -1, -1, 1, 1, -1, 1, 1, 1, 1, 1, -1};
  const auto b = f.featurize_sparse("a dog ran home", std::string_view("The cat sat"));
  REQUIRE(a.index == ab_index);
  REQUIRE(b.index == ba_index);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(std::abs(a.value[i] - ab_sign[i] * m) < 1e-15);
    CHECK(std::abs(b.value[i] - ba_sign[i] * m) < 1e-15);
  }
  CHECK(f.featurize("The cat sat", std::string_view("a dog ran home")) !=
        f.featurize("a dog ran home", std::string_view("The cat sat")));
}

TEST_CASE("featurizer norm property", "[data][featurizer][property]") {
  FeaturizerConfig cfg;
  cfg.dimension = 64;  // small D forces collisions and cancellations
  const HashingFeaturizer f(cfg);
  nn::Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const std::size_t len = 1 + rng.below(12);
    for (std::size_t t = 0; t < len; ++t) text += "t" + std::to_string(rng.below(30)) + " ";
    const auto v = f.featurize_sparse(text);
    if (v.index.empty()) continue;  // every bucket cancelled
    CHECK(std::abs(l2(v) - 1.0) < 1e-9);
  }
  FeaturizerConfig bad;
  bad.dimension = 100;
  CHECK_THROWS_AS(HashingFeaturizer(bad), InvalidInput);
}

TEST_CASE("gen_synthetic", "[data][synthetic]") {
  SECTION("disjoint keywords are separable") {
    const auto g = gen_synthetic(two_class_spec({0.5, 0.5}, 300));
    CHECK(g.bayes.accuracy(g.dataset, kTrainSplit) == 1.0);
    CHECK(g.bayes.accuracy(g.dataset, kDevSplit) == 1.0);
  }
  SECTION("prior [0.9, 0.1] class-0 count lies in the 99% binomial interval") {
    const auto g = gen_synthetic(two_class_spec({0.9, 0.1}, 1000));
    std::size_t zeros = 0;
    for (const Example* e : g.dataset.split(kTrainSplit)) zeros += *e->label == 0 ? 1 : 0;
    CHECK(zeros >= 872);
    CHECK(zeros <= 925);
  }
  SECTION("deterministic per seed") {
    const auto spec = two_class_spec({0.6, 0.4}, 200);
    CHECK(gen_synthetic(spec).dataset == gen_synthetic(spec).dataset);
    auto other = spec;
    other.seed = 100;
    CHECK_FALSE(gen_synthetic(other).dataset == gen_synthetic(spec).dataset);
  }
  SECTION("empty vocabulary is rejected") {
    auto spec = two_class_spec({0.5, 0.5}, 10);
    spec.vocab_size = 0;
    CHECK_THROWS_AS(gen_synthetic(spec), InvalidInput);
  }
  SECTION("unlabeled split carries no labels") {
    auto spec = two_class_spec({0.5, 0.5}, 10);
    spec.split_sizes[kUnlabeledSplit] = 25;
    const auto g = gen_synthetic(spec);
    const auto u = g.dataset.split(kUnlabeledSplit);
    CHECK(u.size() == 25);
    for (const Example* e : u) CHECK_FALSE(e->label.has_value());
  }
}

TEST_CASE("synthetic spec json round trip", "[data][synthetic]") {
  for (const auto& t : glue_like()) {
    const auto j = synthetic_spec_to_json(t.spec);
    const auto back = synthetic_spec_from_json(j, "spec");
    CHECK(gen_synthetic(back).dataset == gen_synthetic(t.spec).dataset);
  }
  auto j = synthetic_spec_to_json(glue_like_2()[1].spec);
  j["colour"] = 1;
  CHECK_THROWS_WITH(synthetic_spec_from_json(j, "spec"), Catch::Matchers::ContainsSubstring("colour"));
}

TEST_CASE("presets", "[data][synthetic]") {
  for (const auto& name : preset_names()) {
    const auto tasks = preset(name);
    std::vector<SyntheticTaskSpec> specs;
    for (const auto& t : tasks) specs.push_back(t.spec);
    CHECK(vocab_blocks_disjoint(specs));
  }
  const auto glue = glue_like();
  REQUIRE(glue.size() == 5);
  for (std::size_t i = 1; i < glue.size(); ++i) {
    CHECK(glue[i].spec.split_sizes.at(kTrainSplit) < glue[i - 1].spec.split_sizes.at(kTrainSplit));
  }
  CHECK(glue.back().upsample == 4);
  CHECK(glue[0].spec.task.eval_splits == std::vector<std::string>{"matched", "mismatched"});

  const auto assistant = assistant_like();
  REQUIRE(assistant.size() == 5);
  for (const auto& t : assistant) {
    CHECK(t.spec.class_count() >= 5);
    CHECK(t.spec.class_count() <= 13);
    CHECK(t.spec.prior.front() > 2.0 * t.spec.prior.back());  // skewed
  }
  CHECK_THROWS_AS(preset("nope"), NotFound);

  // Genre filler on the mismatched split must not change the Bayes rule.
  const auto g = gen_synthetic(glue[0].spec);
  CHECK(g.bayes.accuracy(g.dataset, "mismatched") > 0.5);
}

TEST_CASE("slice", "[data][slice]") {
  const auto d = numbered(100);
  const auto s = slice(d, 5, 3);
  REQUIRE(s.count() == 5);
  std::set<std::size_t> seen;
  for (const auto& part : s.slices) {
    CHECK(part.size() == 20);
    for (std::size_t i : part) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == 100);

  const auto one = slice(d, 1, 3);
  CHECK(one.slices[0].size() == 100);

  std::vector<std::size_t> sizes;
  for (const auto& part : slice(numbered(103), 5, 3).slices) sizes.push_back(part.size());
  CHECK(sizes == std::vector<std::size_t>{20, 20, 20, 20, 23});
  CHECK_THROWS_AS(slice(numbered(4), 5, 3), InvalidInput);
  CHECK_THROWS_AS(slice(d, 0, 3), InvalidInput);
}

TEST_CASE("slice disjointness property", "[data][slice][property]") {
  nn::Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    const std::size_t k = 1 + rng.below(n);
    const auto d = numbered(n);
    const auto s = slice(d, k, trial);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& part : s.slices) {
      total += part.size();
      seen.insert(part.begin(), part.end());
    }
    CHECK(total == n);
    CHECK(seen.size() == n);
    CHECK(s.slices.back().size() == n / k + n % k);
  }
}

TEST_CASE("upsample", "[data]") {
  const auto d = numbered(50);
  CHECK(upsample(d, 4).split_size(kTrainSplit) == 200);
  CHECK(upsample(d, 4).split_size(kDevSplit) == 1);
  CHECK(upsample(d, 1) == d);
  CHECK_THROWS_AS(upsample(d, 0), InvalidInput);
}

TEST_CASE("batches", "[data]") {
  std::vector<std::size_t> sizes;
  for (const auto& b : batches(130, 64, 5, 0)) sizes.push_back(b.size());
  CHECK(sizes == std::vector<std::size_t>{64, 64, 2});
  CHECK(batches(130, 64, 5, 2) == batches(130, 64, 5, 2));
  // Frozen after one run: epochs 0 and 1 of a 1000-example set differ.
  const auto e0 = batches(1000, 1000, 17, 0)[0];
  const auto e1 = batches(1000, 1000, 17, 1)[0];
  CHECK(e0 != e1);
  std::size_t same = 0;
  for (std::size_t i = 0; i < 1000; ++i) same += e0[i] == e1[i] ? 1 : 0;
  CHECK(same == 0);
  CHECK(e0[0] == 549);
  CHECK(e1[0] == 918);
  CHECK_THROWS_AS(batches(10, 0, 1, 0), InvalidInput);
}
