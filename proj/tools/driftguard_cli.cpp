// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

// driftguard command line: gen, run, eval, distill, report.
// Exit codes: 0 ok, 1 usage, 2 data or config problem, 3 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "driftguard/data/io.hpp"
#include "driftguard/data/presets.hpp"
#include "driftguard/data/synthetic.hpp"
#include "driftguard/harness/emit.hpp"
#include "driftguard/harness/runner.hpp"
#include "driftguard/model/checkpoint.hpp"
#include "driftguard/strategies/distill.hpp"

namespace fs = std::filesystem;
using namespace driftguard;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kRuntimeError = 3;

json read_json_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

model::Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("checkpoint '" + path.string() + "' does not exist");
  return model::load(path);
}

/// The head to use: the named one, or the only one.
const model::TaskSpec& pick_task(const model::MultiHeadModel& m, const std::string& task) {
  if (!task.empty()) {
    try {
      return m.task(task);
    } catch (const NotFound& e) {
      throw DataError(e.what());
    }
  }
  if (m.head_count() != 1) throw ConfigError("checkpoint has several heads; pick one with --task");
  return m.tasks().front();
}

data::TaskDataset load_data(const fs::path& path, const model::TaskSpec& spec, const std::string& default_split) {
  if (!fs::exists(path)) throw DataError("dataset '" + path.string() + "' does not exist");
  try {
    return data::load_dataset(path, spec, default_split);
  } catch (const InvalidInput& e) {
    throw DataError(e.what());
  }
}

// ---- gen --------------------------------------------------------------------

struct GenArgs {
  std::string config;
  std::string out = ".";
  std::string format = "jsonl";
  std::optional<std::uint64_t> seed;
};

/// Accepts {"preset": name}, a single generator spec, or an array of specs.
std::vector<data::SyntheticTaskSpec> gen_specs(const json& j, const std::optional<std::uint64_t>& seed) {
  std::vector<data::SyntheticTaskSpec> specs;
  if (j.is_object() && j.contains("preset")) {
    JsonReader<ConfigError> r(j, "gen");
    r.only({"preset", "data_seed"});
    const std::uint64_t s = seed.value_or(r.get_or<std::uint64_t>("data_seed", 17));
    try {
      for (auto& t : data::preset(r.get<std::string>("preset"), s)) specs.push_back(std::move(t.spec));
    } catch (const NotFound& e) {
      throw ConfigError(e.what());
    }
    return specs;
  }
  const json arr = j.is_array() ? j : json::array({j});
  for (std::size_t i = 0; i < arr.size(); ++i) {
    specs.push_back(data::synthetic_spec_from_json<ConfigError>(arr[i], "spec[" + std::to_string(i) + "]"));
    if (seed) specs.back().seed = *seed;
  }
  return specs;
}

int cmd_gen(const GenArgs& a) {
  const auto format = data::parse_format(a.format);
  const auto specs = gen_specs(read_json_file(a.config), a.seed);
  fs::create_directories(a.out);
  json summary = json::array();
  for (const auto& spec : specs) {
    const auto task = data::gen_synthetic(spec);
    const std::string id = spec.task.task_id;
    const fs::path file = fs::path(a.out) / (id + (format == data::FileFormat::kJsonl ? ".jsonl" : ".tsv"));
    if (format == data::FileFormat::kJsonl) {
      data::write_jsonl(task.dataset, file);
    } else {
      data::write_tsv(task.dataset, file);
    }
    model::detail::write_file_atomic(fs::path(a.out) / (id + ".task.json"),
                                     task_spec_to_json(spec.task).dump(2) + "\n");
    json bayes = json::object();
    for (const auto& [split, n] : spec.split_sizes) {
      if (n > 0 && split != data::kUnlabeledSplit) bayes[split] = task.bayes.accuracy(task.dataset, split);
    }
    summary.push_back({{"task", id}, {"data", file.string()}, {"examples", task.dataset.examples.size()},
                       {"bayes_accuracy", bayes}});
  }
  std::cout << json{{"tasks", summary}}.dump(2) << '\n';
  return kOk;
}

// ---- run --------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool fresh = false;
  bool quiet = false;
};

int cmd_run(const RunArgs& a) {
  auto plan = harness::load_plan(a.config);
  if (a.seed) plan.seeds = {*a.seed};
  if (!a.out.empty()) plan.output_dir = a.out;
  harness::RunOptions opts;
  opts.resume = !a.fresh;
  opts.log = a.quiet ? nullptr : &std::cerr;
  const auto result = harness::run_experiment(plan, opts);
  std::cout << json{{"output_dir", plan.output_dir.string()},
                    {"rows", result.table.size()},
                    {"results", (plan.output_dir / "results.csv").string()}}
                   .dump(2)
            << '\n';
  return kOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string task;
  std::string split;
};

int cmd_eval(const EvalArgs& a) {
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto& spec = pick_task(ckpt.model, a.task);
  const auto dataset = load_data(a.data, spec, data::kTrainSplit);
  std::string split = a.split;
  if (split.empty()) {
    for (const auto& s : spec.eval_splits) {
      if (dataset.has_split(s)) {
        split = s;
        break;
      }
    }
    if (split.empty()) split = dataset.has_split(data::kDevSplit) ? data::kDevSplit : data::kTrainSplit;
  }
  if (!dataset.has_split(split)) throw DataError("dataset '" + a.data + "' has no split '" + split + "'");
  const auto m = harness::evaluate(ckpt.model, dataset, split);
  std::cout << json{{"task", spec.task_id},
                    {"split", split},
                    {"metric", to_string(spec.primary_metric)},
                    {"primary", m.primary(spec.primary_metric)},
                    {"accuracy", m.accuracy},
                    {"f1_binary", m.f1_binary},
                    {"f1_macro", m.f1_macro},
                    {"count", m.count},
                    {"support", m.support}}
                   .dump(2)
            << '\n';
  return kOk;
}

// ---- distill ----------------------------------------------------------------

struct DistillArgs {
  std::string checkpoint;
  std::string data;
  std::string task;
  std::string out;
};

int cmd_distill(const DistillArgs& a) {
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto& spec = pick_task(ckpt.model, a.task);
  const auto stream = load_data(a.data, spec, data::kUnlabeledSplit);
  const auto targets = strategies::distill_targets(ckpt.model, spec.task_id, stream, harness::thread_budget());
  strategies::write_soft_targets(targets, a.out);
  std::cout << json{{"task", spec.task_id}, {"rows", targets.size()}, {"out", a.out}}.dump(2) << '\n';
  return kOk;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
  std::string input;
  std::string out = ".";
  std::vector<std::string> formats;
};

int cmd_report(const ReportArgs& a) {
  if (!fs::exists(a.input)) throw DataError("results file '" + a.input + "' does not exist");
  const auto table = harness::load_results(a.input);
  const auto report = harness::forgetting_report(table);
  fs::create_directories(a.out);
  const std::vector<std::string> formats = a.formats.empty() ? std::vector<std::string>{"csv", "json", "svg"} : a.formats;
  json written = json::array();
  for (const auto& f : formats) {
    const auto format = harness::parse_output_format(f);
    fs::path path;
    switch (format) {
      case harness::OutputFormat::kCsv:
        path = fs::path(a.out) / "report.csv";
        harness::detail::write_text(path, harness::report_to_csv(report));
        break;
      case harness::OutputFormat::kJson:
        path = fs::path(a.out) / "report.json";
        harness::detail::write_text(path, harness::report_to_json(report).dump(2) + "\n");
        break;
      case harness::OutputFormat::kSvg:
        path = fs::path(a.out) / "chart.svg";
        harness::emit(table, format, path);
        break;
    }
    written.push_back(path.string());
  }
  std::cout << json{{"rows", report.size()}, {"written", written}}.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftguard: continual learning with unlabeled knowledge distillation"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate synthetic datasets from a generator spec or preset");
  g->add_option("--config", gen.config, "spec JSON: {\"preset\": name}, one spec, or an array")->required();
  g->add_option("--out", gen.out, "output directory");
  g->add_option("--seed", gen.seed, "override the generator seed");
  g->add_option("--format", gen.format, "jsonl or tsv");

  RunArgs run;
  auto* r = app.add_subcommand("run", "execute an experiment plan");
  r->add_option("--config", run.config, "plan JSON")->required();
  r->add_option("--out", run.out, "output directory (overrides the plan)");
  r->add_option("--seed", run.seed, "run only this seed");
  r->add_flag("--fresh", run.fresh, "ignore completed stages in the output directory");
  r->add_flag("--quiet", run.quiet, "no progress log");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint head on a dataset");
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--data", eval.data, "tsv or jsonl")->required();
  e->add_option("--task", eval.task, "head to evaluate (default: the only head)");
  e->add_option("--split", eval.split, "split to score (default: the task's first eval split present)");

  DistillArgs distill;
  auto* d = app.add_subcommand("distill", "write teacher soft targets for an unlabeled file");
  d->add_option("--checkpoint", distill.checkpoint)->required();
  d->add_option("--data", distill.data, "tsv or jsonl; rows without a split are unlabeled")->required();
  d->add_option("--task", distill.task, "teacher head (default: the only head)");
  d->add_option("--out", distill.out, "soft-target JSON file")->required();

  ReportArgs report;
  auto* p = app.add_subcommand("report", "forgetting and relative-to-MTL tables plus charts");
  p->add_option("--input", report.input, "results.csv or results.json")->required();
  p->add_option("--out", report.out, "output directory");
  p->add_option("--format", report.formats, "csv, json and/or svg (default: all)");

  if (argc > 1 && argv[1][0] != '-') {
    const std::string name = argv[1];
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == name;
    if (!known) {
      std::cerr << "error: unknown subcommand '" << name << "'\n" << app.help();
      return kUsage;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen);
    if (r->parsed()) return cmd_run(run);
    if (e->parsed()) return cmd_eval(eval);
    if (d->parsed()) return cmd_distill(distill);
    if (p->parsed()) return cmd_report(report);
  } catch (const ConfigError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kDataError;
  } catch (const DataError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kDataError;
  } catch (const FormatError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kDataError;
  } catch (const InvalidInput& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kDataError;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kRuntimeError;
  }
  return kUsage;
}
