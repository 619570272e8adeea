// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include "driftguard/harness/results.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using driftguard::json;
using driftguard::testing::TempDir;

namespace {

struct Outcome {
  int code = -1;
  std::string output;  // stdout and stderr together
};

Outcome cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + DRIFTGUARD_CLI + "' " + args + " 2>&1";
  Outcome o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) o.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

const fs::path kTiny = fs::path(DRIFTGUARD_SOURCE_DIR) / "assets" / "tiny";

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("cli_usage_errors", "[cli]") {
  CHECK(cli("").code == 1);
  const auto unknown = cli("frobnicate");
  CHECK(unknown.code == 1);
  CHECK(unknown.output.find("frobnicate") != std::string::npos);
  CHECK(cli("eval --checkpoint").code == 1);
  CHECK(cli("--help").code == 0);
}

TEST_CASE("cli_run_missing_config", "[cli]") {
  const auto o = cli("run --config missing.json");
  CHECK(o.code == 2);
  CHECK(o.output.find("missing.json") != std::string::npos);
}

TEST_CASE("cli_eval_tiny", "[cli]") {
  const auto o = cli("eval --checkpoint " + q(kTiny / "tiny.ckpt") + " --data " + q(kTiny / "tiny.jsonl"));
  REQUIRE(o.code == 0);
  const json m = json::parse(o.output);
  CHECK(m.at("task") == "tiny");
  CHECK(m.at("split") == "test");
  CHECK(m.at("count") == 50);
  CHECK(m.at("accuracy").get<double>() >= 0.0);
  CHECK(m.at("accuracy").get<double>() <= 1.0);

  CHECK(cli("eval --checkpoint nope.ckpt --data " + q(kTiny / "tiny.jsonl")).code == 2);
  CHECK(cli("eval --checkpoint " + q(kTiny / "tiny.ckpt") + " --data " + q(kTiny / "tiny.jsonl") + " --task zz")
            .code == 2);
  CHECK(cli("eval --checkpoint " + q(kTiny / "tiny.jsonl") + " --data " + q(kTiny / "tiny.jsonl")).code == 2);
}

TEST_CASE("cli_run_is_byte_identical", "[cli]") {
  TempDir dir("cli-run");
  const std::string plan = q(kTiny / "tiny.plan.json");
  const auto a = cli("run --quiet --fresh --config " + plan + " --out " + q(dir.path() / "a"));
  REQUIRE(a.code == 0);
  const auto b = cli("run --quiet --fresh --config " + plan + " --out " + q(dir.path() / "b"),
                     "DRIFTGUARD_THREADS=2");
  REQUIRE(b.code == 0);
  const auto read = [](const fs::path& p) { return driftguard::harness::detail::read_text(p); };
  for (const char* f : {"results.csv", "results.json", "report.csv", "chart.svg"}) {
    INFO(f);
    CHECK(read(dir.path() / "a" / f) == read(dir.path() / "b" / f));
  }
  // The shipped checkpoint is this plan's only stage.
  CHECK(read(dir.path() / "a" / "runs" / "ST-seed17" / "stage-1.ckpt") == read(kTiny / "tiny.ckpt"));

  const auto rep = cli("report --input " + q(dir.path() / "a" / "results.csv") + " --out " + q(dir.path() / "r") +
                       " --format csv --format svg");
  CHECK(rep.code == 0);
  CHECK(fs::exists(dir.path() / "r" / "report.csv"));
  CHECK(fs::exists(dir.path() / "r" / "chart.svg"));
  CHECK_FALSE(fs::exists(dir.path() / "r" / "report.json"));
  CHECK(cli("report --input " + q(dir.path() / "a" / "results.csv") + " --format pdf").code == 2);
}

TEST_CASE("cli_threads_env", "[cli]") {
  TempDir dir("cli-threads");
  const std::string args = "distill --checkpoint " + q(kTiny / "tiny.ckpt") + " --data " + q(kTiny / "tiny.jsonl") +
                           " --out " + q(dir.path() / "soft.json");
  const auto bad = cli(args, "DRIFTGUARD_THREADS=0");
  CHECK(bad.code == 2);
  CHECK(bad.output.find("DRIFTGUARD_THREADS") != std::string::npos);
  REQUIRE(cli(args, "DRIFTGUARD_THREADS=1").code == 0);
  const auto one = driftguard::harness::detail::read_text(dir.path() / "soft.json");
  REQUIRE(cli(args, "DRIFTGUARD_THREADS=4").code == 0);
  CHECK(driftguard::harness::detail::read_text(dir.path() / "soft.json") == one);
  CHECK(json::parse(one).at("rows").size() == 350);
}

TEST_CASE("cli_gen", "[cli]") {
  TempDir dir("cli-gen");
  const auto o = cli("gen --config " + q(kTiny / "tiny.spec.json") + " --out " + q(dir.path()) + " --format tsv");
  REQUIRE(o.code == 0);
  const json summary = json::parse(o.output);
  CHECK(summary.at("tasks")[0].at("bayes_accuracy").at("test").get<double>() > 0.9);
  CHECK(fs::exists(dir.path() / "tiny.tsv"));
  CHECK(fs::exists(dir.path() / "tiny.task.json"));

  // The shipped dataset is what gen produces from the shipped spec.
  REQUIRE(cli("gen --config " + q(kTiny / "tiny.spec.json") + " --out " + q(dir.path())).code == 0);
  CHECK(driftguard::harness::detail::read_text(dir.path() / "tiny.jsonl") ==
        driftguard::harness::detail::read_text(kTiny / "tiny.jsonl"));

  CHECK(cli("gen --config " + q(kTiny / "tiny.spec.json") + " --out " + q(dir.path()) + " --format xml").code == 2);
  TempDir bad("cli-gen-bad");
  driftguard::harness::detail::write_text(bad.path() / "p.json", R"({"preset": "nope"})");
  CHECK(cli("gen --config " + q(bad.path() / "p.json") + " --out " + q(bad.path())).code == 2);
}
