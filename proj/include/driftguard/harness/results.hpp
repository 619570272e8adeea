// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Raw evaluation rows of an experiment and the tables derived from them.
// Metric values are stored as fractions; derived columns are in points
// (metric x 100).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "driftguard/error.hpp"
#include "driftguard/harness/metrics.hpp"
#include "driftguard/json_util.hpp"

namespace driftguard::harness {

struct ResultRow {
  std::size_t stage = 0;
  std::string task;
  std::string split;
  std::string strategy;
  std::uint64_t seed = 0;
  std::string metric;  // name of the task's primary metric
  double primary = 0.0;
  double accuracy = 0.0;
  double f1_binary = 0.0;
  double f1_macro = 0.0;
  std::size_t count = 0;
  std::vector<std::size_t> support;

  auto key() const { return std::tie(strategy, seed, stage, task, split); }
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

inline ResultRow make_row(std::size_t stage, const model::TaskSpec& spec, const std::string& split,
                          const std::string& strategy, std::uint64_t seed, const Metrics& m) {
  return ResultRow{stage,      spec.task_id, split,      strategy,   seed,    std::string(to_string(spec.primary_metric)),
                   m.primary(spec.primary_metric), m.accuracy, m.f1_binary, m.f1_macro, m.count, m.support};
}

struct ResultTable {
  std::vector<ResultRow> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }

  /// Canonical order: strategy, seed, stage, task, split.
  void sort() {
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) { return a.key() < b.key(); });
  }

  const ResultRow* find(const std::string& strategy, std::uint64_t seed, std::size_t stage, const std::string& task,
                        const std::string& split) const {
    for (const auto& r : rows) {
      if (r.strategy == strategy && r.seed == seed && r.stage == stage && r.task == task && r.split == split) {
        return &r;
      }
    }
    return nullptr;
  }

  friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

// ---- CSV --------------------------------------------------------------------

namespace detail {

/// Shortest text that parses back to the same double.
inline std::string exact(double v) {
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string fixed1(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return std::string(buf) == "-0.0" ? "0.0" : buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Splits CSV text into records of fields (RFC 4180 quoting).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::string& where) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw FormatError(where + ": unterminated quoted field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

inline double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw FormatError(where + ": not a number: '" + s + "'");
  return v;
}

inline std::uint64_t parse_uint(const std::string& s, const std::string& where) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError(where + ": not a non-negative integer: '" + s + "'");
  }
  return std::stoull(s);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace detail

inline constexpr const char* kResultCsvHeader =
    "stage,task,split,strategy,seed,metric,primary,accuracy,f1_binary,f1_macro,count,support";

inline std::string results_to_csv(const ResultTable& t) {
  std::string out = std::string(kResultCsvHeader) + "\n";
  for (const auto& r : t.rows) {
    std::string support;
    for (std::size_t i = 0; i < r.support.size(); ++i) support += (i ? ";" : "") + std::to_string(r.support[i]);
    out += std::to_string(r.stage) + "," + detail::csv_field(r.task) + "," + detail::csv_field(r.split) + "," +
           detail::csv_field(r.strategy) + "," + std::to_string(r.seed) + "," + r.metric + "," +
           detail::exact(r.primary) + "," + detail::exact(r.accuracy) + "," + detail::exact(r.f1_binary) + "," +
           detail::exact(r.f1_macro) + "," + std::to_string(r.count) + "," + support + "\n";
  }
  return out;
}

inline ResultTable results_from_csv(const std::string& text, const std::string& where = "results.csv") {
  const auto records = detail::parse_csv(text, where);
  if (records.empty()) throw FormatError(where + ": missing header");
  std::string header;
  for (std::size_t i = 0; i < records[0].size(); ++i) header += (i ? "," : "") + records[0][i];
  if (header != kResultCsvHeader) throw FormatError(where + ": unexpected header '" + header + "'");
  ResultTable t;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    const std::string loc = where + ":" + std::to_string(i + 1);
    if (f.size() != 12) throw FormatError(loc + ": expected 12 fields, got " + std::to_string(f.size()));
    ResultRow r;
    r.stage = detail::parse_uint(f[0], loc);
    r.task = f[1];
    r.split = f[2];
    r.strategy = f[3];
    r.seed = detail::parse_uint(f[4], loc);
    r.metric = f[5];
    r.primary = detail::parse_double(f[6], loc);
    r.accuracy = detail::parse_double(f[7], loc);
    r.f1_binary = detail::parse_double(f[8], loc);
    r.f1_macro = detail::parse_double(f[9], loc);
    r.count = detail::parse_uint(f[10], loc);
    std::stringstream ss(f[11]);
    for (std::string part; std::getline(ss, part, ';');) r.support.push_back(detail::parse_uint(part, loc));
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline json results_to_json(const ResultTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"stage", r.stage},
                    {"task", r.task},
                    {"split", r.split},
                    {"strategy", r.strategy},
                    {"seed", r.seed},
                    {"metric", r.metric},
                    {"primary", r.primary},
                    {"accuracy", r.accuracy},
                    {"f1_binary", r.f1_binary},
                    {"f1_macro", r.f1_macro},
                    {"count", r.count},
                    {"support", r.support}});
  }
  return json{{"schema_version", 1}, {"kind", "results"}, {"rows", rows}};
}

inline ResultTable results_from_json(const json& j, const std::string& where = "results.json") {
  JsonReader<FormatError> r(j, where);
  r.only({"schema_version", "kind", "rows"});
  if (r.get<int>("schema_version") != 1) throw FormatError(where + ": unsupported schema_version");
  if (r.get<std::string>("kind") != "results") throw FormatError(where + ": not a results document");
  const json& rows = r.at("rows");
  if (!rows.is_array()) throw FormatError(where + ": rows must be an array");
  ResultTable t;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    JsonReader<FormatError> e(rows[i], where + ".rows[" + std::to_string(i) + "]");
    t.rows.push_back({e.get<std::size_t>("stage"), e.get<std::string>("task"), e.get<std::string>("split"),
                      e.get<std::string>("strategy"), e.get<std::uint64_t>("seed"), e.get<std::string>("metric"),
                      e.get<double>("primary"), e.get<double>("accuracy"), e.get<double>("f1_binary"),
                      e.get<double>("f1_macro"), e.get<std::size_t>("count"),
                      e.get<std::vector<std::size_t>>("support")});
  }
  return t;
}

/// Reads a results file written by emit (CSV or JSON, by extension).
inline ResultTable load_results(const std::filesystem::path& path) {
  const std::string text = detail::read_text(path);
  if (path.extension() == ".json") {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw FormatError(path.string() + ": invalid JSON: " + e.what());
    }
    return results_from_json(j, path.string());
  }
  return results_from_csv(text, path.string());
}

// ---- derived report ---------------------------------------------------------

inline constexpr const char* kStBaseline = "ST";
inline constexpr const char* kMtlBaseline = "MTL";

struct ReportRow {
  std::size_t stage = 0;
  std::string task;
  std::string split;
  std::string strategy;
  std::uint64_t seed = 0;
  double points = 0.0;
  /// Points lost since the stage that introduced the task (0 at that stage).
  std::optional<double> drop_vs_intro;
  /// ST points minus this row's points.
  std::optional<double> drop_vs_st;
  /// This row's points minus MTL's at the same stage.
  std::optional<double> rel_mtl;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Derived columns for every raw row. Missing reference rows leave the
/// column empty rather than failing.
inline std::vector<ReportRow> forgetting_report(const ResultTable& table) {
  using Series = std::tuple<std::string, std::uint64_t, std::string, std::string>;  // strategy seed task split
  std::map<Series, const ResultRow*> intro;
  std::map<std::tuple<std::uint64_t, std::string, std::string>, const ResultRow*> st;
  std::map<std::tuple<std::uint64_t, std::size_t, std::string, std::string>, const ResultRow*> mtl;
  for (const auto& r : table.rows) {
    auto& first = intro[{r.strategy, r.seed, r.task, r.split}];
    if (first == nullptr || r.stage < first->stage) first = &r;
    if (r.strategy == kStBaseline) st[{r.seed, r.task, r.split}] = &r;
    if (r.strategy == kMtlBaseline) mtl[{r.seed, r.stage, r.task, r.split}] = &r;
  }
  std::vector<ReportRow> out;
  for (const auto& r : table.rows) {
    ReportRow d{r.stage, r.task, r.split, r.strategy, r.seed, 100.0 * r.primary, {}, {}, {}};
    d.drop_vs_intro = 100.0 * intro.at({r.strategy, r.seed, r.task, r.split})->primary - d.points;
    if (auto it = st.find({r.seed, r.task, r.split}); it != st.end()) {
      d.drop_vs_st = 100.0 * it->second->primary - d.points;
    }
    if (auto it = mtl.find({r.seed, r.stage, r.task, r.split}); it != mtl.end()) {
      d.rel_mtl = d.points - 100.0 * it->second->primary;
    }
    out.push_back(std::move(d));
  }
  return out;
}

inline constexpr const char* kReportCsvHeader = "stage,task,split,strategy,seed,points,drop_vs_intro,drop_vs_st,rel_mtl";

/// Points rounded to one decimal; absent columns are empty cells.
inline std::string report_to_csv(const std::vector<ReportRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? detail::fixed1(*v) : std::string(); };
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.stage) + "," + detail::csv_field(r.task) + "," + detail::csv_field(r.split) + "," +
           detail::csv_field(r.strategy) + "," + std::to_string(r.seed) + "," + detail::fixed1(r.points) + "," +
           opt(r.drop_vs_intro) + "," + opt(r.drop_vs_st) + "," + opt(r.rel_mtl) + "\n";
  }
  return out;
}

inline json report_to_json(const std::vector<ReportRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"stage", r.stage},
                   {"task", r.task},
                   {"split", r.split},
                   {"strategy", r.strategy},
                   {"seed", r.seed},
                   {"points", r.points},
                   {"drop_vs_intro", opt(r.drop_vs_intro)},
                   {"drop_vs_st", opt(r.drop_vs_st)},
                   {"rel_mtl", opt(r.rel_mtl)}});
  }
  return json{{"schema_version", 1}, {"kind", "report"}, {"rows", out}};
}

}  // namespace driftguard::harness
