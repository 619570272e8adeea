// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "driftguard/data/dataset.hpp"
#include "driftguard/error.hpp"
#include "driftguard/json_util.hpp"

namespace driftguard::data {

enum class FileFormat { kTsv, kJsonl };

inline FileFormat parse_format(std::string_view s) {
  if (s == "tsv") return FileFormat::kTsv;
  if (s == "jsonl") return FileFormat::kJsonl;
  throw InvalidInput("unknown dataset format '" + std::string(s) + "' (expected tsv or jsonl)");
}

/// Format from the file extension (.tsv or .jsonl).
inline FileFormat format_from_path(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".tsv") return FileFormat::kTsv;
  if (ext == ".jsonl") return FileFormat::kJsonl;
  throw InvalidInput("cannot infer dataset format from '" + p.string() + "'");
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, '\t')) cells.push_back(cell);
  if (!line.empty() && line.back() == '\t') cells.emplace_back();
  return cells;
}

inline std::size_t resolve_label(const model::TaskSpec& spec, const std::string& value,
                                 const std::string& where) {
  if (auto idx = spec.label_index(value)) return *idx;
  throw DataError(where + ": unknown label '" + value + "' for task '" + spec.task_id + "'");
}

inline void check_example(const model::TaskSpec& spec, const Example& e, const std::string& where) {
  if (e.text_a.empty()) throw DataError(where + ": empty text_a");
  if (spec.input_arity == model::InputArity::kTwoSegment && (!e.text_b || e.text_b->empty())) {
    throw DataError(where + ": missing text_b for two-segment task '" + spec.task_id + "'");
  }
}

}  // namespace detail

/// Reads a TSV (header row naming text_a[, text_b][, label][, split][, id])
/// or JSONL file. Rows without a label are kept as unlabeled examples.
/// `default_split` tags rows that carry no split of their own.
inline TaskDataset load_dataset(const std::filesystem::path& path, FileFormat format,
                                const model::TaskSpec& spec,
                                const std::string& default_split = kTrainSplit) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  TaskDataset d{spec, {}, path.string()};
  const std::string file = path.filename().string();
  std::string line;
  std::size_t line_no = 0;

  if (format == FileFormat::kTsv) {
    if (!std::getline(in, line)) throw DataError(file + ": missing header row");
    line_no = 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_tabs(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) {
      const auto& h = header[i];
      if (h != "text_a" && h != "text_b" && h != "label" && h != "split" && h != "id") {
        throw DataError(file + ":1: unknown column '" + h + "'");
      }
      col[h] = i;
    }
    if (!col.contains("text_a")) throw DataError(file + ":1: header lacks a text_a column");
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::string where = file + ":" + std::to_string(line_no);
      const auto cells = detail::split_tabs(line);
      auto cell = [&](const char* name) -> std::optional<std::string> {
        auto it = col.find(name);
        if (it == col.end() || it->second >= cells.size()) return std::nullopt;
        return cells[it->second];
      };
      if (cells.size() > header.size()) throw DataError(where + ": more cells than header columns");
      Example e;
      e.text_a = cell("text_a").value_or("");
      if (auto b = cell("text_b"); b && !b->empty()) e.text_b = *b;
      if (auto l = cell("label"); l && !l->empty()) e.label = detail::resolve_label(spec, *l, where);
      e.split = cell("split").value_or("");
      if (e.split.empty()) e.split = default_split;
      e.id = cell("id").value_or("");
      if (e.id.empty()) e.id = spec.task_id + ":" + file + ":" + std::to_string(line_no);
      detail::check_example(spec, e, where);
      d.examples.push_back(std::move(e));
    }
  } else {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::string where = file + ":" + std::to_string(line_no);
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error&) {
        throw DataError(where + ": invalid JSON");
      }
      JsonReader<DataError> r(j, where);
      r.only({"text_a", "text_b", "label", "split", "id"});
      Example e;
      e.text_a = r.get<std::string>("text_a");
      if (r.has("text_b") && !r.at("text_b").is_null()) e.text_b = r.get<std::string>("text_b");
      if (r.has("label") && !r.at("label").is_null()) {
        const json& l = r.at("label");
        if (l.is_string()) {
          e.label = detail::resolve_label(spec, l.get<std::string>(), where);
        } else if (l.is_number_unsigned() || (l.is_number_integer() && l.get<long long>() >= 0)) {
          e.label = l.get<std::size_t>();
          if (*e.label >= spec.class_count()) {
            throw DataError(where + ": label index " + std::to_string(*e.label) + " out of range");
          }
        } else {
          throw DataError(where + ": label must be a label name or index");
        }
      }
      e.split = r.get_or<std::string>("split", default_split);
      e.id = r.get_or<std::string>("id", spec.task_id + ":" + file + ":" + std::to_string(line_no));
      detail::check_example(spec, e, where);
      d.examples.push_back(std::move(e));
    }
  }
  try {
    d.validate();
  } catch (const DataError& e) {
    throw DataError(file + ": " + e.what());
  }
  return d;
}

inline TaskDataset load_dataset(const std::filesystem::path& path, const model::TaskSpec& spec,
                                const std::string& default_split = kTrainSplit) {
  return load_dataset(path, format_from_path(path), spec, default_split);
}

/// Writes every example (all splits) as JSONL with label names.
inline void write_jsonl(const TaskDataset& d, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& e : d.examples) {
    json j{{"id", e.id}, {"text_a", e.text_a}, {"split", e.split}};
    if (e.text_b) j["text_b"] = *e.text_b;
    if (e.label) j["label"] = d.spec.label_names.at(*e.label);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Writes every example as TSV with id and split columns.
inline void write_tsv(const TaskDataset& d, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "id\ttext_a\ttext_b\tlabel\tsplit\n";
  for (const auto& e : d.examples) {
    out << e.id << '\t' << e.text_a << '\t' << e.text_b.value_or("") << '\t'
        << (e.label ? d.spec.label_names.at(*e.label) : std::string()) << '\t' << e.split << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace driftguard::data
