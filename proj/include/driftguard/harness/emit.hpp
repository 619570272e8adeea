// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "driftguard/error.hpp"
#include "driftguard/harness/results.hpp"
#include "driftguard/harness/svg.hpp"

namespace driftguard::harness {

enum class OutputFormat { kCsv, kJson, kSvg };

inline OutputFormat parse_output_format(std::string_view s) {
  if (s == "csv") return OutputFormat::kCsv;
  if (s == "json") return OutputFormat::kJson;
  if (s == "svg") return OutputFormat::kSvg;
  throw InvalidInput("unknown format '" + std::string(s) + "' (expected csv, json or svg)");
}

inline std::string_view extension(OutputFormat f) {
  switch (f) {
    case OutputFormat::kCsv: return ".csv";
    case OutputFormat::kJson: return ".json";
    case OutputFormat::kSvg: return ".svg";
  }
  return "";
}

/// Writes the table in one format. CSV and JSON round-trip through
/// load_results; the SVG is a chart only.
inline void emit(const ResultTable& table, OutputFormat format, const std::filesystem::path& path) {
  std::string text;
  switch (format) {
    case OutputFormat::kCsv: text = results_to_csv(table); break;
    case OutputFormat::kJson: text = results_to_json(table).dump(1) + "\n"; break;
    case OutputFormat::kSvg: text = results_to_svg(table); break;
  }
  try {
    detail::write_text(path, text);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError("cannot write '" + path.string() + "': " + e.what());
  }
}

}  // namespace driftguard::harness
