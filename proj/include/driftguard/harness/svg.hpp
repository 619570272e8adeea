// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Per-stage line charts: one panel per task, x = stage, y = primary metric in
// points (seed mean), one polyline per strategy. ST is a star marker.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "driftguard/harness/results.hpp"

namespace driftguard::harness {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string star(double cx, double cy, double r) {
  std::string pts;
  for (int k = 0; k < 10; ++k) {
    const double radius = k % 2 == 0 ? r : r * 0.45;
    const double a = -M_PI / 2 + k * M_PI / 5;
    pts += (k ? " " : "") + num(cx + radius * std::cos(a)) + "," + num(cy + radius * std::sin(a));
  }
  return pts;
}

/// The split a task's panel shows: dev when present, else the first by name.
inline std::string chart_split(const std::set<std::string>& splits) {
  return splits.contains("dev") ? "dev" : *splits.begin();
}

}  // namespace detail

inline std::string results_to_svg(const ResultTable& table) {
  constexpr double kW = 520, kH = 260, kLeft = 56, kRight = 120, kTop = 34, kBottom = 36;
  static const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                         "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

  // Task panels in order of first appearance (stage, then name).
  std::map<std::string, std::size_t> intro;
  std::map<std::string, std::set<std::string>> splits;
  std::set<std::string> strategies;
  std::size_t max_stage = 1;
  for (const auto& r : table.rows) {
    auto it = intro.find(r.task);
    if (it == intro.end() || r.stage < it->second) intro[r.task] = r.stage;
    splits[r.task].insert(r.split);
    if (r.strategy != kStBaseline) strategies.insert(r.strategy);
    max_stage = std::max(max_stage, r.stage);
  }
  std::vector<std::string> tasks;
  for (const auto& [t, _] : intro) tasks.push_back(t);
  std::stable_sort(tasks.begin(), tasks.end(),
                   [&](const std::string& a, const std::string& b) { return intro[a] < intro[b]; });
  std::map<std::string, std::string> color;
  std::size_t ci = 0;
  for (const auto& s : strategies) color[s] = kPalette[ci++ % std::size(kPalette)];

  const double total_h = std::max<double>(1, tasks.size()) * kH;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(kW) + "\" height=\"" +
                    detail::num(total_h) + "\" viewBox=\"0 0 " + detail::num(kW) + " " + detail::num(total_h) +
                    "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const std::string& task = tasks[ti];
    const std::string split = detail::chart_split(splits[task]);
    // (strategy, stage) -> seed values, plus ST values by stage.
    std::map<std::string, std::map<std::size_t, std::vector<double>>> series;
    std::map<std::size_t, std::vector<double>> st;
    for (const auto& r : table.rows) {
      if (r.task != task || r.split != split) continue;
      if (r.strategy == kStBaseline) {
        st[r.stage].push_back(100.0 * r.primary);
      } else {
        series[r.strategy][r.stage].push_back(100.0 * r.primary);
      }
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    double lo = 100, hi = 0;
    for (const auto& [_, by_stage] : series) {
      for (const auto& [__, v] : by_stage) lo = std::min(lo, mean(v)), hi = std::max(hi, mean(v));
    }
    for (const auto& [_, v] : st) lo = std::min(lo, mean(v)), hi = std::max(hi, mean(v));
    if (lo > hi) lo = 0, hi = 100;
    lo = std::max(0.0, std::floor(lo / 5) * 5 - 5);
    hi = std::min(100.0, std::ceil(hi / 5) * 5 + 5);

    const double y0 = ti * kH;
    const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
    auto px = [&](std::size_t stage) {
      return kLeft + (max_stage == 1 ? pw / 2 : pw * static_cast<double>(stage - 1) / static_cast<double>(max_stage - 1));
    };
    auto py = [&](double v) { return y0 + kTop + ph * (1.0 - (v - lo) / (hi - lo)); };

    out += "<g class=\"task\" data-task=\"" + detail::xml_escape(task) + "\">\n";
    out += "<text x=\"" + detail::num(kLeft) + "\" y=\"" + detail::num(y0 + 20) + "\" font-size=\"13\">" +
           detail::xml_escape(task) + " (" + detail::xml_escape(split) + ")</text>\n";
    out += "<rect x=\"" + detail::num(kLeft) + "\" y=\"" + detail::num(y0 + kTop) + "\" width=\"" + detail::num(pw) +
           "\" height=\"" + detail::num(ph) + "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double v = lo + (hi - lo) * k / 4;
      out += "<text x=\"" + detail::num(kLeft - 6) + "\" y=\"" + detail::num(py(v) + 4) +
             "\" text-anchor=\"end\">" + detail::num(v) + "</text>\n";
    }
    for (std::size_t s = 1; s <= max_stage; ++s) {
      out += "<text x=\"" + detail::num(px(s)) + "\" y=\"" + detail::num(y0 + kTop + ph + 16) +
             "\" text-anchor=\"middle\">" + std::to_string(s) + "</text>\n";
    }
    double legend_y = y0 + kTop + 8;
    for (const auto& [strategy, by_stage] : series) {
      std::string pts;
      for (const auto& [stage, v] : by_stage) {
        pts += (pts.empty() ? "" : " ") + detail::num(px(stage)) + "," + detail::num(py(mean(v)));
      }
      out += "<polyline data-strategy=\"" + detail::xml_escape(strategy) + "\" fill=\"none\" stroke=\"" +
             color[strategy] + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
      for (const auto& [stage, v] : by_stage) {
        out += "<circle cx=\"" + detail::num(px(stage)) + "\" cy=\"" + detail::num(py(mean(v))) + "\" r=\"2.5\" fill=\"" +
               color[strategy] + "\"/>\n";
      }
      out += "<text x=\"" + detail::num(kLeft + pw + 12) + "\" y=\"" + detail::num(legend_y) + "\" fill=\"" +
             color[strategy] + "\">" + detail::xml_escape(strategy) + "</text>\n";
      legend_y += 14;
    }
    for (const auto& [stage, v] : st) {
      out += "<polygon class=\"st-marker\" fill=\"#000\" points=\"" + detail::star(px(stage), py(mean(v)), 6) +
             "\"/>\n";
    }
    if (!st.empty()) {
      out += "<text x=\"" + detail::num(kLeft + pw + 12) + "\" y=\"" + detail::num(legend_y) + "\">&#9733; ST</text>\n";
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace driftguard::harness
