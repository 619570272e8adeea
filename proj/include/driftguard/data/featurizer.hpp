// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "driftguard/error.hpp"
#include "driftguard/nn/rng.hpp"

namespace driftguard::data {

/// Hashed bag-of-n-grams configuration. No fitted vocabulary: the same config
/// featurizes any task's text without access to its corpus.
struct FeaturizerConfig {
  std::size_t dimension = 4096;
  std::vector<int> ngram_orders{1, 2};
  std::uint64_t salt_a = 0x61;
  std::uint64_t salt_b = 0x62;
  std::uint64_t seed = 0x5eed;

  void validate() const {
    if (dimension == 0 || !std::has_single_bit(dimension)) {
      throw InvalidInput("featurizer dimension must be a power of two, got " +
                         std::to_string(dimension));
    }
    if (ngram_orders.empty()) throw InvalidInput("featurizer needs at least one n-gram order");
    for (int n : ngram_orders) {
      if (n < 1) throw InvalidInput("n-gram orders must be >= 1");
    }
    if (salt_a == salt_b) throw InvalidInput("segment salts must differ");
  }

  friend bool operator==(const FeaturizerConfig&, const FeaturizerConfig&) = default;
};

/// Sparse view of a featurized example: sorted bucket indices and values.
struct SparseFeatures {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  void scatter_into(std::vector<double>& dense) const {
    std::fill(dense.begin(), dense.end(), 0.0);
    for (std::size_t k = 0; k < index.size(); ++k) dense[index[k]] = value[k];
  }
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace detail

class HashingFeaturizer {
 public:
  explicit HashingFeaturizer(FeaturizerConfig cfg = {}) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const FeaturizerConfig& config() const { return cfg_; }
  std::size_t dimension() const { return cfg_.dimension; }

  /// Bucket and sign for one n-gram under a segment salt. Tokens of an n-gram
  /// are joined with a single space before hashing.
  std::pair<std::uint32_t, double> bucket(std::string_view ngram, std::uint64_t salt) const {
    const std::uint64_t key = nn::Rng::mix(cfg_.seed ^ nn::Rng::mix(salt));
    const std::uint64_t h = nn::Rng::mix(detail::fnv1a(ngram) ^ key);
    const auto index = static_cast<std::uint32_t>(h & (cfg_.dimension - 1));
    const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
    return {index, sign};
  }

  /// Lowercased, whitespace-tokenized, sign-hashed n-gram counts, L2-normalized.
  /// text_b (when present) lands in the same space under its own salt.
  SparseFeatures featurize_sparse(std::string_view text_a,
                                  std::optional<std::string_view> text_b = std::nullopt) const {
    const auto tokens_a = detail::tokenize(text_a);
    if (tokens_a.empty()) throw InvalidInput("featurize: text_a is empty");
    std::vector<std::pair<std::uint32_t, double>> hits;
    accumulate(tokens_a, cfg_.salt_a, hits);
    if (text_b) accumulate(detail::tokenize(*text_b), cfg_.salt_b, hits);

    std::sort(hits.begin(), hits.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    SparseFeatures out;
    for (const auto& [idx, v] : hits) {
      if (!out.index.empty() && out.index.back() == idx) {
        out.value.back() += v;
      } else {
        out.index.push_back(idx);
        out.value.push_back(v);
      }
    }
    // Drop buckets that cancelled out.
    std::size_t kept = 0;
    for (std::size_t k = 0; k < out.index.size(); ++k) {
      if (out.value[k] != 0.0) {
        out.index[kept] = out.index[k];
        out.value[kept] = out.value[k];
        ++kept;
      }
    }
    out.index.resize(kept);
    out.value.resize(kept);

    double norm = 0.0;
    for (double v : out.value) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (double& v : out.value) v /= norm;
    }
    return out;
  }

  std::vector<double> featurize(std::string_view text_a,
                                std::optional<std::string_view> text_b = std::nullopt) const {
    std::vector<double> dense(cfg_.dimension, 0.0);
    featurize_sparse(text_a, text_b).scatter_into(dense);
    return dense;
  }

 private:
  void accumulate(const std::vector<std::string>& tokens, std::uint64_t salt,
                  std::vector<std::pair<std::uint32_t, double>>& hits) const {
    for (int order : cfg_.ngram_orders) {
      const auto n = static_cast<std::size_t>(order);
      if (tokens.size() < n) continue;
      for (std::size_t start = 0; start + n <= tokens.size(); ++start) {
        std::string gram = tokens[start];
        for (std::size_t k = 1; k < n; ++k) {
          gram.push_back(' ');
          gram += tokens[start + k];
        }
        hits.push_back(bucket(gram, salt));
      }
    }
  }

  FeaturizerConfig cfg_;
};

}  // namespace driftguard::data
