// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "driftguard/data/dataset.hpp"
#include "driftguard/error.hpp"
#include "driftguard/json_util.hpp"
#include "driftguard/nn/rng.hpp"

namespace driftguard::data {

/// Class-independent filler tokens mixed into one split ("genre" shift).
struct GenreNoise {
  std::size_t token_start = 0;
  std::size_t token_count = 0;
  double mass = 0.0;  // probability that a token is drawn from the genre range

  friend bool operator==(const GenreNoise&, const GenreNoise&) = default;
};

/// Generative description of a bag-of-words classification task. Tokens are
/// integers in [vocab_start, vocab_start + vocab_size), rendered as "w<id>".
struct SyntheticTaskSpec {
  model::TaskSpec task;
  std::size_t vocab_start = 0;
  std::size_t vocab_size = 0;
  /// Per class, a distribution over the vocabulary block (segment a).
  std::vector<std::vector<double>> unigrams_a;
  /// Per class, segment b; required for two-segment tasks.
  std::vector<std::vector<double>> unigrams_b;
  std::size_t min_length = 5;
  std::size_t max_length = 12;
  std::vector<double> prior;
  std::uint64_t seed = 0;
  /// Examples to draw per split. The "unlabeled" split is emitted without labels.
  std::map<std::string, std::size_t> split_sizes;
  std::map<std::string, GenreNoise> genres;

  std::size_t class_count() const { return task.class_count(); }

  void validate() const {
    task.validate();
    if (vocab_size == 0) throw InvalidInput(task.task_id + ": empty vocabulary block");
    if (min_length == 0 || min_length > max_length) {
      throw InvalidInput(task.task_id + ": sentence length range is invalid");
    }
    auto check_dists = [&](const std::vector<std::vector<double>>& d, const char* which) {
      if (d.size() != class_count()) {
        throw InvalidInput(task.task_id + ": " + which + " needs one distribution per class");
      }
      for (const auto& row : d) {
        if (row.size() != vocab_size) {
          throw InvalidInput(task.task_id + ": " + which + " rows must span the vocabulary block");
        }
        double total = 0.0;
        for (double p : row) {
          if (!(p >= 0.0)) throw InvalidInput(task.task_id + ": negative unigram probability");
          total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) {
          throw InvalidInput(task.task_id + ": " + which + " distribution sums to " + std::to_string(total));
        }
      }
    };
    check_dists(unigrams_a, "unigrams_a");
    if (task.input_arity == model::InputArity::kTwoSegment) check_dists(unigrams_b, "unigrams_b");
    if (prior.size() != class_count()) throw InvalidInput(task.task_id + ": prior needs one entry per class");
    const double total = std::accumulate(prior.begin(), prior.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw InvalidInput(task.task_id + ": prior must sum to 1");
    for (double p : prior) {
      if (!(p >= 0.0)) throw InvalidInput(task.task_id + ": negative prior");
    }
    for (const auto& [split, g] : genres) {
      if (g.token_start < vocab_start || g.token_start + g.token_count > vocab_start + vocab_size ||
          g.token_count == 0 || !(g.mass >= 0.0 && g.mass < 1.0)) {
        throw InvalidInput(task.task_id + ": genre for split '" + split + "' is invalid");
      }
    }
  }

  std::size_t vocab_end() const { return vocab_start + vocab_size; }
};

inline std::string token_text(std::size_t id) { return "w" + std::to_string(id); }

/// Closed-form Bayes-optimal classifier for a SyntheticTaskSpec: argmax of
/// log prior plus per-token log likelihood. Tokens impossible under every
/// class (genre filler, which is class independent) do not affect the argmax.
class BayesRule {
 public:
  BayesRule() = default;
  explicit BayesRule(const SyntheticTaskSpec& spec)
      : start_(spec.vocab_start), size_(spec.vocab_size) {
    auto logs = [](const std::vector<std::vector<double>>& d) {
      std::vector<std::vector<double>> out = d;
      for (auto& row : out) {
        for (double& p : row) p = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
      }
      return out;
    };
    log_a_ = logs(spec.unigrams_a);
    log_b_ = logs(spec.unigrams_b);
    for (double p : spec.prior) {
      log_prior_.push_back(p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
    }
  }

  std::size_t classify(const Example& e) const {
    std::vector<double> score = log_prior_;
    add(e.text_a, log_a_, score);
    if (e.text_b && !log_b_.empty()) add(*e.text_b, log_b_, score);
    std::size_t best = 0;
    for (std::size_t c = 1; c < score.size(); ++c) {
      if (score[c] > score[best]) best = c;
    }
    return best;
  }

  /// Fraction of labeled examples in `split` the rule gets right.
  double accuracy(const TaskDataset& d, const std::string& split) const {
    std::size_t correct = 0;
    std::size_t total = 0;
    for (const Example* e : d.split(split)) {
      if (!e->label) continue;
      ++total;
      if (classify(*e) == *e->label) ++correct;
    }
    if (total == 0) throw InvalidInput("bayes accuracy: split '" + split + "' has no labeled examples");
    return static_cast<double>(correct) / static_cast<double>(total);
  }

 private:
  void add(const std::string& text, const std::vector<std::vector<double>>& logs,
           std::vector<double>& score) const {
    for (const auto& tok : detail::tokenize(text)) {
      if (tok.size() < 2 || tok[0] != 'w') continue;
      std::size_t id = 0;
      try {
        id = std::stoul(tok.substr(1));
      } catch (const std::exception&) {
        continue;
      }
      if (id < start_ || id >= start_ + size_) continue;
      const std::size_t k = id - start_;
      bool possible = false;
      for (const auto& row : logs) possible = possible || std::isfinite(row[k]);
      if (!possible) continue;
      for (std::size_t c = 0; c < score.size(); ++c) score[c] += logs[c][k];
    }
  }

  std::size_t start_ = 0;
  std::size_t size_ = 0;
  std::vector<std::vector<double>> log_a_;
  std::vector<std::vector<double>> log_b_;
  std::vector<double> log_prior_;
};

struct SyntheticTask {
  TaskDataset dataset;
  BayesRule bayes;
};

namespace detail {

/// Inverse-CDF sampler. upper_bound never lands on a zero-mass entry.
class CdfSampler {
 public:
  explicit CdfSampler(const std::vector<double>& p) : cdf_(p.size()) {
    std::partial_sum(p.begin(), p.end(), cdf_.begin());
  }
  std::size_t draw(nn::Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t k = static_cast<std::size_t>(it - cdf_.begin());
    if (k >= cdf_.size()) k = cdf_.size() - 1;
    return k;
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace detail

/// Draws every split of the spec. Class ~ prior, length ~ U[min, max], tokens
/// from the class-conditional unigram (or the split's genre range).
/// Splits are generated in name order from independent child seeds.
inline SyntheticTask gen_synthetic(const SyntheticTaskSpec& spec) {
  spec.validate();
  std::vector<detail::CdfSampler> sample_a;
  std::vector<detail::CdfSampler> sample_b;
  for (const auto& row : spec.unigrams_a) sample_a.emplace_back(row);
  for (const auto& row : spec.unigrams_b) sample_b.emplace_back(row);
  const detail::CdfSampler prior(spec.prior);
  const bool two = spec.task.input_arity == model::InputArity::kTwoSegment;

  SyntheticTask out;
  out.dataset.spec = spec.task;
  out.dataset.provenance = "synthetic:" + spec.task.task_id + ":seed=" + std::to_string(spec.seed);
  out.bayes = BayesRule(spec);

  std::uint64_t split_salt = 0;
  for (const auto& [split, count] : spec.split_sizes) {
    ++split_salt;
    nn::Rng rng(nn::Rng::mix(spec.seed) ^ nn::Rng::mix(split_salt * 0x9e37ULL + split.size()));
    const GenreNoise* genre = nullptr;
    if (auto it = spec.genres.find(split); it != spec.genres.end()) genre = &it->second;

    auto sentence = [&](const detail::CdfSampler& s) {
      const std::size_t len =
          spec.min_length + rng.below(spec.max_length - spec.min_length + 1);
      std::string text;
      for (std::size_t t = 0; t < len; ++t) {
        std::size_t id;
        if (genre != nullptr && rng.bernoulli(genre->mass)) {
          id = genre->token_start + rng.below(genre->token_count);
        } else {
          id = spec.vocab_start + s.draw(rng);
        }
        if (!text.empty()) text.push_back(' ');
        text += token_text(id);
      }
      return text;
    };

    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t label = prior.draw(rng);
      Example e;
      e.id = spec.task.task_id + "/" + split + "/" + std::to_string(i);
      e.split = split;
      e.text_a = sentence(sample_a[label]);
      if (two) e.text_b = sentence(sample_b[label]);
      if (split != kUnlabeledSplit) e.label = label;
      out.dataset.examples.push_back(std::move(e));
    }
  }
  out.dataset.validate();
  return out;
}

/// Parameters for building keyword-style class-conditional unigrams.
struct KeywordRecipe {
  std::size_t keywords_per_class = 10;
  /// Unnormalized weight of a class's own keywords relative to a shared word (1.0).
  double keyword_boost = 4.0;
  /// Shared (class-independent) words in the block.
  std::size_t shared_words = 40;
};

/// Vocabulary layout: [shared words][class 0 keywords][class 1 keywords]...
/// Every class gives weight 1 to shared words and other classes' keywords and
/// weight `keyword_boost` to its own keywords.
inline std::vector<std::vector<double>> keyword_unigrams(std::size_t classes, std::size_t vocab_size,
                                                         std::size_t offset, const KeywordRecipe& r) {
  const std::size_t needed = offset + r.shared_words + classes * r.keywords_per_class;
  if (needed > vocab_size) throw InvalidInput("keyword recipe does not fit in the vocabulary block");
  std::vector<std::vector<double>> out(classes, std::vector<double>(vocab_size, 0.0));
  for (std::size_t c = 0; c < classes; ++c) {
    auto& row = out[c];
    for (std::size_t w = 0; w < r.shared_words + classes * r.keywords_per_class; ++w) {
      row[offset + w] = 1.0;
    }
    for (std::size_t k = 0; k < r.keywords_per_class; ++k) {
      row[offset + r.shared_words + c * r.keywords_per_class + k] = r.keyword_boost;
    }
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    for (double& p : row) p /= total;
  }
  return out;
}

/// prior_k proportional to 1 / (k + 1)^skew; skew 0 is uniform.
inline std::vector<double> zipf_prior(std::size_t classes, double skew) {
  std::vector<double> p(classes);
  for (std::size_t k = 0; k < classes; ++k) p[k] = 1.0 / std::pow(static_cast<double>(k + 1), skew);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
  return p;
}

// ---- JSON mirror of SyntheticTaskSpec -------------------------------------

inline json synthetic_spec_to_json(const SyntheticTaskSpec& s) {
  json genres = json::object();
  for (const auto& [split, g] : s.genres) {
    genres[split] = json{{"token_start", g.token_start}, {"token_count", g.token_count}, {"mass", g.mass}};
  }
  json j{{"task", task_spec_to_json(s.task)},
         {"vocab_start", s.vocab_start},
         {"vocab_size", s.vocab_size},
         {"unigrams_a", s.unigrams_a},
         {"min_length", s.min_length},
         {"max_length", s.max_length},
         {"prior", s.prior},
         {"seed", s.seed},
         {"split_sizes", s.split_sizes},
         {"genres", genres}};
  if (!s.unigrams_b.empty()) j["unigrams_b"] = s.unigrams_b;
  return j;
}

template <typename E = ConfigError>
SyntheticTaskSpec synthetic_spec_from_json(const json& j, const std::string& location) {
  JsonReader<E> r(j, location);
  r.only({"task", "vocab_start", "vocab_size", "unigrams_a", "unigrams_b", "min_length", "max_length",
          "prior", "seed", "split_sizes", "genres"});
  SyntheticTaskSpec s;
  s.task = task_spec_from_json<E>(r.at("task"), r.path("task"));
  s.vocab_start = r.template get<std::size_t>("vocab_start");
  s.vocab_size = r.template get<std::size_t>("vocab_size");
  s.unigrams_a = r.template get<std::vector<std::vector<double>>>("unigrams_a");
  s.unigrams_b = r.template get_or<std::vector<std::vector<double>>>("unigrams_b", {});
  s.min_length = r.template get_or<std::size_t>("min_length", s.min_length);
  s.max_length = r.template get_or<std::size_t>("max_length", s.max_length);
  s.prior = r.template get<std::vector<double>>("prior");
  s.seed = r.template get_or<std::uint64_t>("seed", 0);
  s.split_sizes = r.template get<std::map<std::string, std::size_t>>("split_sizes");
  if (r.has("genres")) {
    JsonReader<E> g(r.at("genres"), r.path("genres"));
    for (const auto& [split, value] : r.at("genres").items()) {
      JsonReader<E> one(value, g.path(split));
      one.only({"token_start", "token_count", "mass"});
      s.genres[split] = GenreNoise{one.template get<std::size_t>("token_start"),
                                   one.template get<std::size_t>("token_count"),
                                   one.template get<double>("mass")};
    }
  }
  try {
    s.validate();
  } catch (const InvalidInput& e) {
    r.fail(e.what());
  }
  return s;
}

/// True when no two specs share a vocabulary token.
inline bool vocab_blocks_disjoint(const std::vector<SyntheticTaskSpec>& specs) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (std::size_t k = i + 1; k < specs.size(); ++k) {
      const auto& a = specs[i];
      const auto& b = specs[k];
      if (a.vocab_start < b.vocab_end() && b.vocab_start < a.vocab_end()) return false;
    }
  }
  return true;
}

}  // namespace driftguard::data
