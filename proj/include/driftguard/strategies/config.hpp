// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "driftguard/error.hpp"
#include "driftguard/json_util.hpp"

namespace driftguard::strategies {

enum class Strategy { kST, kMTL, kOL, kEM, kEWC, kTKD, kUKD };

inline constexpr Strategy kAllStrategies[] = {Strategy::kST,  Strategy::kMTL, Strategy::kOL, Strategy::kEM,
                                              Strategy::kEWC, Strategy::kTKD, Strategy::kUKD};

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kST: return "ST";
    case Strategy::kMTL: return "MTL";
    case Strategy::kOL: return "OL";
    case Strategy::kEM: return "EM";
    case Strategy::kEWC: return "EWC";
    case Strategy::kTKD: return "TKD";
    case Strategy::kUKD: return "UKD";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  for (Strategy k : kAllStrategies) {
    if (to_string(k) == s) return k;
  }
  throw InvalidInput("unknown strategy '" + std::string(s) + "' (expected ST, MTL, OL, EM, EWC, TKD or UKD)");
}

/// Continual strategies train a student cloned from the previous stage.
inline bool is_continual(Strategy s) { return s != Strategy::kST && s != Strategy::kMTL; }
inline bool uses_distillation(Strategy s) { return s == Strategy::kTKD || s == Strategy::kUKD; }

/// Hyperparameters for one training stage. Defaults are sized for the
/// desk-scale MLP rather than a large pre-trained encoder.
struct StageConfig {
  Strategy strategy = Strategy::kUKD;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  double temperature = 2.0;
  double ewc_lambda = 100.0;
  std::size_t fisher_samples = 500;
  bool kd_t2_scaling = false;
  /// Per-task loss weights (new task and each old task); missing means 1.
  std::map<std::string, double> loss_weights;
  /// Distill on the fly instead of materializing soft targets first.
  bool streaming = false;
  std::uint64_t seed = 17;

  double weight(const std::string& task_id) const {
    auto it = loss_weights.find(task_id);
    return it == loss_weights.end() ? 1.0 : it->second;
  }

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw InvalidInput("learning_rate must be finite and >= 0");
    }
    if (batch_size == 0) throw InvalidInput("batch_size must be >= 1");
    if (patience == 0) throw InvalidInput("patience must be >= 1");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidInput("temperature must be > 0");
    if (!(ewc_lambda >= 0.0) || !std::isfinite(ewc_lambda)) throw InvalidInput("ewc_lambda must be >= 0");
    if (fisher_samples == 0) throw InvalidInput("fisher_samples must be >= 1");
    for (const auto& [task, w] : loss_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("loss weight for '" + task + "' must be >= 0");
    }
  }
};

inline json stage_config_to_json(const StageConfig& c) {
  return json{{"strategy", to_string(c.strategy)},
              {"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"temperature", c.temperature},
              {"ewc_lambda", c.ewc_lambda},
              {"fisher_samples", c.fisher_samples},
              {"kd_t2_scaling", c.kd_t2_scaling},
              {"loss_weights", c.loss_weights},
              {"streaming", c.streaming},
              {"seed", c.seed}};
}

/// Reads fields present in `j` on top of `base`.
template <typename E = ConfigError>
StageConfig stage_config_from_json(const json& j, const std::string& location, StageConfig base = {}) {
  JsonReader<E> r(j, location);
  r.only({"strategy", "learning_rate", "batch_size", "max_epochs", "patience", "temperature", "ewc_lambda",
          "fisher_samples", "kd_t2_scaling", "loss_weights", "streaming", "seed"});
  StageConfig c = std::move(base);
  if (r.has("strategy")) {
    try {
      c.strategy = parse_strategy(r.template get<std::string>("strategy"));
    } catch (const InvalidInput& e) {
      r.fail(e.what());
    }
  }
  c.learning_rate = r.template get_or<double>("learning_rate", c.learning_rate);
  c.batch_size = r.template get_or<std::size_t>("batch_size", c.batch_size);
  c.max_epochs = r.template get_or<std::size_t>("max_epochs", c.max_epochs);
  c.patience = r.template get_or<std::size_t>("patience", c.patience);
  c.temperature = r.template get_or<double>("temperature", c.temperature);
  c.ewc_lambda = r.template get_or<double>("ewc_lambda", c.ewc_lambda);
  c.fisher_samples = r.template get_or<std::size_t>("fisher_samples", c.fisher_samples);
  c.kd_t2_scaling = r.template get_or<bool>("kd_t2_scaling", c.kd_t2_scaling);
  c.loss_weights = r.template get_or<std::map<std::string, double>>("loss_weights", c.loss_weights);
  c.streaming = r.template get_or<bool>("streaming", c.streaming);
  c.seed = r.template get_or<std::uint64_t>("seed", c.seed);
  try {
    c.validate();
  } catch (const InvalidInput& e) {
    r.fail(e.what());
  }
  return c;
}

/// Patience-based early stopping on a metric where larger is better. Only a
/// strict improvement resets the counter.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {
    if (patience == 0) throw InvalidInput("patience must be >= 1");
  }

  /// Records the metric after `epoch` (1-based). Returns true on a new best.
  bool observe(std::size_t epoch, double metric) {
    last_epoch_ = epoch;
    if (!best_epoch_ || metric > best_metric_) {
      best_metric_ = metric;
      best_epoch_ = epoch;
      return true;
    }
    return false;
  }

  bool should_stop() const { return best_epoch_ && last_epoch_ - *best_epoch_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_.value_or(0); }
  double best_metric() const { return best_metric_; }

 private:
  std::size_t patience_;
  std::optional<std::size_t> best_epoch_;
  double best_metric_ = -std::numeric_limits<double>::infinity();
  std::size_t last_epoch_ = 0;
};

}  // namespace driftguard::strategies
