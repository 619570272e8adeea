// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "driftguard/error.hpp"
#include "driftguard/nn/layers.hpp"
#include "driftguard/nn/matrix.hpp"

namespace driftguard::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter list. Tensors flagged as frozen are
/// skipped entirely, including their moments.
struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  std::int64_t step = 0;
};

inline void adam_step(std::span<Matrix* const> params, const GradientSet& grads, double lr,
                      AdamState& state, const std::vector<bool>& frozen = {},
                      const AdamConfig& cfg = {}) {
  if (!(lr >= 0.0)) throw InvalidInput("adam: learning rate must be >= 0");
  if (grads.tensors.size() != params.size()) {
    throw InvalidInput("adam: " + std::to_string(grads.tensors.size()) + " gradients for " +
                       std::to_string(params.size()) + " parameters");
  }
  if (!frozen.empty() && frozen.size() != params.size()) {
    throw InvalidInput("adam: frozen mask size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads.tensors[i])) {
      throw InvalidInput("adam: gradient " + std::to_string(i) + " shape mismatch");
    }
  }
  if (state.first.empty()) {
    for (const Matrix* p : params) {
      state.first.emplace_back(p->rows(), p->cols());
      state.second.emplace_back(p->rows(), p->cols());
    }
  } else if (state.first.size() != params.size()) {
    throw InvalidInput("adam: optimizer state belongs to a different parameter list");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!frozen.empty() && frozen[i]) continue;
    double* p = params[i]->data();
    const double* g = grads.tensors[i].data();
    double* m = state.first[i].data();
    double* v = state.second[i].data();
    const std::size_t n = params[i]->size();
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace driftguard::nn
