// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "driftguard/error.hpp"
#include "driftguard/nn/layers.hpp"
#include "driftguard/nn/matrix.hpp"
#include "driftguard/nn/rng.hpp"

namespace driftguard::nn {

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Coordinates checked; every coordinate is checked when there are fewer.
  std::size_t sample_count = 200;
  std::uint64_t seed = 0;
  /// Denominator floor so that coordinates whose true gradient is ~0 are
  /// judged on absolute error.
  double magnitude_floor = 1e-6;
};

inline double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Compares `analytic` against central differences of `loss_fn` over a
/// random subsample of coordinates and returns the worst relative error.
/// `loss_fn` must evaluate the loss at the current contents of `params`;
/// every perturbed coordinate is restored before returning.
template <typename LossFn>
double grad_check(LossFn&& loss_fn, std::span<Matrix* const> params, const GradientSet& analytic,
                  const GradCheckOptions& opts = {}) {
  if (!(opts.epsilon > 0.0 && opts.epsilon <= 1e-2)) {
    throw InvalidInput("grad_check: epsilon must be in (0, 1e-2]");
  }
  if (analytic.tensors.size() != params.size()) {
    throw InvalidInput("grad_check: analytic gradient is not congruent with params");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!params[t]->same_shape(analytic.tensors[t])) {
      throw InvalidInput("grad_check: analytic gradient is not congruent with params");
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t k = 0; k < params[t]->size(); ++k) coords.emplace_back(t, k);
  }
  if (coords.size() > opts.sample_count) {
    Rng rng(opts.seed);
    rng.shuffle(coords);
    coords.resize(opts.sample_count);
  }
  double worst = 0.0;
  for (auto [t, k] : coords) {
    double& x = params[t]->data()[k];
    const double saved = x;
    x = saved + opts.epsilon;
    const double up = loss_fn();
    x = saved - opts.epsilon;
    const double down = loss_fn();
    x = saved;
    const double numeric = (up - down) / (2.0 * opts.epsilon);
    worst = std::max(worst, relative_error(analytic.tensors[t].data()[k], numeric,
                                           opts.magnitude_floor));
  }
  return worst;
}

}  // namespace driftguard::nn
