// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "driftguard/data/dataset.hpp"
#include "driftguard/error.hpp"
#include "driftguard/harness/metrics.hpp"
#include "driftguard/model/multi_head_model.hpp"
#include "driftguard/nn/losses.hpp"

namespace driftguard::strategies {

/// Diagonal empirical Fisher of one task plus the parameters it was measured
/// at. Tensors follow MultiHeadModel::parameters() order at estimation time;
/// heads added later are simply not covered.
struct FisherDiagonal {
  std::string task_id;
  std::vector<nn::Matrix> values;
  std::vector<nn::Matrix> anchor;
  std::size_t sample_count = 0;
};

/// Mean over sampled inputs of the squared gradient of log p(predicted class),
/// computed without dropout. Samples are the first `sample_count` rows of a
/// seeded permutation. Labels are never read.
inline FisherDiagonal estimate_fisher(const model::MultiHeadModel& m, const std::string& task_id,
                                      const data::FeatureTable& inputs, std::size_t sample_count,
                                      std::uint64_t seed) {
  if (sample_count == 0) throw InvalidInput("estimate_fisher: sample_count must be >= 1");
  if (sample_count > inputs.size()) {
    throw InvalidInput("estimate_fisher: sample_count " + std::to_string(sample_count) + " exceeds the " +
                       std::to_string(inputs.size()) + " available inputs");
  }
  auto work = m.clone_as_student();
  const std::size_t head = work.head_index(task_id);

  FisherDiagonal f;
  f.task_id = task_id;
  f.sample_count = sample_count;
  for (const auto* p : m.parameters()) {
    f.anchor.push_back(*p);
    f.values.emplace_back(p->rows(), p->cols());
  }
  const auto order = nn::permutation(inputs.size(), seed);
  std::vector<double> dense(work.input_dim(), 0.0);
  auto grads = work.zero_gradients();
  for (std::size_t s = 0; s < sample_count; ++s) {
    const auto& row = inputs.rows[order[s]];
    row.scatter_into(dense);
    const auto logits = work.trace_forward(head, dense);
    for (auto idx : row.index) dense[idx] = 0.0;
    const auto lg = nn::label_loss_and_grad(logits, harness::argmax(logits));
    grads.zero();
    work.train_backward(head, lg.grad, grads, 1.0);
    for (std::size_t t = 0; t < grads.tensors.size(); ++t) {
      const double* g = grads.tensors[t].data();
      double* acc = f.values[t].data();
      for (std::size_t k = 0; k < grads.tensors[t].size(); ++k) acc[k] += g[k] * g[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(sample_count);
  for (auto& v : f.values) {
    for (std::size_t k = 0; k < v.size(); ++k) v.data()[k] *= inv;
  }
  return f;
}

/// Throws unless every tensor of `f` matches the leading tensors of `params`.
inline void require_congruent(const FisherDiagonal& f, std::span<const nn::Matrix* const> params) {
  if (f.values.size() != f.anchor.size() || f.values.size() > params.size()) {
    throw InvalidInput("fisher for '" + f.task_id + "' covers more tensors than the model has");
  }
  for (std::size_t t = 0; t < f.values.size(); ++t) {
    if (!f.values[t].same_shape(*params[t]) || !f.anchor[t].same_shape(*params[t])) {
      throw InvalidInput("fisher for '" + f.task_id + "' is not shape-congruent with tensor " +
                         std::to_string(t));
    }
  }
}

/// (lambda / 2) * sum_tasks sum_i F_i (theta_i - anchor_i)^2. When `grads`
/// is non-null the penalty gradient lambda * F * (theta - anchor) is added.
inline double ewc_penalty(std::span<const nn::Matrix* const> params, std::span<const FisherDiagonal> fishers,
                          double lambda, nn::GradientSet* grads = nullptr) {
  double total = 0.0;
  for (const auto& f : fishers) {
    require_congruent(f, params);
    for (std::size_t t = 0; t < f.values.size(); ++t) {
      const double* theta = params[t]->data();
      const double* star = f.anchor[t].data();
      const double* F = f.values[t].data();
      double* g = grads != nullptr ? grads->tensors[t].data() : nullptr;
      for (std::size_t k = 0; k < f.values[t].size(); ++k) {
        const double d = theta[k] - star[k];
        total += F[k] * d * d;
        if (g != nullptr) g[k] += lambda * F[k] * d;
      }
    }
  }
  return 0.5 * lambda * total;
}

}  // namespace driftguard::strategies
