// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

// Small fixtures shared by the unit suites.

#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "driftguard/model/multi_head_model.hpp"
#include "driftguard/nn/adam.hpp"
#include "driftguard/nn/losses.hpp"

namespace driftguard::testing {

inline model::TaskSpec binary_task(const std::string& id) {
  model::TaskSpec spec;
  spec.task_id = id;
  spec.label_names = {"neg", "pos"};
  return spec;
}

inline model::TaskSpec nway_task(const std::string& id, std::size_t classes) {
  model::TaskSpec spec;
  spec.task_id = id;
  for (std::size_t c = 0; c < classes; ++c) spec.label_names.push_back("c" + std::to_string(c));
  return spec;
}

inline data::FeaturizerConfig small_featurizer(std::size_t dim = 64) {
  data::FeaturizerConfig f;
  f.dimension = dim;
  return f;
}

inline std::vector<double> random_features(nn::Rng& rng, std::size_t dim) {
  std::vector<double> x(dim);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

/// Plain SGD-free loop: `steps` single-example Adam updates on random inputs
/// with random labels for head `task`. Honors the model's freeze mask.
inline void train_random_steps(model::MultiHeadModel& m, const std::string& task, int steps,
                               std::uint64_t seed, double lr = 1e-2) {
  nn::Rng rng(seed);
  nn::AdamState state;
  const std::size_t head = m.head_index(task);
  for (int s = 0; s < steps; ++s) {
    const auto x = random_features(rng, m.input_dim());
    const auto label = rng.below(m.tasks()[head].class_count());
    const auto logits = m.train_forward(head, x, rng);
    const auto lg = nn::label_loss_and_grad(logits, label);
    auto grads = m.zero_gradients();
    m.train_backward(head, lg.grad, grads, 1.0);
    auto params = m.parameters();
    nn::adam_step(params, grads, lr, state, m.frozen_tensor_mask());
  }
}

inline std::vector<nn::Matrix> snapshot(const model::MultiHeadModel& m) {
  std::vector<nn::Matrix> out;
  for (const auto* p : m.parameters()) out.push_back(*p);
  return out;
}

/// Temporary directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("driftguard_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace driftguard::testing
