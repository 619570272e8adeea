// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftguard/data/featurizer.hpp"
#include "driftguard/error.hpp"
#include "driftguard/model/task_spec.hpp"
#include "driftguard/nn/layers.hpp"
#include "driftguard/nn/rng.hpp"

namespace driftguard::model {

/// What set_freeze leaves untrainable. Freezing works on whole groups: the
/// encoder is one group and every head is its own group.
struct FreezeScope {
  enum class Kind { kNone, kEncoder, kHeadsExcept, kAllExcept };
  Kind kind = Kind::kNone;
  std::string task_id;  // for kHeadsExcept / kAllExcept

  static FreezeScope none() { return {}; }
  static FreezeScope encoder() { return {Kind::kEncoder, {}}; }
  static FreezeScope heads_except(std::string task) { return {Kind::kHeadsExcept, std::move(task)}; }
  /// Encoder plus every head but `task`; the output-layer-only regime.
  static FreezeScope all_except(std::string task) { return {Kind::kAllExcept, std::move(task)}; }
};

/// Shared encoder plus one affine head per task, in task-arrival order.
class MultiHeadModel {
 public:
  MultiHeadModel() = default;

  /// Glorot-initialized encoder over `encoder_dims` (first entry must equal
  /// the featurizer dimension) with zero heads.
  static MultiHeadModel create(const data::FeaturizerConfig& featurizer,
                               std::span<const std::size_t> encoder_dims, std::uint64_t seed,
                               double dropout = 0.1) {
    featurizer.validate();
    if (encoder_dims.size() < 2) {
      throw InvalidInput("encoder needs an input dim and at least one hidden dim");
    }
    for (std::size_t d : encoder_dims) {
      if (d == 0) throw InvalidInput("encoder dims must be positive");
    }
    if (encoder_dims.front() != featurizer.dimension) {
      throw InvalidInput("first encoder dim " + std::to_string(encoder_dims.front()) +
                         " must equal featurizer dimension " +
                         std::to_string(featurizer.dimension));
    }
    MultiHeadModel m;
    m.featurizer_ = featurizer;
    nn::Rng rng(seed);
    m.encoder_ = nn::LayerStack::glorot(encoder_dims, nn::Activation::kRelu, dropout, rng);
    return m;
  }

  /// Assembles a model from explicit parameters (checkpoint loading, tests).
  static MultiHeadModel from_parts(data::FeaturizerConfig featurizer, nn::LayerStack encoder,
                                   std::vector<TaskSpec> specs, std::vector<nn::LayerStack> heads) {
    if (specs.size() != heads.size()) throw InvalidInput("one head per task spec required");
    MultiHeadModel m;
    m.featurizer_ = std::move(featurizer);
    m.encoder_ = std::move(encoder);
    for (std::size_t i = 0; i < specs.size(); ++i) m.attach(std::move(specs[i]), std::move(heads[i]));
    return m;
  }

  /// Appends a Glorot-initialized head. Existing parameters are untouched.
  void add_head(TaskSpec spec, std::uint64_t seed) {
    spec.validate();
    nn::Rng rng(seed);
    const std::vector<std::size_t> dims{encoder_.output_dim(), spec.class_count()};
    auto head = nn::LayerStack::glorot(dims, nn::Activation::kIdentity, 0.0, rng);
    attach(std::move(spec), std::move(head));
  }

  /// Deep copy. The returned student shares no storage with this model.
  MultiHeadModel clone_as_student() const {
    MultiHeadModel student = *this;
    student.encoder_.clear_cache();
    for (auto& h : student.heads_) h.clear_cache();
    student.set_freeze(FreezeScope::none());
    return student;
  }

  const data::FeaturizerConfig& featurizer_config() const { return featurizer_; }
  const nn::LayerStack& encoder() const { return encoder_; }
  nn::LayerStack& encoder() { return encoder_; }
  std::size_t hidden_dim() const { return encoder_.output_dim(); }
  std::size_t input_dim() const { return encoder_.input_dim(); }
  std::size_t head_count() const { return heads_.size(); }
  const std::vector<TaskSpec>& tasks() const { return specs_; }
  const nn::LayerStack& head(std::size_t i) const { return heads_.at(i); }
  nn::LayerStack& head(std::size_t i) { return heads_.at(i); }

  bool has_task(const std::string& task_id) const { return find(task_id).has_value(); }

  std::size_t head_index(const std::string& task_id) const {
    if (auto i = find(task_id)) return *i;
    throw NotFound("no head for task '" + task_id + "'");
  }
  const TaskSpec& task(const std::string& task_id) const { return specs_[head_index(task_id)]; }

  /// Eval-mode logits (dropout off).
  std::vector<double> predict_logits(const std::string& task_id,
                                     std::span<const double> features) const {
    return logits_at(head_index(task_id), features);
  }
  std::vector<double> logits_at(std::size_t head, std::span<const double> features) const {
    if (features.size() != input_dim()) {
      throw InvalidInput("features have dim " + std::to_string(features.size()) + ", model expects " +
                         std::to_string(input_dim()));
    }
    return heads_.at(head).infer(encoder_.infer(features));
  }

  // ---- training plumbing --------------------------------------------------

  /// Parameter tensors: encoder W0,b0,... then each head's W,b in arrival order.
  std::vector<nn::Matrix*> parameters() {
    auto out = encoder_.parameters();
    for (auto& h : heads_) {
      for (auto* p : h.parameters()) out.push_back(p);
    }
    return out;
  }
  std::vector<const nn::Matrix*> parameters() const {
    auto out = encoder_.parameters();
    for (const auto& h : heads_) {
      for (const auto* p : h.parameters()) out.push_back(p);
    }
    return out;
  }

  nn::GradientSet zero_gradients() const {
    nn::GradientSet g;
    for (const auto* p : parameters()) g.tensors.emplace_back(p->rows(), p->cols());
    return g;
  }

  /// Offset of head `i`'s first tensor in parameters().
  std::size_t head_tensor_offset(std::size_t i) const { return 2 * encoder_.depth() + 2 * i; }

  /// Per-tensor frozen flags aligned with parameters().
  std::vector<bool> frozen_tensor_mask() const {
    std::vector<bool> mask(2 * encoder_.depth(), encoder_frozen_);
    for (std::size_t h = 0; h < heads_.size(); ++h) {
      mask.push_back(head_frozen_[h]);
      mask.push_back(head_frozen_[h]);
    }
    return mask;
  }

  void set_freeze(const FreezeScope& scope) {
    std::optional<std::size_t> keep;
    if (scope.kind == FreezeScope::Kind::kHeadsExcept || scope.kind == FreezeScope::Kind::kAllExcept) {
      keep = head_index(scope.task_id);
    }
    encoder_frozen_ =
        scope.kind == FreezeScope::Kind::kEncoder || scope.kind == FreezeScope::Kind::kAllExcept;
    for (std::size_t h = 0; h < heads_.size(); ++h) {
      head_frozen_[h] = keep.has_value() && *keep != h;
    }
  }
  bool encoder_frozen() const { return encoder_frozen_; }
  bool head_frozen(std::size_t i) const { return head_frozen_.at(i); }

  /// Train-mode forward through the encoder and one head; caches activations.
  std::vector<double> train_forward(std::size_t head, std::span<const double> features, nn::Rng& rng) {
    const auto hidden = encoder_.forward(features, true, &rng);
    return heads_.at(head).forward(hidden, true, &rng);
  }

  /// Dropout-free forward that caches like train_forward (Fisher estimates).
  std::vector<double> trace_forward(std::size_t head, std::span<const double> features) {
    return heads_.at(head).trace(encoder_.trace(features));
  }

  /// Adds scale * gradient of a loss whose logit gradient is `grad_logits`
  /// (for the most recent train_forward on `head`). Frozen groups are skipped.
  void train_backward(std::size_t head, std::span<const double> grad_logits, nn::GradientSet& grads,
                      double scale) const {
    const std::size_t off = head_tensor_offset(head);
    std::span<nn::Matrix> all(grads.tensors);
    std::vector<double> hidden_grad;
    const bool need_encoder = !encoder_frozen_;
    heads_.at(head).backward_accumulate(grad_logits, all.subspan(off, 2), scale,
                                        need_encoder ? &hidden_grad : nullptr);
    if (!need_encoder) return;
    // hidden_grad already carries `scale`.
    encoder_.backward_accumulate(hidden_grad, all.subspan(0, 2 * encoder_.depth()), 1.0);
  }

  friend bool operator==(const MultiHeadModel& a, const MultiHeadModel& b) {
    return a.featurizer_ == b.featurizer_ && a.encoder_ == b.encoder_ && a.specs_ == b.specs_ &&
           a.heads_ == b.heads_;
  }

 private:
  std::optional<std::size_t> find(const std::string& task_id) const {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      if (specs_[i].task_id == task_id) return i;
    }
    return std::nullopt;
  }

  void attach(TaskSpec spec, nn::LayerStack head) {
    if (has_task(spec.task_id)) throw Conflict("task '" + spec.task_id + "' already has a head");
    if (head.input_dim() != encoder_.output_dim() || head.output_dim() != spec.class_count()) {
      throw InvalidInput("head for '" + spec.task_id + "' has the wrong shape");
    }
    specs_.push_back(std::move(spec));
    heads_.push_back(std::move(head));
    head_frozen_.push_back(false);
  }

  data::FeaturizerConfig featurizer_;
  nn::LayerStack encoder_;
  std::vector<TaskSpec> specs_;
  std::vector<nn::LayerStack> heads_;
  bool encoder_frozen_ = false;
  std::vector<bool> head_frozen_;
};

}  // namespace driftguard::model
