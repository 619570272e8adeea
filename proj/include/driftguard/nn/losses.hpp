// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "driftguard/error.hpp"
#include "driftguard/nn/matrix.hpp"

namespace driftguard::nn {

/// Softmax temperature. Always strictly positive.
class Temperature {
 public:
  explicit Temperature(double t) : t_(t) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw InvalidInput("temperature must be finite and > 0, got " + std::to_string(t));
    }
  }
  double value() const { return t_; }

 private:
  double t_;
};

inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {
inline void require_logits(std::span<const double> logits, const char* what) {
  if (logits.size() < 2) throw InvalidInput(std::string(what) + ": need at least 2 logits");
  require_finite(logits, what);
}
}  // namespace detail

/// q_i = exp(z_i / T) / sum_j exp(z_j / T).
///
/// Logits are divided by T first and the max is subtracted afterwards, so
/// softmax_t(z, T) and softmax_t(z / T, 1) follow the same float path.
inline std::vector<double> softmax_t(std::span<const double> logits, Temperature temp) {
  detail::require_logits(logits, "softmax_t");
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] / temp.value();
  const double top = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  return softmax_t(logits, Temperature(1.0));
}

/// -sum_i target_i * ln(predicted_i), with predicted clamped to [1e-12, 1].
inline double cross_entropy(std::span<const double> target, std::span<const double> predicted) {
  if (target.size() != predicted.size()) {
    throw InvalidInput("cross_entropy: length mismatch (" + std::to_string(target.size()) +
                       " vs " + std::to_string(predicted.size()) + ")");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 0.0) continue;
    loss -= target[i] * std::log(std::clamp(predicted[i], kProbabilityFloor, 1.0));
  }
  return loss;
}

struct KdOptions {
  /// Apply the temperature to the student's distribution as well as the
  /// teacher's soft targets.
  bool scale_student = true;
  /// Multiply loss and gradient by T^2.
  bool t2_scaling = false;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // w.r.t. the (student) logits
};

/// Distillation loss CE(softmax_t(teacher), softmax_t(student)) and its
/// gradient w.r.t. the student logits, (q_student - q_teacher) / T.
inline LossAndGrad kd_loss_and_grad(std::span<const double> teacher_logits,
                                    std::span<const double> student_logits, Temperature temp,
                                    const KdOptions& opts = {}) {
  if (teacher_logits.size() != student_logits.size()) {
    throw InvalidInput("kd_loss: length mismatch (" + std::to_string(teacher_logits.size()) +
                       " vs " + std::to_string(student_logits.size()) + ")");
  }
  const auto soft_targets = softmax_t(teacher_logits, temp);
  const Temperature student_temp = opts.scale_student ? temp : Temperature(1.0);
  const auto student_probs = softmax_t(student_logits, student_temp);

  LossAndGrad out;
  out.loss = cross_entropy(soft_targets, student_probs);
  out.grad.resize(student_probs.size());
  const double scale = opts.t2_scaling ? temp.value() * temp.value() : 1.0;
  for (std::size_t i = 0; i < student_probs.size(); ++i) {
    out.grad[i] = scale * (student_probs[i] - soft_targets[i]) / student_temp.value();
  }
  out.loss *= scale;
  return out;
}

inline double kd_loss(std::span<const double> teacher_logits, std::span<const double> student_logits,
                      Temperature temp, const KdOptions& opts = {}) {
  return kd_loss_and_grad(teacher_logits, student_logits, temp, opts).loss;
}

/// Cross-entropy of softmax(logits) against a hard label, with gradient.
inline LossAndGrad label_loss_and_grad(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw InvalidInput("label " + std::to_string(label) + " out of range for " +
                       std::to_string(logits.size()) + " classes");
  }
  const auto probs = softmax(logits);
  LossAndGrad out;
  out.loss = -std::log(std::clamp(probs[label], kProbabilityFloor, 1.0));
  out.grad = probs;
  out.grad[label] -= 1.0;
  return out;
}

/// Shannon entropy in nats; the floor of cross_entropy(p, .) over its second argument.
inline double entropy(std::span<const double> probs) { return cross_entropy(probs, probs); }

}  // namespace driftguard::nn
