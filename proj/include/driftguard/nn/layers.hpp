// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "driftguard/error.hpp"
#include "driftguard/nn/matrix.hpp"
#include "driftguard/nn/rng.hpp"

namespace driftguard::nn {

enum class Activation { kRelu, kIdentity };

struct AffineLayer {
  Matrix weight;  // out x in
  Matrix bias;    // out x 1
  Activation activation = Activation::kRelu;
  double dropout = 0.0;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

/// One gradient tensor per parameter tensor, in parameter order, plus the
/// gradient w.r.t. the input when it was requested.
struct GradientSet {
  std::vector<Matrix> tensors;
  std::vector<double> input;

  void zero() {
    for (auto& t : tensors) t.fill(0.0);
    std::fill(input.begin(), input.end(), 0.0);
  }
};

/// Glorot-uniform initialized affine layer with zero bias.
inline AffineLayer glorot_layer(std::size_t in, std::size_t out, Activation act, double dropout,
                                Rng& rng) {
  AffineLayer layer{Matrix(out, in), Matrix(out, 1), act, dropout};
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : layer.weight.values()) w = rng.uniform(-limit, limit);
  return layer;
}

/// Ordered affine layers with an activation after each and inverted dropout
/// in train mode. Forward caches what backward needs for one example; the
/// first layer skips zero inputs, which keeps hashed sparse features cheap.
class LayerStack {
 public:
  LayerStack() = default;

  explicit LayerStack(std::vector<AffineLayer> layers) : layers_(std::move(layers)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.weight.rows() == 0 || l.weight.cols() == 0) {
        throw InvalidInput("layer " + std::to_string(i) + " has a zero dimension");
      }
      if (l.bias.rows() != l.weight.rows() || l.bias.cols() != 1) {
        throw InvalidInput("layer " + std::to_string(i) + " bias shape does not match weight");
      }
      if (!(l.dropout >= 0.0 && l.dropout < 1.0)) {
        throw InvalidInput("dropout rate must be in [0,1)");
      }
      if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
        throw InvalidInput("layer " + std::to_string(i) + " input dim " +
                           std::to_string(l.in_dim()) + " does not match previous output " +
                           std::to_string(layers_[i - 1].out_dim()));
      }
    }
  }

  /// Glorot-initialized stack over dims[0] -> dims[1] -> ... -> dims.back().
  static LayerStack glorot(std::span<const std::size_t> dims, Activation act, double dropout,
                           Rng& rng) {
    if (dims.size() < 2) throw InvalidInput("layer stack needs at least two dims");
    std::vector<AffineLayer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      if (dims[i] == 0 || dims[i + 1] == 0) throw InvalidInput("layer dims must be positive");
      layers.push_back(glorot_layer(dims[i], dims[i + 1], act, dropout, rng));
    }
    return LayerStack(std::move(layers));
  }

  std::size_t depth() const { return layers_.size(); }
  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  const std::vector<AffineLayer>& layers() const { return layers_; }
  std::vector<AffineLayer>& layers() { return layers_; }

  /// Parameter tensors in order W0, b0, W1, b1, ...
  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> out;
    for (auto& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }
  std::vector<const Matrix*> parameters() const {
    std::vector<const Matrix*> out;
    for (const auto& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  GradientSet zero_gradients() const {
    GradientSet g;
    for (const auto* p : parameters()) g.tensors.emplace_back(p->rows(), p->cols());
    return g;
  }

  /// Runs the stack. In train mode activations are cached for backward and
  /// dropout draws from `rng`; eval mode never touches the cache or the rng.
  std::vector<double> forward(std::span<const double> input, bool train_mode, Rng* rng = nullptr) {
    if (!train_mode) return infer(input);
    std::vector<LayerCache> cache(layers_.size());
    auto out = run(input, true, rng, &cache);
    cache_ = std::move(cache);
    cached_ = true;
    return out;
  }

  /// Eval-mode forward (no dropout) that still caches for backward.
  std::vector<double> trace(std::span<const double> input) {
    std::vector<LayerCache> cache(layers_.size());
    auto out = run(input, false, nullptr, &cache);
    cache_ = std::move(cache);
    cached_ = true;
    return out;
  }

  /// Eval-mode forward. Safe to call concurrently.
  std::vector<double> infer(std::span<const double> input) const {
    return run(input, false, nullptr, nullptr);
  }

  /// Accumulates scale * d(loss)/d(params) into `grads` (tensor order as in
  /// parameters()). When `input_grad` is non-null it receives d(loss)/d(input).
  void backward_accumulate(std::span<const double> upstream, std::span<Matrix> grads,
                           double scale, std::vector<double>* input_grad = nullptr) const {
    if (!cached_) throw StateError("backward called without a cached train-mode forward");
    if (upstream.size() != output_dim()) {
      throw InvalidInput("backward: upstream dim " + std::to_string(upstream.size()) +
                         " expected " + std::to_string(output_dim()));
    }
    if (grads.size() != 2 * layers_.size()) {
      throw InvalidInput("backward: gradient set is not congruent with the stack");
    }
    std::vector<double> g(upstream.begin(), upstream.end());
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& layer = layers_[li];
      const auto& c = cache_[li];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= c.gate[i];

      Matrix& dw = grads[2 * li];
      Matrix& db = grads[2 * li + 1];
      const std::size_t in = layer.in_dim();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] == 0.0) continue;
        const double gi = scale * g[i];
        db.data()[i] += gi;
        double* row = dw.data() + i * in;
        for (std::size_t j : c.nonzero) row[j] += gi * c.input[j];
      }

      const bool need_input = li > 0 || input_grad != nullptr;
      if (!need_input) break;
      std::vector<double> below(in, 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] == 0.0) continue;
        const double* w = layer.weight.data() + i * in;
        for (std::size_t j = 0; j < in; ++j) below[j] += w[j] * g[i];
      }
      if (li == 0) {
        for (double& v : below) v *= scale;
        *input_grad = std::move(below);
      } else {
        g = std::move(below);
      }
    }
  }

  /// Fresh gradient set, including the input gradient.
  GradientSet backward(std::span<const double> upstream) const {
    GradientSet grads = zero_gradients();
    backward_accumulate(upstream, grads.tensors, 1.0, &grads.input);
    return grads;
  }

  bool has_cache() const { return cached_; }
  void clear_cache() {
    cache_.clear();
    cached_ = false;
  }

  friend bool operator==(const LayerStack& a, const LayerStack& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      const auto& x = a.layers_[i];
      const auto& y = b.layers_[i];
      if (!(x.weight == y.weight) || !(x.bias == y.bias) || x.activation != y.activation ||
          x.dropout != y.dropout) {
        return false;
      }
    }
    return true;
  }

 private:
  struct LayerCache {
    std::vector<double> input;
    std::vector<std::size_t> nonzero;
    std::vector<double> gate;  // relu mask times dropout factor
  };

  std::vector<double> run(std::span<const double> input, bool train_mode, Rng* rng,
                          std::vector<LayerCache>* cache) const {
    if (layers_.empty()) throw StateError("forward on an empty layer stack");
    if (input.size() != input_dim()) {
      throw InvalidInput("forward: input dim " + std::to_string(input.size()) + " expected " +
                         std::to_string(input_dim()));
    }
    std::vector<double> current(input.begin(), input.end());
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const auto& layer = layers_[li];
      std::vector<std::size_t> nonzero;
      nonzero.reserve(current.size());
      for (std::size_t j = 0; j < current.size(); ++j) {
        if (current[j] != 0.0) nonzero.push_back(j);
      }
      const std::size_t in = layer.in_dim();
      std::vector<double> out(layer.out_dim());
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double* w = layer.weight.data() + i * in;
        double acc = layer.bias.data()[i];
        for (std::size_t j : nonzero) acc += w[j] * current[j];
        out[i] = acc;
      }
      std::vector<double> gate;
      if (cache != nullptr) gate.assign(out.size(), 1.0);
      if (layer.activation == Activation::kRelu) {
        for (std::size_t i = 0; i < out.size(); ++i) {
          if (!(out[i] > 0.0)) {
            out[i] = 0.0;
            if (cache != nullptr) gate[i] = 0.0;
          }
        }
      }
      if (train_mode && layer.dropout > 0.0) {
        if (rng == nullptr) throw StateError("train-mode dropout needs an rng");
        const double keep_scale = 1.0 / (1.0 - layer.dropout);
        for (std::size_t i = 0; i < out.size(); ++i) {
          const double factor = rng->bernoulli(layer.dropout) ? 0.0 : keep_scale;
          out[i] *= factor;
          if (cache != nullptr) gate[i] *= factor;
        }
      }
      if (cache != nullptr) {
        (*cache)[li].input = std::move(current);
        (*cache)[li].nonzero = std::move(nonzero);
        (*cache)[li].gate = std::move(gate);
      }
      current = std::move(out);
    }
    return current;
  }

  std::vector<AffineLayer> layers_;
  std::vector<LayerCache> cache_;
  bool cached_ = false;
};

}  // namespace driftguard::nn
