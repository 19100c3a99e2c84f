#pragma once

#include <cmath>
#include <vector>

#include "distractnet/autodiff/graph.hpp"

namespace distractnet::ad {

/// Mean negative log-likelihood of `targets` under row-probabilities `probs`.
template <typename T>
double cross_entropy(const Tensor<T>& probs, const std::vector<int>& targets) {
  distractnet::detail::require(probs.rank() == 2 && probs.dim(0) == targets.size(),
                  "cross-entropy: probabilities and targets disagree on batch size");
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  double loss = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto t = static_cast<std::size_t>(targets[s]);
    distractnet::detail::require(t < c, "cross-entropy: target class out of range");
    loss -= std::log(std::max(static_cast<double>(probs[s * c + t]), 1e-300));
  }
  return loss / static_cast<double>(n);
}

/// (probs - onehot) / batch, the gradient of the mean cross-entropy with
/// respect to the logits feeding a softmax.
template <typename T>
Tensor<T> softmax_cross_entropy_grad(const Tensor<T>& probs, const std::vector<int>& targets) {
  Tensor<T> g = probs;
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  const T inv = T(1) / static_cast<T>(n);
  for (std::size_t s = 0; s < n; ++s) {
    g[s * c + static_cast<std::size_t>(targets[s])] -= T(1);
    for (std::size_t j = 0; j < c; ++j) g[s * c + j] *= inv;
  }
  return g;
}

/// Backpropagates the mean cross-entropy of the last forward pass. When the
/// final node is a softmax the closed-form logit gradient seeds its input.
template <typename T>
double backward_cross_entropy(Graph<T>& graph, const std::vector<int>& targets) {
  const auto last = static_cast<int>(graph.size()) - 1;
  const Tensor<T>& probs = graph.activation(static_cast<std::size_t>(last));
  const double loss = cross_entropy(probs, targets);
  if (graph.node(static_cast<std::size_t>(last)).op->kind() == "Softmax") {
    graph.backward_from(graph.node(static_cast<std::size_t>(last)).input,
                        softmax_cross_entropy_grad(probs, targets));
  } else {
    Tensor<T> g(probs.shape);
    const std::size_t c = probs.dim(1);
    for (std::size_t s = 0; s < targets.size(); ++s) {
      const auto idx = s * c + static_cast<std::size_t>(targets[s]);
      g[idx] = static_cast<T>(-1.0 / (static_cast<double>(probs[idx]) * static_cast<double>(targets.size())));
    }
    graph.backward(g);
  }
  return loss;
}

}  // namespace distractnet::ad
