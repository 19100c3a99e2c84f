#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "distractnet/autodiff/graph.hpp"
#include "distractnet/autodiff/loss.hpp"

namespace distractnet::ad {

struct GradCheckOptions {
  /// Class targets for a cross-entropy loss; empty selects a seeded random
  /// projection of the output as the scalar loss.
  std::vector<int> targets;
  std::size_t sample = 50;  // checked entries (all if fewer exist)
  bool include_input = false;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation flipped a pooling argmax
};

/// Compares reverse-mode gradients with central differences
/// (f(x + eps) - f(x - eps)) / 2 eps; relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-8). Entries whose perturbation changes a
/// discrete pooling choice sit on a non-differentiable point and are skipped.
template <typename T>
GradCheckResult gradient_check(Graph<T>& graph, const Tensor<T>& input, double eps,
                               const GradCheckOptions& opt = {}) {
  auto params = graph.parameters();
  std::vector<Tensor<T>> snapshot;
  for (auto* p : params) snapshot.push_back(p->value);

  std::mt19937_64 rng(opt.seed);
  std::vector<T> projection;
  auto loss_of = [&](const Tensor<T>& out) {
    if (!opt.targets.empty()) return cross_entropy(out, opt.targets);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += static_cast<double>(projection[i]) * out[i];
    return acc;
  };

  graph.set_freeze_random(true);
  graph.set_input_grad(opt.include_input);
  Tensor<T> x = input;
  const Tensor<T>& out0 = graph.forward(x, Mode::Train);
  if (opt.targets.empty()) {
    std::normal_distribution<double> normal(0.0, 1.0);
    projection.resize(out0.size());
    for (auto& r : projection) r = static_cast<T>(normal(rng));
    Tensor<T> seed(out0.shape, projection);
    graph.backward(seed);
  } else {
    backward_cross_entropy(graph, opt.targets);
  }
  const auto base_decisions = graph.decisions();

  struct Entry {
    int param;  // -1 for the input
    std::size_t index;
    T analytic;
  };
  std::vector<Entry> pool;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->trainable) continue;
    for (std::size_t i = 0; i < params[k]->value.size(); ++i)
      pool.push_back({static_cast<int>(k), i, params[k]->grad[i]});
  }
  if (opt.include_input) {
    const auto& gi = graph.input_grad();
    for (std::size_t i = 0; i < x.size(); ++i) pool.push_back({-1, i, gi[i]});
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  if (pool.size() > opt.sample) pool.resize(opt.sample);

  GradCheckResult res;
  for (const auto& e : pool) {
    T& slot = e.param < 0 ? x[e.index] : params[static_cast<std::size_t>(e.param)]->value[e.index];
    const T orig = slot;
    slot = static_cast<T>(orig + eps);
    const double up = loss_of(graph.forward(x, Mode::Train));
    const bool same_up = graph.decisions() == base_decisions;
    slot = static_cast<T>(orig - eps);
    const double down = loss_of(graph.forward(x, Mode::Train));
    const bool same_down = graph.decisions() == base_decisions;
    slot = orig;
    if (!same_up || !same_down) {
      ++res.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = e.analytic;
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    res.max_relative_error = std::max(res.max_relative_error, std::abs(analytic - numeric) / denom);
    ++res.checked;
  }

  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = snapshot[k];
  graph.set_freeze_random(false);
  graph.set_input_grad(false);
  return res;
}

}  // namespace distractnet::ad
