#pragma once

// One-vs-rest linear SVMs trained by averaged stochastic subgradient descent
// on the L2-regularized hinge loss
//   lambda/2 |w|^2 + 1/n sum max(0, 1 - y (w.x + b)),   lambda = 1 / (C n).

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <json.hpp>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "distractnet/error.hpp"
#include "distractnet/sigcore/label.hpp"
#include "distractnet/spectral/features.hpp"

namespace distractnet {

struct SvmConfig {
  double C = 1.0;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const { return {{"C", C}, {"epochs", epochs}, {"seed", seed}}; }
};

struct SvmModel {
  Eigen::MatrixXd weights;  // classes x features
  Eigen::VectorXd bias;     // classes
  std::optional<ZScoreStats> normalization;

  std::size_t classes() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(weights.cols()); }

  nlohmann::json to_json() const {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index c = 0; c < weights.rows(); ++c) {
      Eigen::RowVectorXd r = weights.row(c);
      w.push_back(std::vector<double>(r.data(), r.data() + r.size()));
    }
    nlohmann::json j = {{"weights", w}, {"bias", std::vector<double>(bias.data(), bias.data() + bias.size())}};
    if (normalization)
      j["normalization"] = {
          {"mean", std::vector<double>(normalization->mean.data(), normalization->mean.data() + normalization->mean.size())},
          {"std", std::vector<double>(normalization->std.data(), normalization->std.data() + normalization->std.size())}};
    return j;
  }
};

inline std::vector<int> feature_labels(const FeatureMatrix& fm) {
  std::vector<int> y(fm.tags.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = class_index(fm.tags[i]);
  return y;
}

inline SvmModel train_svm(const FeatureMatrix& fm, const SvmConfig& cfg = {}) {
  detail::require(cfg.C > 0.0, "SVM C must be positive");
  detail::require(cfg.epochs >= 1, "SVM needs at least one epoch");
  detail::require(fm.tags.size() == static_cast<std::size_t>(fm.n_rows()), "feature rows and labels disagree");
  const auto y = feature_labels(fm);
  std::vector<int> present(y);
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  detail::require(present.size() >= 2, "SVM training needs at least two classes, got " + std::to_string(present.size()));

  const auto n = static_cast<std::size_t>(fm.n_rows());
  const Eigen::Index d = fm.n_cols();
  const double lambda = 1.0 / (cfg.C * static_cast<double>(n));

  SvmModel model;
  model.weights = Eigen::MatrixXd::Zero(kNumConditions, d);
  model.bias = Eigen::VectorXd::Zero(kNumConditions);
  model.normalization = fm.normalization;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<std::size_t>> orders;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    orders.push_back(order);
  }

  // Averaging starts after the first epoch (or immediately with a single epoch).
  const std::size_t avg_from = cfg.epochs > 1 ? n : 0;
  for (int c = 0; c < kNumConditions; ++c) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d), wbar = Eigen::VectorXd::Zero(d);
    double b = 0.0, bbar = 0.0;
    std::size_t t = 0, averaged = 0;
    for (const auto& ord : orders) {
      for (std::size_t i : ord) {
        ++t;
        const double eta = 1.0 / (1.0 + lambda * static_cast<double>(t));
        const double yi = y[i] == c ? 1.0 : -1.0;
        const auto x = fm.rows.row(static_cast<Eigen::Index>(i));
        const double margin = yi * (x.dot(w) + b);
        w *= 1.0 - eta * lambda;
        if (margin < 1.0) {
          w += eta * yi * x.transpose();
          b += eta * yi;
        }
        if (t > avg_from) {
          ++averaged;
          const double mix = 1.0 / static_cast<double>(averaged);
          wbar += mix * (w - wbar);
          bbar += mix * (b - bbar);
        }
      }
    }
    model.weights.row(c) = wbar.transpose();
    model.bias(c) = bbar;
  }
  return model;
}

/// Per-class decision values [n x classes].
inline Eigen::MatrixXd svm_decision(const SvmModel& model, const FeatureMatrix& fm) {
  detail::require(static_cast<std::size_t>(fm.n_cols()) == model.dimension(),
                  "feature dimension " + std::to_string(fm.n_cols()) + " does not match the SVM dimension " +
                      std::to_string(model.dimension()));
  return (fm.rows * model.weights.transpose()).rowwise() + model.bias.transpose();
}

/// Argmax of the decision values; ties go to the lowest class index.
inline std::vector<int> predict_svm(const SvmModel& model, const FeatureMatrix& fm) {
  const Eigen::MatrixXd dv = svm_decision(model, fm);
  std::vector<int> out(static_cast<std::size_t>(dv.rows()));
  for (Eigen::Index i = 0; i < dv.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < dv.cols(); ++c)
      if (dv(i, c) > dv(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace distractnet
