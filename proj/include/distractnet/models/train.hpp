#pragma once

// Mini-batch training with Adam and early stopping, and batched inference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "distractnet/autodiff/adam.hpp"
#include "distractnet/autodiff/graph.hpp"
#include "distractnet/autodiff/loss.hpp"
#include "distractnet/error.hpp"
#include "distractnet/fingerprint.hpp"
#include "distractnet/sigcore/epochs.hpp"

namespace distractnet {

enum class Precision { F32 = 32, F64 = 64 };

inline Precision parse_precision(int bits) {
  if (bits == 32) return Precision::F32;
  if (bits == 64) return Precision::F64;
  throw InputError("precision must be 32 or 64, got " + std::to_string(bits));
}

struct TrainConfig {
  std::string optimizer = "adam";
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;

  void validate() const {
    detail::require(optimizer == "adam", "unsupported optimizer '" + optimizer + "' (only adam)");
    detail::require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning rate must be >= 0");
    detail::require(batch_size >= 1, "batch size must be >= 1");
    detail::require(max_epochs >= 1, "max epochs must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"optimizer", optimizer}, {"learning_rate", learning_rate}, {"batch_size", batch_size},
            {"max_epochs", max_epochs}, {"patience", patience}, {"seed", seed},
            {"precision", static_cast<int>(precision)}};
  }
};

/// Per-channel z-score statistics pooled over all epochs and samples.
struct ChannelNorm {
  std::vector<double> mean;
  std::vector<double> std;

  nlohmann::json to_json() const { return {{"mean", mean}, {"std", std}}; }
  static ChannelNorm from_json(const nlohmann::json& j) {
    return {j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
  }
};

inline ChannelNorm fit_channel_norm(const EpochSet& set) {
  detail::require(set.n_epochs >= 1, "cannot fit normalization on an empty epoch set");
  ChannelNorm norm;
  norm.mean.assign(set.n_channels, 0.0);
  norm.std.assign(set.n_channels, 1.0);
  const double count = static_cast<double>(set.n_epochs * set.n_samples);
  for (std::size_t c = 0; c < set.n_channels; ++c) {
    double sum = 0.0;
    for (std::size_t e = 0; e < set.n_epochs; ++e) sum += set.epoch(e).row(static_cast<Eigen::Index>(c)).sum();
    const double mu = sum / count;
    double ss = 0.0;
    for (std::size_t e = 0; e < set.n_epochs; ++e)
      ss += (set.epoch(e).row(static_cast<Eigen::Index>(c)).array() - mu).square().sum();
    const double sd = std::sqrt(ss / count);
    norm.mean[c] = mu;
    norm.std[c] = sd > 0.0 ? sd : 1.0;
  }
  return norm;
}

/// Normalized [n, 1, channels, samples] tensor for the epochs in `idx`.
template <typename T>
ad::Tensor<T> to_tensor(const EpochSet& set, const ChannelNorm& norm, const std::vector<std::size_t>& idx) {
  detail::require(norm.mean.size() == set.n_channels, "normalization does not match the channel count");
  ad::Tensor<T> x(ad::Shape{idx.size(), 1, set.n_channels, set.n_samples});
  T* out = x.data();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const double* src = set.data.data() + idx[r] * set.epoch_size();
    for (std::size_t c = 0; c < set.n_channels; ++c) {
      const double mu = norm.mean[c], inv = 1.0 / norm.std[c];
      for (std::size_t s = 0; s < set.n_samples; ++s) *out++ = static_cast<T>((src[c * set.n_samples + s] - mu) * inv);
    }
  }
  return x;
}

inline std::vector<int> class_targets(const EpochSet& set, const std::vector<std::size_t>& idx) {
  std::vector<int> t(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) t[r] = set.class_of(idx[r]);
  return t;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;  // NaN without a validation set
};

template <typename T>
struct TrainedModel {
  ad::Graph<T> graph;
  ChannelNorm norm;
  nlohmann::json config;
  std::string fingerprint;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;

  nlohmann::json sidecar() const {
    auto hist = nlohmann::json::array();
    for (const auto& h : history)
      hist.push_back({{"epoch", h.epoch}, {"loss", h.loss}, {"train_accuracy", h.train_accuracy},
                      {"val_accuracy", std::isfinite(h.val_accuracy) ? nlohmann::json(h.val_accuracy) : nullptr}});
    return {{"config", config}, {"fingerprint", fingerprint}, {"normalization", norm.to_json()},
            {"labels", {"NS", "LD", "HD"}}, {"history", hist}, {"best_epoch", best_epoch}};
  }
};

namespace detail {

inline std::size_t argmax_row(const double* p, std::size_t c) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < c; ++j)
    if (p[j] > p[best]) best = j;
  return best;
}

template <typename T>
Eigen::MatrixXd predict_tensor(ad::Graph<T>& graph, const EpochSet& set, const ChannelNorm& norm,
                               std::size_t batch = 128) {
  const std::size_t classes = graph.output_shape().back();
  Eigen::MatrixXd probs(static_cast<Eigen::Index>(set.n_epochs), static_cast<Eigen::Index>(classes));
  for (std::size_t start = 0; start < set.n_epochs; start += batch) {
    const std::size_t stop = std::min(set.n_epochs, start + batch);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto& out = graph.forward(to_tensor<T>(set, norm, idx), ad::Mode::Eval);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < classes; ++j)
        probs(static_cast<Eigen::Index>(start + r), static_cast<Eigen::Index>(j)) = out[r * classes + j];
  }
  return probs;
}

inline double accuracy_of(const Eigen::MatrixXd& probs, const std::vector<int>& truth) {
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::RowVectorXd row = probs.row(i);
    if (static_cast<int>(argmax_row(row.data(), static_cast<std::size_t>(row.size()))) == truth[static_cast<std::size_t>(i)])
      ++hits;
  }
  return probs.rows() ? static_cast<double>(hits) / static_cast<double>(probs.rows()) : 0.0;
}

}  // namespace detail

/// Trains `graph` on `trainset`, stopping once validation accuracy has not
/// improved for `patience` epochs and restoring the best weights. Without a
/// validation set, training accuracy is monitored instead.
template <typename T>
TrainedModel<T> train(ad::Graph<T> graph, const EpochSet& trainset, const EpochSet& valset, const TrainConfig& cfg,
                      const nlohmann::json& model_config = nlohmann::json::object()) {
  cfg.validate();
  trainset.validate();
  detail::require(trainset.n_epochs >= 1, "training set is empty");
  const ad::Shape in = graph.input_shape();  // copied: `graph` is moved below
  detail::require(in.size() == 3 && in[1] == trainset.n_channels && in[2] == trainset.n_samples,
                  "epoch shape " + std::to_string(trainset.n_channels) + "x" + std::to_string(trainset.n_samples) +
                      " does not match the model input " + ad::shape_str(in));
  if (valset.n_epochs > 0)
    detail::require(valset.n_channels == trainset.n_channels && valset.n_samples == trainset.n_samples,
                    "validation epochs differ in shape from training epochs");

  TrainedModel<T> model{std::move(graph), fit_channel_norm(trainset), {}, {}, {}, 0};
  model.config = {{"model", model_config}, {"train", cfg.to_json()}};
  model.fingerprint = fingerprint(model.config);
  auto& g = model.graph;
  g.reseed(cfg.seed);

  std::vector<std::size_t> all(trainset.n_epochs);
  std::iota(all.begin(), all.end(), 0);
  const ad::Tensor<T> x_all = to_tensor<T>(trainset, model.norm, all);
  const std::vector<int> y_all = class_targets(trainset, all);
  const std::size_t per = x_all.size() / trainset.n_epochs;
  std::vector<int> y_val;
  if (valset.n_epochs > 0) {
    std::vector<std::size_t> vi(valset.n_epochs);
    std::iota(vi.begin(), vi.end(), 0);
    y_val = class_targets(valset, vi);
  }

  ad::Adam<T> opt(g.trainable_parameters(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5DEECE66DULL);
  auto params = g.parameters();
  std::vector<ad::Tensor<T>> best;
  double best_score = -1.0;
  std::size_t since_best = 0;

  for (std::size_t ep = 1; ep <= cfg.max_epochs; ++ep) {
    std::vector<std::size_t> order = all;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::size_t n = stop - start;
      ad::Tensor<T> xb(ad::Graph<T>::with_batch(in, n));
      std::vector<int> yb(n);
      for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(x_all.data() + order[start + r] * per, per, xb.data() + r * per);
        yb[r] = y_all[order[start + r]];
      }
      const auto& probs = g.forward(xb, ad::Mode::Train);
      const std::size_t classes = probs.dim(1);
      for (std::size_t r = 0; r < n; ++r) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < classes; ++j)
          if (probs[r * classes + j] > probs[r * classes + arg]) arg = j;
        hits += static_cast<int>(arg) == yb[r];
      }
      const double loss = ad::backward_cross_entropy(g, yb);
      if (!std::isfinite(loss))
        throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(ep) + ", batch starting " +
                             std::to_string(start));
      loss_sum += loss * static_cast<double>(n);
      opt.step();
    }

    EpochRecord rec;
    rec.epoch = ep;
    rec.loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(hits) / static_cast<double>(order.size());
    rec.val_accuracy = valset.n_epochs > 0
                           ? detail::accuracy_of(detail::predict_tensor(g, valset, model.norm), y_val)
                           : std::numeric_limits<double>::quiet_NaN();
    model.history.push_back(rec);

    const double score = valset.n_epochs > 0 ? rec.val_accuracy : rec.train_accuracy;
    if (score > best_score) {
      best_score = score;
      model.best_epoch = ep;
      since_best = 0;
      best.clear();
      for (auto* p : params) best.push_back(p->value);
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best[k];
  return model;
}

/// Class probabilities [n x classes]; rows sum to 1.
template <typename T>
Eigen::MatrixXd predict_proba(TrainedModel<T>& model, const EpochSet& epochs) {
  const auto& in = model.graph.input_shape();
  detail::require(epochs.n_channels == in[1] && epochs.n_samples == in[2],
                  "epoch shape " + std::to_string(epochs.n_channels) + "x" + std::to_string(epochs.n_samples) +
                      " does not match the model input " + ad::shape_str(in));
  return detail::predict_tensor(model.graph, epochs, model.norm);
}

inline std::vector<int> argmax_rows(const Eigen::MatrixXd& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::RowVectorXd row = probs.row(i);
    out[static_cast<std::size_t>(i)] = static_cast<int>(detail::argmax_row(row.data(), static_cast<std::size_t>(row.size())));
  }
  return out;
}

}  // namespace distractnet
