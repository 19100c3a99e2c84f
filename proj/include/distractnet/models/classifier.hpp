#pragma once

// Uniform fit/predict interface over the neural models, the PSD-SVM baseline
// and a majority-class reference, so cross-validation can treat them alike.

#include <algorithm>
#include <array>
#include <functional>
#include <json.hpp>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "distractnet/models/deepconvnet.hpp"
#include "distractnet/models/hybrid.hpp"
#include "distractnet/models/svm.hpp"
#include "distractnet/models/train.hpp"
#include "distractnet/spectral/features.hpp"

namespace distractnet {

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const EpochSet& train, std::uint64_t seed) = 0;
  virtual std::vector<int> predict(const EpochSet& epochs) = 0;
  /// Configuration and fitted state worth persisting next to a checkpoint.
  virtual nlohmann::json summary() const { return nlohmann::json::object(); }
};

struct ModelSpec {
  std::string name;
  std::function<std::unique_ptr<Classifier>()> make;
};

/// Per-class seeded split: round(fraction * count) epochs of every class go to
/// validation. Returns {train indices, validation indices}, both sorted.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(const EpochSet& set,
                                                                                        double fraction,
                                                                                        std::uint64_t seed) {
  detail::require(fraction >= 0.0 && fraction < 1.0, "validation fraction must be in [0, 1)");
  std::array<std::vector<std::size_t>, kNumConditions> by_class;
  for (std::size_t i = 0; i < set.n_epochs; ++i) by_class[static_cast<std::size_t>(set.class_of(i))].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> tr, va;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto nv = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(members.size())));
    va.insert(va.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(nv));
    tr.insert(tr.end(), members.begin() + static_cast<std::ptrdiff_t>(nv), members.end());
  }
  std::sort(tr.begin(), tr.end());
  std::sort(va.begin(), va.end());
  return {tr, va};
}

enum class Architecture { Hybrid, DeepConvNet };

class NeuralClassifier final : public Classifier {
 public:
  NeuralClassifier(Architecture arch, HybridConfig hybrid, DeepConvNetConfig deep, TrainConfig train,
                   double val_fraction = 0.1)
      : arch_(arch), hybrid_(std::move(hybrid)), deep_(deep), train_(train), val_fraction_(val_fraction) {}

  static std::unique_ptr<NeuralClassifier> hybrid(HybridConfig cfg, TrainConfig train, double val_fraction = 0.1) {
    return std::make_unique<NeuralClassifier>(Architecture::Hybrid, std::move(cfg), DeepConvNetConfig{}, train,
                                              val_fraction);
  }
  static std::unique_ptr<NeuralClassifier> deepconvnet(DeepConvNetConfig cfg, TrainConfig train,
                                                       double val_fraction = 0.1) {
    return std::make_unique<NeuralClassifier>(Architecture::DeepConvNet, HybridConfig{}, cfg, train, val_fraction);
  }

  void fit(const EpochSet& train_set, std::uint64_t seed) override {
    TrainConfig tc = train_;
    tc.seed = seed;
    auto [tr, va] = stratified_holdout(train_set, val_fraction_, seed);
    const EpochSet trs = train_set.subset(tr);
    const EpochSet vas = train_set.subset(va);
    if (tc.precision == Precision::F64)
      model_ = fit_as<double>(trs, vas, tc, seed);
    else
      model_ = fit_as<float>(trs, vas, tc, seed);
  }

  std::vector<int> predict(const EpochSet& epochs) override { return argmax_rows(predict_proba(epochs)); }

  Eigen::MatrixXd predict_proba(const EpochSet& epochs) {
    return std::visit(
        [&](auto& m) -> Eigen::MatrixXd {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>)
            throw std::logic_error("predict called before fit");
          else
            return distractnet::predict_proba(m, epochs);
        },
        model_);
  }

  nlohmann::json summary() const override {
    return std::visit(
        [](const auto& m) -> nlohmann::json {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>)
            return nlohmann::json::object();
          else
            return m.sidecar();
        },
        model_);
  }

  nlohmann::json model_config() const {
    return arch_ == Architecture::Hybrid ? nlohmann::json{{"architecture", "hybrid"}, {"hybrid", hybrid_.to_json()}}
                                         : nlohmann::json{{"architecture", "deepconvnet"}, {"deepconvnet", deep_.to_json()}};
  }

  template <typename T>
  TrainedModel<T>* trained() {
    return std::get_if<TrainedModel<T>>(&model_);
  }

 private:
  template <typename T>
  TrainedModel<T> fit_as(const EpochSet& trs, const EpochSet& vas, const TrainConfig& tc, std::uint64_t seed) {
    auto graph = arch_ == Architecture::Hybrid ? build_hybrid<T>(hybrid_, seed) : build_deepconvnet<T>(deep_, seed);
    return distractnet::train(std::move(graph), trs, vas, tc, model_config());
  }

  Architecture arch_;
  HybridConfig hybrid_;
  DeepConvNetConfig deep_;
  TrainConfig train_;
  double val_fraction_;
  std::variant<std::monostate, TrainedModel<float>, TrainedModel<double>> model_;
};

/// Log band-power features, z-scored with training statistics, into a linear SVM.
class PsdSvmClassifier final : public Classifier {
 public:
  explicit PsdSvmClassifier(SvmConfig svm = {}, WelchParams welch = {}) : svm_(svm), welch_(welch) {}

  void fit(const EpochSet& train_set, std::uint64_t seed) override {
    FeatureMatrix fm = psd_features(train_set, welch_);
    std::vector<std::size_t> rows(static_cast<std::size_t>(fm.n_rows()));
    std::iota(rows.begin(), rows.end(), 0);
    const auto stats = fit_zscore(fm.rows, rows);
    apply_zscore(fm, stats);
    SvmConfig cfg = svm_;
    cfg.seed = seed;
    model_ = train_svm(fm, cfg);
  }

  std::vector<int> predict(const EpochSet& epochs) override {
    detail::require(model_.has_value(), "predict called before fit");
    FeatureMatrix fm = psd_features(epochs, welch_);
    apply_zscore(fm, *model_->normalization);
    return predict_svm(*model_, fm);
  }

  nlohmann::json summary() const override {
    nlohmann::json j = {{"svm", svm_.to_json()}, {"welch", {{"seg_len", welch_.seg_len}, {"overlap", welch_.overlap}}}};
    if (model_) j["model"] = model_->to_json();
    return j;
  }

  const std::optional<SvmModel>& model() const { return model_; }

 private:
  SvmConfig svm_;
  WelchParams welch_;
  std::optional<SvmModel> model_;
};

/// Always predicts the most frequent training class (lowest index on ties).
class MajorityClassifier final : public Classifier {
 public:
  void fit(const EpochSet& train_set, std::uint64_t) override {
    const auto counts = train_set.class_counts();
    label_ = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  std::vector<int> predict(const EpochSet& epochs) override { return std::vector<int>(epochs.n_epochs, label_); }
  nlohmann::json summary() const override { return {{"label", label_}}; }

 private:
  int label_ = 0;
};

}  // namespace distractnet
