#pragma once

// Hybrid convolutional-recurrent classifier: five convolutional blocks feed a
// two-layer LSTM, followed by three fully connected layers and a softmax.
//
// Input [N, 1, channels, samples]. Blocks 1-3 convolve along time (1x5),
// blocks 4-5 across channels (5x1, 3x1); all convolutions use stride 1 and
// valid padding. Each block ends with one batch-norm layer; every conv layer
// is followed by ELU.

#include <array>
#include <cstdint>
#include <json.hpp>
#include <random>
#include <string>
#include <vector>

#include "distractnet/autodiff/graph.hpp"
#include "distractnet/autodiff/layers.hpp"
#include "distractnet/autodiff/lstm.hpp"

namespace distractnet {

struct ConvBlockConfig {
  std::size_t maps = 16;
  std::size_t layers = 2;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 5;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  enum class Pool { None, Max, AverageChannels } pool = Pool::None;
  std::size_t pool_h = 1;  // Max only
  std::size_t pool_w = 1;
};

struct HybridConfig {
  std::size_t channels = 30;
  std::size_t samples = 100;
  std::vector<ConvBlockConfig> blocks{
      {16, 2, 1, 5, 1, 1, ConvBlockConfig::Pool::Max, 1, 2},
      {32, 2, 1, 5, 1, 1, ConvBlockConfig::Pool::Max, 1, 2},
      {64, 2, 1, 5, 1, 1, ConvBlockConfig::Pool::Max, 1, 2},
      {64, 3, 5, 1, 1, 1, ConvBlockConfig::Pool::None, 1, 1},
      {128, 3, 3, 1, 1, 1, ConvBlockConfig::Pool::AverageChannels, 1, 1},
  };
  std::vector<std::size_t> lstm_hidden{256, 128};
  std::vector<std::size_t> fc_hidden{128, 64};
  std::size_t classes = 3;
  double dropout = 0.0;  // before the fully connected layers

  /// Same topology with the number of feature maps of every block scaled down.
  HybridConfig with_maps(const std::array<std::size_t, 5>& maps) const {
    HybridConfig c = *this;
    for (std::size_t i = 0; i < 5 && i < c.blocks.size(); ++i) c.blocks[i].maps = maps[i];
    return c;
  }

  void validate() const {
    detail::require(blocks.size() == 5, "hybrid model needs exactly five convolutional blocks");
    static constexpr std::array<std::size_t, 5> kLayers{2, 2, 2, 3, 3};
    static constexpr std::array<std::array<std::size_t, 2>, 5> kKernels{
        {{1, 5}, {1, 5}, {1, 5}, {5, 1}, {3, 1}}};
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& b = blocks[i];
      const std::string tag = "conv block " + std::to_string(i + 1);
      detail::require(b.layers == kLayers[i], tag + " has the wrong number of layers");
      detail::require(b.kernel_h == kKernels[i][0] && b.kernel_w == kKernels[i][1],
                      tag + " has the wrong kernel");
      detail::require(b.stride_h == 1 && b.stride_w == 1, tag + " must use stride 1x1");
      detail::require(b.maps >= 1, tag + " needs at least one feature map");
    }
    detail::require(lstm_hidden.size() == 2, "hybrid model needs exactly two LSTM layers");
    detail::require(fc_hidden.size() == 2, "hybrid model needs exactly three fully connected layers");
    detail::require(classes >= 2, "need at least two classes");
    detail::require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
  }

  nlohmann::json to_json() const {
    auto bl = nlohmann::json::array();
    for (const auto& b : blocks)
      bl.push_back({{"maps", b.maps},
                    {"layers", b.layers},
                    {"kernel", {b.kernel_h, b.kernel_w}},
                    {"stride", {b.stride_h, b.stride_w}},
                    {"pool", b.pool == ConvBlockConfig::Pool::Max
                                 ? "max"
                                 : (b.pool == ConvBlockConfig::Pool::None ? "none" : "avg-channels")},
                    {"pool_size", {b.pool_h, b.pool_w}}});
    return {{"channels", channels}, {"samples", samples}, {"blocks", bl},
            {"lstm_hidden", lstm_hidden}, {"fc_hidden", fc_hidden},
            {"classes", classes}, {"dropout", dropout}};
  }
};

template <typename T>
ad::Graph<T> build_hybrid(const HybridConfig& cfg, std::uint64_t seed) {
  using namespace ad;
  cfg.validate();
  Graph<T> g(Shape{1, cfg.channels, cfg.samples}, seed);
  std::mt19937_64 rng(seed);

  std::size_t maps = 1;
  for (std::size_t bi = 0; bi < cfg.blocks.size(); ++bi) {
    const auto& b = cfg.blocks[bi];
    const std::string block = "conv" + std::to_string(bi + 1);
    for (std::size_t l = 0; l < b.layers; ++l) {
      const bool last = l + 1 == b.layers;
      Conv2dSpec cs{maps, b.maps, b.kernel_h, b.kernel_w, b.stride_h, b.stride_w,
                    Padding::valid(), !last};  // bias is redundant before batch-norm
      g.template emplace<Conv2d<T>>(block + ".conv" + std::to_string(l + 1), block, cs, rng);
      maps = b.maps;
      if (last) g.template emplace<BatchNorm<T>>(block + ".bn", block, maps);
      g.template emplace<Elu<T>>(block + ".elu" + std::to_string(l + 1), block);
    }
    if (b.pool == ConvBlockConfig::Pool::Max) {
      g.template emplace<Pool2d<T>>(block + ".maxpool", block, PoolKind::Max, b.pool_h, b.pool_w);
    } else if (b.pool == ConvBlockConfig::Pool::AverageChannels) {
      const std::size_t rows = g.output_shape()[2];
      g.template emplace<Pool2d<T>>(block + ".avgpool", block, PoolKind::Average, rows, std::size_t{1});
    }
  }

  g.template emplace<ToSequence<T>>("to_sequence", "lstm");
  std::size_t features = g.output_shape()[2];
  for (std::size_t i = 0; i < cfg.lstm_hidden.size(); ++i) {
    const bool last = i + 1 == cfg.lstm_hidden.size();
    g.template emplace<Lstm<T>>("lstm" + std::to_string(i + 1), "lstm", features, cfg.lstm_hidden[i],
                                last, rng);
    features = cfg.lstm_hidden[i];
  }

  if (cfg.dropout > 0.0) g.template emplace<Dropout<T>>("dropout", "classifier", cfg.dropout);
  for (std::size_t i = 0; i < cfg.fc_hidden.size(); ++i) {
    g.template emplace<Dense<T>>("fc" + std::to_string(i + 1), "classifier", features, cfg.fc_hidden[i], rng);
    g.template emplace<Elu<T>>("fc" + std::to_string(i + 1) + ".elu", "classifier");
    features = cfg.fc_hidden[i];
  }
  g.template emplace<Dense<T>>("fc" + std::to_string(cfg.fc_hidden.size() + 1), "classifier", features,
                               cfg.classes, rng);
  g.template emplace<Softmax<T>>("softmax", "classifier");
  return g;
}

}  // namespace distractnet
