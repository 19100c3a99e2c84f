#pragma once

// Deep convolutional baseline: a temporal then spatial convolution, three
// further conv-pool blocks, dropout and a dense softmax classifier.
//
// Blocks 2-4 pad their 1x10 convolutions to keep the time extent; with valid
// padding a 100-sample window shrinks below the kernel width before block 4.

#include <array>
#include <cstdint>
#include <json.hpp>
#include <random>
#include <string>

#include "distractnet/autodiff/graph.hpp"
#include "distractnet/autodiff/layers.hpp"

namespace distractnet {

struct DeepConvNetConfig {
  std::size_t channels = 30;
  std::size_t samples = 100;
  std::size_t temporal_maps = 25;
  std::size_t kernel_w = 10;
  std::array<std::size_t, 3> block_maps{50, 100, 200};
  std::size_t pool_w = 3;
  double dropout = 0.5;
  std::size_t classes = 3;
  bool same_padding = true;  // blocks 2-4

  void validate() const {
    detail::require(channels >= 1 && samples >= kernel_w, "input window is shorter than the kernel");
    detail::require(temporal_maps >= 1 && pool_w >= 1 && kernel_w >= 1, "sizes must be positive");
    detail::require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
    detail::require(classes >= 2, "need at least two classes");
  }

  nlohmann::json to_json() const {
    return {{"channels", channels}, {"samples", samples}, {"temporal_maps", temporal_maps},
            {"kernel_w", kernel_w}, {"block_maps", block_maps}, {"pool_w", pool_w},
            {"dropout", dropout}, {"classes", classes}, {"same_padding", same_padding}};
  }
};

template <typename T>
ad::Graph<T> build_deepconvnet(const DeepConvNetConfig& cfg, std::uint64_t seed) {
  using namespace ad;
  cfg.validate();
  Graph<T> g(Shape{1, cfg.channels, cfg.samples}, seed);
  std::mt19937_64 rng(seed);

  g.template emplace<Conv2d<T>>("block1.temporal", "block1",
                                Conv2dSpec{1, cfg.temporal_maps, 1, cfg.kernel_w, 1, 1, Padding::valid(), false}, rng);
  g.template emplace<Conv2d<T>>(
      "block1.spatial", "block1",
      Conv2dSpec{cfg.temporal_maps, cfg.temporal_maps, cfg.channels, 1, 1, 1, Padding::valid(), false}, rng);
  g.template emplace<BatchNorm<T>>("block1.bn", "block1", cfg.temporal_maps);
  g.template emplace<Elu<T>>("block1.elu", "block1");
  g.template emplace<Pool2d<T>>("block1.maxpool", "block1", PoolKind::Max, std::size_t{1}, cfg.pool_w);

  std::size_t maps = cfg.temporal_maps;
  for (std::size_t i = 0; i < cfg.block_maps.size(); ++i) {
    const std::string block = "block" + std::to_string(i + 2);
    const Padding pad = cfg.same_padding ? Padding::same(1, cfg.kernel_w) : Padding::valid();
    g.template emplace<Conv2d<T>>(block + ".conv", block,
                                  Conv2dSpec{maps, cfg.block_maps[i], 1, cfg.kernel_w, 1, 1, pad, false}, rng);
    maps = cfg.block_maps[i];
    g.template emplace<BatchNorm<T>>(block + ".bn", block, maps);
    g.template emplace<Elu<T>>(block + ".elu", block);
    g.template emplace<Pool2d<T>>(block + ".maxpool", block, PoolKind::Max, std::size_t{1}, cfg.pool_w);
  }

  g.template emplace<Flatten<T>>("flatten", "classifier");
  const std::size_t features = numel(g.output_shape());
  if (cfg.dropout > 0.0) g.template emplace<Dropout<T>>("dropout", "classifier", cfg.dropout);
  g.template emplace<Dense<T>>("dense", "classifier", features, cfg.classes, rng);
  g.template emplace<Softmax<T>>("softmax", "classifier");
  return g;
}

}  // namespace distractnet
