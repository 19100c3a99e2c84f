#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "distractnet/autodiff/adam.hpp"
#include "distractnet/autodiff/checkpoint.hpp"
#include "distractnet/autodiff/gradcheck.hpp"
#include "distractnet/autodiff/layers.hpp"
#include "distractnet/autodiff/loss.hpp"
#include "distractnet/autodiff/lstm.hpp"

using namespace distractnet;
using namespace distractnet::ad;

namespace {

Tensor<double> random_tensor(const Shape& s, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Tensor<double> t(s);
  for (auto& v : t.values) v = scale * n01(rng);
  return t;
}

void expect_gradients(Graph<double>& g, const Tensor<double>& x, double tol = 1e-6, std::size_t sample = 200) {
  GradCheckOptions opt;
  opt.include_input = true;
  opt.sample = sample;
  opt.seed = 5;
  const auto r = gradient_check(g, x, 1e-6, opt);
  EXPECT_GT(r.checked, 0u);
  EXPECT_LT(r.max_relative_error, tol) << "checked " << r.checked << ", skipped " << r.skipped;
}

}  // namespace

TEST(Tensor, ShapeAndCount) {
  Tensor<double> t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(shape_str(t.shape), "[2x3x4]");
  EXPECT_THROW(Tensor<double>({2, 2}, std::vector<double>(3)), InputError);
  EXPECT_TRUE(t.all_finite());
  t[3] = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(t.all_finite());
}

TEST(GradCheck, ConvolutionValidSameAndStrided) {
  std::mt19937_64 rng(1);
  for (auto [pad, sh, sw] : {std::tuple{false, 1, 1}, std::tuple{true, 1, 1}, std::tuple{false, 2, 1}}) {
    Graph<double> g({2, 6, 7});
    Conv2dSpec spec{2, 3, 3, 2, static_cast<std::size_t>(sh), static_cast<std::size_t>(sw),
                    pad ? Padding::same(3, 2) : Padding::valid(), true};
    g.emplace<Conv2d<double>>("conv", "", spec, rng);
    expect_gradients(g, random_tensor(Graph<double>::with_batch({2, 6, 7}, 2), 2));
  }
}

TEST(GradCheck, ConvolutionOutputShapes) {
  std::mt19937_64 rng(1);
  Conv2d<double> same({1, 4, 5, 1, 1, 1, Padding::same(5, 1), false}, rng);
  EXPECT_EQ(same.infer({3, 1, 30, 25}), (Shape{3, 4, 30, 25}));
  Conv2d<double> valid({1, 4, 1, 5, 1, 1, Padding::valid(), true}, rng);
  EXPECT_EQ(valid.infer({3, 1, 30, 100}), (Shape{3, 4, 30, 96}));
  EXPECT_THROW(valid.infer({3, 2, 30, 100}), InputError);
}

TEST(GradCheck, BatchNormRank2And4) {
  {
    Graph<double> g({4});
    g.emplace<BatchNorm<double>>("bn", "", 4);
    expect_gradients(g, random_tensor({6, 4}, 3, 2.0));
  }
  {
    Graph<double> g({3, 2, 5});
    g.emplace<BatchNorm<double>>("bn", "", 3);
    expect_gradients(g, random_tensor({4, 3, 2, 5}, 4, 2.0));
  }
}

TEST(GradCheck, EluDenseFlattenSoftmax) {
  std::mt19937_64 rng(2);
  Graph<double> g({2, 3, 4});
  g.emplace<Elu<double>>("elu", "");
  g.emplace<Flatten<double>>("flat", "");
  g.emplace<Dense<double>>("fc", "", 24, 5, rng);
  g.emplace<Softmax<double>>("softmax", "");
  expect_gradients(g, random_tensor({3, 2, 3, 4}, 6));
}

TEST(GradCheck, CrossEntropyThroughSoftmax) {
  std::mt19937_64 rng(2);
  Graph<double> g({6});
  g.emplace<Dense<double>>("fc", "", 6, 3, rng);
  g.emplace<Softmax<double>>("softmax", "");
  GradCheckOptions opt;
  opt.targets = {0, 2, 1, 2};
  opt.include_input = true;
  const auto r = gradient_check(g, random_tensor({4, 6}, 7), 1e-6, opt);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(GradCheck, MaxAndAveragePooling) {
  for (auto kind : {PoolKind::Max, PoolKind::Average}) {
    Graph<double> g({2, 4, 6});
    g.emplace<Pool2d<double>>("pool", "", kind, 2, 3);
    expect_gradients(g, random_tensor({2, 2, 4, 6}, 8));
    EXPECT_EQ(g.output_shape(), (Shape{1, 2, 2, 2}));
  }
}

TEST(GradCheck, MaxPoolTiesAreSkippedNotMiscounted) {
  Graph<double> g({1, 1, 4});
  g.emplace<Pool2d<double>>("pool", "", PoolKind::Max, 1, 2);
  Tensor<double> x({1, 1, 1, 4}, std::vector<double>{1.0, 1.0 + 1e-9, -2.0, 3.0});
  GradCheckOptions opt;
  opt.include_input = true;
  const auto r = gradient_check(g, x, 1e-6, opt);
  EXPECT_GE(r.skipped, 1u);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(GradCheck, SequenceAndLstm) {
  std::mt19937_64 rng(3);
  Graph<double> g({2, 3, 5});
  g.emplace<ToSequence<double>>("seq", "");
  g.emplace<Lstm<double>>("lstm1", "", 6, 4, false, rng);
  g.emplace<Lstm<double>>("lstm2", "", 4, 3, true, rng);
  EXPECT_EQ(g.node(1).shape, (Shape{1, 5, 6}));
  EXPECT_EQ(g.node(2).shape, (Shape{1, 5, 4}));
  EXPECT_EQ(g.node(3).shape, (Shape{1, 3}));
  expect_gradients(g, random_tensor({2, 2, 3, 5}, 9), 1e-5, 300);
}

TEST(GradCheck, DropoutWithFrozenMask) {
  std::mt19937_64 rng(4);
  Graph<double> g({8}, 11);
  g.emplace<Dense<double>>("fc", "", 8, 8, rng);
  g.emplace<Dropout<double>>("drop", "", 0.5);
  g.emplace<Dense<double>>("fc2", "", 8, 2, rng);
  expect_gradients(g, random_tensor({3, 8}, 10));
}

TEST(Layers, SoftmaxRowsAreDistributionsAndShiftInvariant) {
  Graph<double> g({5});
  g.emplace<Softmax<double>>("softmax", "");
  auto x = random_tensor({7, 5}, 12, 4.0);
  const auto p = g.forward(x, Mode::Eval);
  for (std::size_t r = 0; r < 7; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_GE(p[r * 5 + c], 0.0);
      sum += p[r * 5 + c];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  for (double shift : {-300.0, 17.5, 800.0}) {
    auto y = x;
    for (auto& v : y.values) v += shift;
    const auto q = g.forward(y, Mode::Eval);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(q[i], p[i], 1e-9);
  }
}

TEST(Layers, BatchNormNormalisesInTrainMode) {
  Graph<double> g({3, 2, 4});
  g.emplace<BatchNorm<double>>("bn", "", 3);
  auto x = random_tensor({16, 3, 2, 4}, 13, 10.0);
  for (auto& v : x.values) v += 5.0;
  const auto y = g.forward(x, Mode::Train);
  for (std::size_t f = 0; f < 3; ++f) {
    double mean = 0.0, var = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < 16; ++s)
      for (std::size_t k = 0; k < 8; ++k, ++n) mean += y[(s * 3 + f) * 8 + k];
    mean /= static_cast<double>(n);
    for (std::size_t s = 0; s < 16; ++s)
      for (std::size_t k = 0; k < 8; ++k) var += std::pow(y[(s * 3 + f) * 8 + k] - mean, 2);
    var /= static_cast<double>(n);
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-5);
  }
}

TEST(Layers, BatchNormEvalUsesRunningStatistics) {
  Graph<double> g({2});
  g.emplace<BatchNorm<double>>("bn", "", 2);
  // Fresh running stats (mean 0, var 1) make eval nearly the identity.
  auto x = random_tensor({4, 2}, 14);
  const auto y = g.forward(x, Mode::Eval);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i] / std::sqrt(1.0 + 1e-5), 1e-12);
}

TEST(Layers, EluIsContinuouslyDifferentiableAtZero) {
  Graph<double> g({1});
  g.emplace<Elu<double>>("elu", "");
  const double h = 1e-7;
  Tensor<double> x({3, 1}, std::vector<double>{-h, 0.0, h});
  const auto y = g.forward(x, Mode::Train);
  EXPECT_NEAR((y[2] - y[1]) / h, 1.0, 1e-6);
  EXPECT_NEAR((y[1] - y[0]) / h, 1.0, 1e-6);
  g.backward(Tensor<double>({3, 1}, 1.0));
  g.set_input_grad(true);
  g.forward(Tensor<double>({2, 1}, std::vector<double>{-1e-300, 0.0}), Mode::Train);
  g.backward(Tensor<double>({2, 1}, 1.0));
  EXPECT_NEAR(g.input_grad()[0], 1.0, 1e-9);
  EXPECT_NEAR(g.input_grad()[1], 1.0, 1e-9);
}

TEST(Layers, DropoutIsIdentityInEvalAndScalesInTrain) {
  Graph<double> g({1000}, 3);
  g.emplace<Dropout<double>>("drop", "", 0.25);
  Tensor<double> x({1, 1000}, 1.0);
  const auto e = g.forward(x, Mode::Eval);
  EXPECT_EQ(e.values, x.values);
  const auto t = g.forward(x, Mode::Train);
  std::size_t zeros = 0;
  for (double v : t.values) {
    if (v == 0.0)
      ++zeros;
    else
      EXPECT_NEAR(v, 1.0 / 0.75, 1e-12);
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 1000.0, 0.25, 0.05);
  EXPECT_THROW(Dropout<double>(1.0), InputError);
}

TEST(Layers, ForwardIsDeterministic) {
  auto build = [] {
    std::mt19937_64 rng(9);
    Graph<float> g({1, 4, 10});
    g.emplace<Conv2d<float>>("conv", "", Conv2dSpec{1, 3, 1, 3, 1, 1, Padding::valid(), true}, rng);
    g.emplace<BatchNorm<float>>("bn", "", 3);
    g.emplace<Elu<float>>("elu", "");
    g.emplace<ToSequence<float>>("seq", "");
    g.emplace<Lstm<float>>("lstm", "", 12, 5, true, rng);
    g.emplace<Dense<float>>("fc", "", 5, 3, rng);
    g.emplace<Softmax<float>>("softmax", "");
    return g;
  };
  auto g1 = build(), g2 = build();
  const auto x = random_tensor({4, 1, 4, 10}, 15).cast<float>();
  const auto a = g1.forward(x, Mode::Eval).values;
  EXPECT_EQ(g1.forward(x, Mode::Eval).values, a);
  EXPECT_EQ(g2.forward(x, Mode::Eval).values, a);
}

TEST(Layers, GraphRejectsShapeMismatches) {
  std::mt19937_64 rng(1);
  Graph<double> g({4});
  EXPECT_THROW(g.emplace<Dense<double>>("fc", "", 5, 2, rng), InputError);
  g.emplace<Dense<double>>("fc", "", 4, 2, rng);
  EXPECT_THROW(g.forward(Tensor<double>({3, 5}), Mode::Eval), InputError);
  EXPECT_THROW(g.emplace<Pool2d<double>>("pool", "", PoolKind::Max, 2, 2), InputError);
}

TEST(Loss, CrossEntropyMatchesDefinition) {
  Tensor<double> p({2, 3}, std::vector<double>{0.2, 0.5, 0.3, 0.1, 0.1, 0.8});
  EXPECT_NEAR(cross_entropy(p, {1, 2}), -(std::log(0.5) + std::log(0.8)) / 2.0, 1e-12);
  const auto g = softmax_cross_entropy_grad(p, {1, 2});
  EXPECT_NEAR(g[0], 0.2 / 2.0, 1e-12);
  EXPECT_NEAR(g[1], (0.5 - 1.0) / 2.0, 1e-12);
  EXPECT_NEAR(g[5], (0.8 - 1.0) / 2.0, 1e-12);
}

TEST(Adam, FirstStepMovesBySignedLearningRate) {
  Param<double> p("w", {3});
  p.value.values = {1.0, -2.0, 0.5};
  p.grad.values = {0.3, -4.0, 0.0};
  Adam<double> opt({&p}, AdamConfig{0.01});
  opt.step();
  EXPECT_NEAR(p.value[0], 1.0 - 0.01 * 0.3 / (0.3 + 1e-8), 1e-12);
  EXPECT_NEAR(p.value[1], -2.0 + 0.01 * 4.0 / (4.0 + 1e-8), 1e-12);
  EXPECT_EQ(p.value[2], 0.5);
}

TEST(Adam, MinimisesQuadraticAndZeroRateIsInert) {
  Param<double> p("w", {2});
  p.value.values = {3.0, -1.0};
  Adam<double> opt({&p}, AdamConfig{0.05});
  for (int i = 0; i < 2000; ++i) {
    p.grad[0] = 2.0 * (p.value[0] - 1.0);
    p.grad[1] = 2.0 * (p.value[1] + 2.0);
    opt.step();
  }
  EXPECT_NEAR(p.value[0], 1.0, 1e-3);
  EXPECT_NEAR(p.value[1], -2.0, 1e-3);

  Param<double> q("w", {2});
  q.value.values = {3.0, -1.0};
  Adam<double> frozen({&q}, AdamConfig{0.0});
  q.grad.values = {1.0, 1.0};
  frozen.step();
  EXPECT_EQ(q.value.values, (Tensor<double>::Storage{3.0, -1.0}));
}

TEST(Checkpoint, RoundTripAndStructureCheck) {
  const auto dir = std::filesystem::temp_directory_path() / "distractnet_ckpt_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto build = [](std::uint64_t seed, std::size_t hidden) {
    std::mt19937_64 rng(seed);
    Graph<float> g({4});
    g.emplace<Dense<float>>("fc", "", 4, hidden, rng);
    g.emplace<BatchNorm<float>>("bn", "", hidden);
    return g;
  };
  auto a = build(1, 3), b = build(2, 3), c = build(3, 5);
  save_checkpoint(dir / "model", a);
  load_checkpoint(dir / "model", b);
  auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value.values, pb[i]->value.values);
  EXPECT_THROW(load_checkpoint(dir / "model", c), InputError);
  std::filesystem::remove_all(dir);
}
