#pragma once

// Layer-granular reverse-mode differentiation. A Graph is an ordered list of
// nodes; every node reads earlier nodes only, so forward runs front to back
// and backward runs the reverse order accumulating input gradients.

#include <cstdint>
#include <json.hpp>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "distractnet/autodiff/tensor.hpp"

namespace distractnet::ad {

enum class Mode { Train, Eval };

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;  // false for batch-norm running statistics

  Param(std::string n, Shape s, bool train = true)
      : name(std::move(n)), value(s), grad(train ? s : Shape{0}), trainable(train) {}
};

/// Per-forward services an op may need.
struct OpContext {
  Mode mode = Mode::Eval;
  std::mt19937_64* rng = nullptr;
  bool freeze_random = false;  // reuse stochastic masks (gradient checking)
};

template <typename T>
class Op {
 public:
  virtual ~Op() = default;
  virtual std::string kind() const = 0;
  /// Output shape for the given input shape; throws InputError on mismatch or underflow.
  virtual Shape infer(const Shape& in) const = 0;
  virtual void forward(const Tensor<T>& in, Tensor<T>& out, const OpContext& ctx) = 0;
  /// Accumulates parameter gradients and, when `gin` is non-null, writes dL/d(in).
  virtual void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& gout,
                        Tensor<T>* gin) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
  virtual nlohmann::json describe() const { return {{"kind", kind()}}; }
  /// Discrete choices made in the last forward (e.g. pooling argmax).
  virtual void append_decisions(std::vector<std::int64_t>&) const {}
};

template <typename T>
struct Node {
  std::string name;
  std::string block;  // architectural grouping label, may be empty
  std::unique_ptr<Op<T>> op;
  int input = -1;     // -1 for the graph input
  Shape shape;        // output shape at batch size 1
};

template <typename T>
class Graph {
 public:
  explicit Graph(Shape input_shape_per_sample, std::uint64_t seed = 0)
      : input_shape_(std::move(input_shape_per_sample)), seed_(seed), rng_(seed) {
    Node<T> in;
    in.name = "input";
    in.shape = with_batch(input_shape_, 1);
    nodes_.push_back(std::move(in));
  }

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Appends `op` reading from node `input` (default: the last node).
  int add(std::string name, std::unique_ptr<Op<T>> op, std::string block = {}, int input = -2) {
    if (input == -2) input = static_cast<int>(nodes_.size()) - 1;
    if (input < 0 || input >= static_cast<int>(nodes_.size()))
      throw InputError("node '" + name + "' reads from a node that does not exist yet");
    Node<T> n;
    n.name = std::move(name);
    n.block = std::move(block);
    n.input = input;
    try {
      n.shape = op->infer(nodes_[static_cast<std::size_t>(input)].shape);
    } catch (const InputError& e) {
      throw InputError("node '" + n.name + "': " + e.what());
    }
    n.op = std::move(op);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  template <typename OpT, typename... Args>
  int emplace(std::string name, std::string block, Args&&... args) {
    return add(std::move(name), std::make_unique<OpT>(std::forward<Args>(args)...),
               std::move(block));
  }

  std::size_t size() const { return nodes_.size(); }
  const Node<T>& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<Node<T>>& nodes() const { return nodes_; }
  const Shape& input_shape() const { return input_shape_; }
  Shape output_shape() const { return nodes_.back().shape; }
  std::uint64_t seed() const { return seed_; }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    for (auto& n : nodes_)
      if (n.op)
        for (auto* p : n.op->params()) out.push_back(p);
    return out;
  }

  std::vector<Param<T>*> trainable_parameters() {
    std::vector<Param<T>*> out;
    for (auto* p : parameters())
      if (p->trainable) out.push_back(p);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : trainable_parameters()) n += p->value.size();
    return n;
  }

  void reseed(std::uint64_t seed) {
    seed_ = seed;
    rng_.seed(seed);
  }
  void set_freeze_random(bool v) { freeze_random_ = v; }
  void set_input_grad(bool v) { want_input_grad_ = v; }

  const Tensor<T>& forward(const Tensor<T>& input, Mode mode) {
    const Shape expect = with_batch(input_shape_, input.rank() ? input.dim(0) : 0);
    if (input.shape != expect)
      throw InputError("graph input shape " + shape_str(input.shape) + " does not match " +
                       shape_str(expect));
    acts_.resize(nodes_.size());
    acts_[0] = input;
    OpContext ctx{mode, &rng_, freeze_random_};
    for (std::size_t i = 1; i < nodes_.size(); ++i)
      nodes_[i].op->forward(acts_[static_cast<std::size_t>(nodes_[i].input)], acts_[i], ctx);
    last_mode_ = mode;
    has_forward_ = true;
    return acts_.back();
  }

  /// Reverse sweep seeded with dL/d(output).
  void backward(const Tensor<T>& output_grad) {
    backward_from(static_cast<int>(nodes_.size()) - 1, output_grad);
  }

  /// Reverse sweep seeded at an arbitrary node (e.g. the logits feeding a softmax).
  void backward_from(int node_id, const Tensor<T>& grad) {
    if (!has_forward_ || last_mode_ != Mode::Train)
      throw std::logic_error("backward requires a preceding forward pass in train mode");
    const auto start = static_cast<std::size_t>(node_id);
    if (grad.shape != acts_.at(start).shape)
      throw InputError("seed gradient shape " + shape_str(grad.shape) + " does not match node " +
                       shape_str(acts_[start].shape));
    for (auto* p : trainable_parameters()) p->grad.zero();
    grads_.resize(nodes_.size());
    std::vector<bool> live(nodes_.size(), false);
    grads_[start] = grad;
    live[start] = true;
    for (std::size_t i = start; i >= 1; --i) {
      if (!live[i]) continue;
      const auto src = static_cast<std::size_t>(nodes_[i].input);
      Tensor<T>* gin = nullptr;
      bool accumulate = false;
      if (src > 0 || want_input_grad_) {
        // Ops overwrite gin; a node read by several consumers accumulates via scratch.
        accumulate = live[src];
        if (accumulate) {
          scratch_.resize(acts_[src].shape);
          gin = &scratch_;
        } else {
          grads_[src].resize(acts_[src].shape);
          gin = &grads_[src];
          live[src] = true;
        }
      }
      nodes_[i].op->backward(acts_[src], acts_[i], grads_[i], gin);
      if (accumulate) {
        auto& acc = grads_[src].values;
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += scratch_.values[k];
      }
    }
    input_grad_valid_ = want_input_grad_;
  }

  const Tensor<T>& activation(std::size_t i) const { return acts_.at(i); }
  const Tensor<T>& input_grad() const {
    if (!input_grad_valid_) throw std::logic_error("input gradient was not requested");
    return grads_.at(0);
  }

  std::vector<std::int64_t> decisions() const {
    std::vector<std::int64_t> d;
    for (const auto& n : nodes_)
      if (n.op) n.op->append_decisions(d);
    return d;
  }

  nlohmann::json describe() const {
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      nlohmann::json j = n.op ? n.op->describe() : nlohmann::json{{"kind", "Input"}};
      j["name"] = n.name;
      j["block"] = n.block;
      j["input"] = n.input;
      j["shape"] = n.shape;
      arr.push_back(std::move(j));
    }
    return arr;
  }

  static Shape with_batch(const Shape& per_sample, std::size_t batch) {
    Shape s{batch};
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    return s;
  }

 private:
  Shape input_shape_;
  std::vector<Node<T>> nodes_;
  std::vector<Tensor<T>> acts_;
  std::vector<Tensor<T>> grads_;
  Tensor<T> scratch_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  bool freeze_random_ = false;
  bool want_input_grad_ = false;
  bool has_forward_ = false;
  bool input_grad_valid_ = false;
  Mode last_mode_ = Mode::Eval;
};

}  // namespace distractnet::ad
