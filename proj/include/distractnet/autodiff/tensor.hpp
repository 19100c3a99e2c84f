#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "distractnet/error.hpp"

namespace distractnet::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

/// Dense row-major tensor. The leading dimension is the batch.
///
/// Storage is aligned so Eigen's vectorized kernels take the same path, and
/// round the same way, wherever the buffer lands on the heap.
template <typename T>
struct Tensor {
  using Storage = std::vector<T, Eigen::aligned_allocator<T>>;
  Shape shape;
  Storage values;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), values(numel(shape), fill) {}
  Tensor(Shape s, const std::vector<T>& v) : shape(std::move(s)), values(v.begin(), v.end()) {
    distractnet::detail::require(values.size() == numel(shape), "tensor value count does not match shape");
  }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  T* data() { return values.data(); }
  const T* data() const { return values.data(); }
  T& operator[](std::size_t i) { return values[i]; }
  const T& operator[](std::size_t i) const { return values[i]; }

  void resize(const Shape& s) {
    shape = s;
    values.resize(numel(s));
  }
  void zero() { std::fill(values.begin(), values.end(), T(0)); }

  bool all_finite() const {
    return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.values.assign(values.begin(), values.end());
    return out;
  }
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

}  // namespace distractnet::ad
