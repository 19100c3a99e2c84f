#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "distractnet/autodiff/graph.hpp"

namespace distractnet::ad {

namespace detail {

inline void expect_rank(const Shape& s, std::size_t r, const char* op) {
  if (s.size() != r)
    throw InputError(std::string(op) + " expects a rank-" + std::to_string(r) + " input, got " +
                     shape_str(s));
}

template <typename T>
void glorot_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : w.values) v = static_cast<T>(dist(rng));
}

}  // namespace detail

struct Padding {
  std::size_t top = 0, bottom = 0, left = 0, right = 0;

  static Padding valid() { return {}; }
  /// Output extent equals input extent at stride 1; odd leftovers go bottom/right.
  static Padding same(std::size_t kh, std::size_t kw) {
    return {(kh - 1) / 2, kh - 1 - (kh - 1) / 2, (kw - 1) / 2, kw - 1 - (kw - 1) / 2};
  }
  bool operator==(const Padding&) const = default;
};

struct Conv2dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  Padding padding;
  bool bias = true;
};

/// 2-D cross-correlation over [N, C, H, W] via im2col and a GEMM per sample.
template <typename T>
class Conv2d final : public Op<T> {
 public:
  Conv2d(const Conv2dSpec& spec, std::mt19937_64& rng)
      : spec_(spec),
        weight_("weight", {spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w}),
        bias_("bias", {spec.bias ? spec.out_channels : 0}) {
    distractnet::detail::require(spec.kernel_h >= 1 && spec.kernel_w >= 1, "kernel must be at least 1x1");
    distractnet::detail::require(spec.stride_h >= 1 && spec.stride_w >= 1, "stride must be at least 1");
    const std::size_t area = spec.kernel_h * spec.kernel_w;
    detail::glorot_uniform(weight_.value, spec.in_channels * area, spec.out_channels * area, rng);
  }

  const Conv2dSpec& spec() const { return spec_; }
  std::string kind() const override { return "Conv2d"; }

  Shape infer(const Shape& in) const override {
    detail::expect_rank(in, 4, "Conv2d");
    if (in[1] != spec_.in_channels)
      throw InputError("Conv2d expects " + std::to_string(spec_.in_channels) +
                       " input maps, got " + std::to_string(in[1]));
    const std::size_t ph = in[2] + spec_.padding.top + spec_.padding.bottom;
    const std::size_t pw = in[3] + spec_.padding.left + spec_.padding.right;
    if (ph < spec_.kernel_h || pw < spec_.kernel_w)
      throw InputError("Conv2d kernel " + std::to_string(spec_.kernel_h) + "x" +
                       std::to_string(spec_.kernel_w) + " exceeds the remaining extent " +
                       shape_str(in));
    return {in[0], spec_.out_channels, (ph - spec_.kernel_h) / spec_.stride_h + 1,
            (pw - spec_.kernel_w) / spec_.stride_w + 1};
  }

  void forward(const Tensor<T>& in, Tensor<T>& out, const OpContext&) override {
    const Shape os = infer(in.shape);
    out.resize(os);
    const std::size_t n = in.dim(0), k = patch(), p = os[2] * os[3];
    const std::size_t in_stride = in.size() / std::max<std::size_t>(n, 1);
    cols_.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
    ConstMatMap<T> w(weight_.value.data(), static_cast<Eigen::Index>(spec_.out_channels),
                     static_cast<Eigen::Index>(k));
    for (std::size_t s = 0; s < n; ++s) {
      im2col(in.data() + s * in_stride, in.shape, os);
      MatMap<T> y(out.data() + s * spec_.out_channels * p,
                  static_cast<Eigen::Index>(spec_.out_channels), static_cast<Eigen::Index>(p));
      y.noalias() = w * cols_;
      if (spec_.bias)
        for (std::size_t c = 0; c < spec_.out_channels; ++c)
          y.row(static_cast<Eigen::Index>(c)).array() += bias_.value[c];
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& gout,
                Tensor<T>* gin) override {
    const Shape& os = out.shape;
    const std::size_t n = in.dim(0), k = patch(), p = os[2] * os[3];
    const std::size_t in_stride = in.size() / std::max<std::size_t>(n, 1);
    const auto co = static_cast<Eigen::Index>(spec_.out_channels);
    cols_.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
    ConstMatMap<T> w(weight_.value.data(), co, static_cast<Eigen::Index>(k));
    MatMap<T> gw(weight_.grad.data(), co, static_cast<Eigen::Index>(k));
    if (gin) {
      gin->resize(in.shape);
      gin->zero();
    }
    for (std::size_t s = 0; s < n; ++s) {
      ConstMatMap<T> g(gout.data() + s * spec_.out_channels * p, co, static_cast<Eigen::Index>(p));
      im2col(in.data() + s * in_stride, in.shape, os);
      gw.noalias() += g * cols_.transpose();
      if (spec_.bias)
        for (std::size_t c = 0; c < spec_.out_channels; ++c)
          bias_.grad[c] += g.row(static_cast<Eigen::Index>(c)).sum();
      if (gin) {
        cols_.noalias() = w.transpose() * g;
        col2im(gin->data() + s * in_stride, in.shape, os);
      }
    }
  }

  std::vector<Param<T>*> params() override {
    if (spec_.bias) return {&weight_, &bias_};
    return {&weight_};
  }

  nlohmann::json describe() const override {
    return {{"kind", kind()},
            {"in_channels", spec_.in_channels},
            {"out_channels", spec_.out_channels},
            {"kernel", {spec_.kernel_h, spec_.kernel_w}},
            {"stride", {spec_.stride_h, spec_.stride_w}},
            {"padding",
             {spec_.padding.top, spec_.padding.bottom, spec_.padding.left, spec_.padding.right}},
            {"bias", spec_.bias}};
  }

 private:
  std::size_t patch() const { return spec_.in_channels * spec_.kernel_h * spec_.kernel_w; }

  template <typename F>
  void for_each_tap(const Shape& is, const Shape& os, F&& f) const {
    const std::size_t h = is[2], wd = is[3], oh = os[2], ow = os[3];
    for (std::size_t ci = 0; ci < spec_.in_channels; ++ci)
      for (std::size_t a = 0; a < spec_.kernel_h; ++a)
        for (std::size_t b = 0; b < spec_.kernel_w; ++b) {
          const std::size_t row = (ci * spec_.kernel_h + a) * spec_.kernel_w + b;
          for (std::size_t y = 0; y < oh; ++y) {
            const auto iy = static_cast<std::ptrdiff_t>(y * spec_.stride_h + a) -
                            static_cast<std::ptrdiff_t>(spec_.padding.top);
            const bool row_ok = iy >= 0 && iy < static_cast<std::ptrdiff_t>(h);
            for (std::size_t x = 0; x < ow; ++x) {
              const auto ix = static_cast<std::ptrdiff_t>(x * spec_.stride_w + b) -
                              static_cast<std::ptrdiff_t>(spec_.padding.left);
              const bool ok = row_ok && ix >= 0 && ix < static_cast<std::ptrdiff_t>(wd);
              const std::size_t src =
                  ok ? (ci * h + static_cast<std::size_t>(iy)) * wd + static_cast<std::size_t>(ix) : 0;
              f(row, y * ow + x, ok, src);
            }
          }
        }
  }

  void im2col(const T* src, const Shape& is, const Shape& os) {
    T* c = cols_.data();
    const std::size_t p = os[2] * os[3];
    for_each_tap(is, os, [&](std::size_t row, std::size_t col, bool ok, std::size_t idx) {
      c[row * p + col] = ok ? src[idx] : T(0);
    });
  }

  void col2im(T* dst, const Shape& is, const Shape& os) const {
    const T* c = cols_.data();
    const std::size_t p = os[2] * os[3];
    for_each_tap(is, os, [&](std::size_t row, std::size_t col, bool ok, std::size_t idx) {
      if (ok) dst[idx] += c[row * p + col];
    });
  }

  Conv2dSpec spec_;
  Param<T> weight_;
  Param<T> bias_;
  RowMat<T> cols_;
};

/// Per-feature normalization over every axis but 1 ([N, C] or [N, C, H, W]).
template <typename T>
class BatchNorm final : public Op<T> {
 public:
  explicit BatchNorm(std::size_t features, double momentum = 0.9, double eps = 1e-5)
      : momentum_(momentum),
        eps_(eps),
        gamma_("gamma", {features}),
        beta_("beta", {features}),
        running_mean_("running_mean", {features}, false),
        running_var_("running_var", {features}, false) {
    std::fill(gamma_.value.values.begin(), gamma_.value.values.end(), T(1));
    std::fill(running_var_.value.values.begin(), running_var_.value.values.end(), T(1));
  }

  std::string kind() const override { return "BatchNorm"; }

  Shape infer(const Shape& in) const override {
    if (in.size() != 2 && in.size() != 4)
      throw InputError("BatchNorm expects rank 2 or 4, got " + shape_str(in));
    if (in[1] != gamma_.value.size())
      throw InputError("BatchNorm feature count mismatch: " + shape_str(in));
    return in;
  }

  void forward(const Tensor<T>& in, Tensor<T>& out, const OpContext& ctx) override {
    infer(in.shape);
    out.resize(in.shape);
    const std::size_t n = in.dim(0), c = in.dim(1), inner = in.size() / std::max<std::size_t>(n * c, 1);
    if (ctx.mode == Mode::Eval) {
      for (std::size_t f = 0; f < c; ++f) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_.value[f]) + eps_);
        const double scale = gamma_.value[f] * inv;
        const double shift = beta_.value[f] - running_mean_.value[f] * scale;
        for (std::size_t s = 0; s < n; ++s) {
          const T* x = in.data() + (s * c + f) * inner;
          T* y = out.data() + (s * c + f) * inner;
          for (std::size_t i = 0; i < inner; ++i) y[i] = static_cast<T>(x[i] * scale + shift);
        }
      }
      return;
    }
    const double m = static_cast<double>(n * inner);
    if (n * inner < 2) throw InputError("BatchNorm in train mode needs at least two values per feature");
    xhat_.resize(in.shape);
    inv_std_.assign(c, 0.0);
    for (std::size_t f = 0; f < c; ++f) {
      double sum = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* x = in.data() + (s * c + f) * inner;
        for (std::size_t i = 0; i < inner; ++i) sum += x[i];
      }
      const double mean = sum / m;
      double sq = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* x = in.data() + (s * c + f) * inner;
        for (std::size_t i = 0; i < inner; ++i) sq += (x[i] - mean) * (x[i] - mean);
      }
      const double var = sq / m;
      const double inv = 1.0 / std::sqrt(var + eps_);
      inv_std_[f] = inv;
      for (std::size_t s = 0; s < n; ++s) {
        const T* x = in.data() + (s * c + f) * inner;
        T* xh = xhat_.data() + (s * c + f) * inner;
        T* y = out.data() + (s * c + f) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          xh[i] = static_cast<T>((x[i] - mean) * inv);
          y[i] = gamma_.value[f] * xh[i] + beta_.value[f];
        }
      }
      running_mean_.value[f] = static_cast<T>(momentum_ * running_mean_.value[f] + (1.0 - momentum_) * mean);
      running_var_.value[f] =
          static_cast<T>(momentum_ * running_var_.value[f] + (1.0 - momentum_) * var * m / (m - 1.0));
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& gout,
                Tensor<T>* gin) override {
    const std::size_t n = in.dim(0), c = in.dim(1), inner = in.size() / std::max<std::size_t>(n * c, 1);
    const double m = static_cast<double>(n * inner);
    if (gin) gin->resize(in.shape);
    for (std::size_t f = 0; f < c; ++f) {
      double dbeta = 0.0, dgamma = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* g = gout.data() + (s * c + f) * inner;
        const T* xh = xhat_.data() + (s * c + f) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          dbeta += g[i];
          dgamma += g[i] * xh[i];
        }
      }
      gamma_.grad[f] += static_cast<T>(dgamma);
      beta_.grad[f] += static_cast<T>(dbeta);
      if (!gin) continue;
      const double gm = gamma_.value[f];
      const double k = gm * inv_std_[f] / m;
      for (std::size_t s = 0; s < n; ++s) {
        const T* g = gout.data() + (s * c + f) * inner;
        const T* xh = xhat_.data() + (s * c + f) * inner;
        T* gi = gin->data() + (s * c + f) * inner;
        for (std::size_t i = 0; i < inner; ++i)
          gi[i] = static_cast<T>(k * (m * g[i] - dbeta - xh[i] * dgamma));
      }
    }
  }

  std::vector<Param<T>*> params() override {
    return {&gamma_, &beta_, &running_mean_, &running_var_};
  }

  nlohmann::json describe() const override {
    return {{"kind", kind()}, {"features", gamma_.value.size()}, {"momentum", momentum_}, {"eps", eps_}};
  }

 private:
  double momentum_, eps_;
  Param<T> gamma_, beta_, running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<double> inv_std_;
};

/// x for x >= 0, alpha (e^x - 1) otherwise.
template <typename T>
class Elu final : public Op<T> {
 public:
  explicit Elu(double alpha = 1.0) : alpha_(alpha) {}
  std::string kind() const override { return "ELU"; }
  Shape infer(const Shape& in) const override { return in; }

  void forward(const Tensor<T>& in, Tensor<T>& out, const OpContext&) override {
    out.resize(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const T x = in[i];
      out[i] = x >= T(0) ? x : static_cast<T>(alpha_ * std::expm1(x));
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& gout,
                Tensor<T>* gin) override {
    if (!gin) return;
    gin->resize(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i)
      (*gin)[i] = in[i] >= T(0) ? gout[i] : static_cast<T>(gout[i] * (out[i] + alpha_));
  }

  nlohmann::json describe() const override { return {{"kind", kind()}, {"alpha", alpha_}}; }

 private:
  double alpha_;
};

enum class PoolKind { Max, Average };

/// Non-overlapping pooling (stride == kernel), floor mode. Max ties go to the
/// first index in scan order.
template <typename T>
class Pool2d final : public Op<T> {
 public:
  Pool2d(PoolKind kind, std::size_t kh, std::size_t kw) : kind_(kind), kh_(kh), kw_(kw) {
    distractnet::detail::require(kh >= 1 && kw >= 1, "pool window must be at least 1x1");
  }

  PoolKind pool_kind() const { return kind_; }
  std::size_t kernel_h() const { return kh_; }
  std::size_t kernel_w() const { return kw_; }
  std::string kind() const override { return kind_ == PoolKind::Max ? "MaxPool2d" : "AvgPool2d"; }

  Shape infer(const Shape& in) const override {
    detail::expect_rank(in, 4, "Pool2d");
    if (in[2] < kh_ || in[3] < kw_)
      throw InputError("pool window " + std::to_string(kh_) + "x" + std::to_string(kw_) +
                       " exceeds the remaining extent " + shape_str(in));
    return {in[0], in[1], in[2] / kh_, in[3] / kw_};
  }

  void forward(const Tensor<T>& in, Tensor<T>& out, const OpContext&) override {
    const Shape os = infer(in.shape);
    out.resize(os);
    const std::size_t planes = os[0] * os[1], h = in.dim(2), w = in.dim(3), oh = os[2], ow = os[3];
    if (kind_ == PoolKind::Max) argmax_.resize(out.size());
    const T inv_area = T(1) / static_cast<T>(kh_ * kw_);
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = in.data() + p * h * w;
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          const std::size_t o = (p * oh + y) * ow + x;
          if (kind_ == PoolKind::Max) {
            std::size_t best = (y * kh_) * w + x * kw_;
            for (std::size_t a = 0; a < kh_; ++a)
              for (std::size_t b = 0; b < kw_; ++b) {
                const std::size_t idx = (y * kh_ + a) * w + x * kw_ + b;
                if (src[idx] > src[best]) best = idx;
              }
            argmax_[o] = static_cast<std::int64_t>(p * h * w + best);
            out[o] = src[best];
          } else {
            T acc = 0;
            for (std::size_t a = 0; a < kh_; ++a)
              for (std::size_t b = 0; b < kw_; ++b) acc += src[(y * kh_ + a) * w + x * kw_ + b];
            out[o] = acc * inv_area;
          }
        }
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& gout,
                Tensor<T>* gin) override {
    if (!gin) return;
    gin->resize(in.shape);
    gin->zero();
    if (kind_ == PoolKind::Max) {
      for (std::size_t o = 0; o < out.size(); ++o)
        (*gin)[static_cast<std::size_t>(argmax_[o])] += gout[o];
      return;
    }
    const std::size_t planes = out.dim(0) * out.dim(1), h = in.dim(2), w = in.dim(3),
                      oh = out.dim(2), ow = out.dim(3);
    const T inv_area = T(1) / static_cast<T>(kh_ * kw_);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          const T g = gout[(p * oh + y) * ow + x] * inv_area;
          for (std::size_t a = 0; a < kh_; ++a)
            for (std::size_t b = 0; b < kw_; ++b)
              (*gin)[p * h * w + (y * kh_ + a) * w + x * kw_ + b] += g;
        }
  }

  void append_decisions(std::vector<std::int64_t>& d) const override {
    d.insert(d.end(), argmax_.begin(), argmax_.end());
  }

  nlohmann::json describe() const override {
    return {{"kind", kind()}, {"kernel", {kh_, kw_}}, {"stride", {kh_, kw_}}};
  }

 private:
  PoolKind kind_;
  std::size_t kh_, kw_;
  std::vector<std::int64_t> argmax_;
};

/// y = x W^T + b on [N, F].
template <typename T>
class Dense final : public Op<T> {
 public:
  Dense(std::size_t in, std::size_t out, std::mt19937_64& rng)
      : in_(in), out_(out), weight_("weight", {out, in}), bias_("bias", {out}) {
    detail::glorot_uniform(weight_.value, in, out, rng);
  }

  std::size_t units() const { return out_; }
  std::string kind() const override { return "Dense"; }

  Shape infer(const Shape& in) const override {
    detail::expect_rank(in, 2, "Dense");
    if (in[1] != in_)
      throw InputError("Dense expects " + std::to_string(in_) + " features, got " +
                       std::to_string(in[1]));
    return {in[0], out_};
  }

  void forward(const Tensor<T>& in, Tensor<T>& out, const OpContext&) override {
    infer(in.shape);
    out.resize({in.dim(0), out_});
    const auto n = static_cast<Eigen::Index>(in.dim(0));
    ConstMatMap<T> x(in.data(), n, static_cast<Eigen::Index>(in_));
    ConstMatMap<T> w(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
    MatMap<T> y(out.data(), n, static_cast<Eigen::Index>(out_));
    y.noalias() = x * w.transpose();
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.data(), static_cast<Eigen::Index>(out_));
    y.rowwise() += b;
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& gout,
                Tensor<T>* gin) override {
    const auto n = static_cast<Eigen::Index>(in.dim(0));
    ConstMatMap<T> x(in.data(), n, static_cast<Eigen::Index>(in_));
    ConstMatMap<T> g(gout.data(), n, static_cast<Eigen::Index>(out_));
    ConstMatMap<T> w(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
    MatMap<T> gw(weight_.grad.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
    gw.noalias() += g.transpose() * x;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(bias_.grad.data(), static_cast<Eigen::Index>(out_));
    gb += g.colwise().sum();
    if (gin) {
      gin->resize(in.shape);
      MatMap<T> gi(gin->data(), n, static_cast<Eigen::Index>(in_));
      gi.noalias() = g * w;
    }
  }

  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  nlohmann::json describe() const override {
    return {{"kind", kind()}, {"in_features", in_}, {"units", out_}};
  }

 private:
  std::size_t in_, out_;
  Param<T> weight_, bias_;
};

/// [N, ...] -> [N, prod(...)].
template <typename T>
class Flatten final : public Op<T> {
 public:
  std::string kind() const override { return "Flatten"; }
  Shape infer(const Shape& in) const override {
    if (in.empty()) throw InputError("Flatten needs a batch dimension");
    return {in[0], numel(in) / std::max<std::size_t>(in[0], 1)};
  }
  void forward(const Tensor<T>& in, Tensor<T>& out, const OpContext&) override {
    out.shape = {in.dim(0), in.size() / std::max<std::size_t>(in.dim(0), 1)};
    out.values = in.values;
  }
  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& gout, Tensor<T>* gin) override {
    if (!gin) return;
    gin->shape = in.shape;
    gin->values = gout.values;
  }
};

/// [N, C, H, W] -> [N, W, C*H]: the width (time) axis becomes the sequence axis.
template <typename T>
class ToSequence final : public Op<T> {
 public:
  std::string kind() const override { return "ToSequence"; }
  Shape infer(const Shape& in) const override {
    detail::expect_rank(in, 4, "ToSequence");
    return {in[0], in[3], in[1] * in[2]};
  }
  void forward(const Tensor<T>& in, Tensor<T>& out, const OpContext&) override {
    out.resize(infer(in.shape));
    const std::size_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t t = 0; t < w; ++t)
            out[(s * w + t) * c * h + ci * h + y] = in[((s * c + ci) * h + y) * w + t];
  }
  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& gout, Tensor<T>* gin) override {
    if (!gin) return;
    gin->resize(in.shape);
    const std::size_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t t = 0; t < w; ++t)
            (*gin)[((s * c + ci) * h + y) * w + t] = gout[(s * w + t) * c * h + ci * h + y];
  }
};

/// Inverted dropout; identity in eval mode.
template <typename T>
class Dropout final : public Op<T> {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    distractnet::detail::require(rate >= 0.0 && rate < 1.0, "dropout rate must be in [0, 1)");
  }
  double rate() const { return rate_; }
  std::string kind() const override { return "Dropout"; }
  Shape infer(const Shape& in) const override { return in; }

  void forward(const Tensor<T>& in, Tensor<T>& out, const OpContext& ctx) override {
    out.resize(in.shape);
    if (ctx.mode == Mode::Eval || rate_ == 0.0) {
      out.values = in.values;
      mask_.assign(in.size(), T(1));
      return;
    }
    if (!(ctx.freeze_random && mask_.size() == in.size())) {
      mask_.resize(in.size());
      std::bernoulli_distribution keep(1.0 - rate_);
      const T scale = static_cast<T>(1.0 / (1.0 - rate_));
      for (auto& m : mask_) m = keep(*ctx.rng) ? scale : T(0);
    }
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * mask_[i];
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& gout, Tensor<T>* gin) override {
    if (!gin) return;
    gin->resize(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i) (*gin)[i] = gout[i] * mask_[i];
  }

  nlohmann::json describe() const override { return {{"kind", kind()}, {"rate", rate_}}; }

 private:
  double rate_;
  std::vector<T> mask_;
};

/// Row-wise softmax on [N, C].
template <typename T>
class Softmax final : public Op<T> {
 public:
  std::string kind() const override { return "Softmax"; }
  Shape infer(const Shape& in) const override {
    detail::expect_rank(in, 2, "Softmax");
    return in;
  }
  void forward(const Tensor<T>& in, Tensor<T>& out, const OpContext&) override {
    out.resize(in.shape);
    const std::size_t n = in.dim(0), c = in.dim(1);
    for (std::size_t s = 0; s < n; ++s) {
      const T* x = in.data() + s * c;
      T* y = out.data() + s * c;
      const T mx = *std::max_element(x, x + c);
      T sum = 0;
      for (std::size_t j = 0; j < c; ++j) sum += (y[j] = std::exp(x[j] - mx));
      for (std::size_t j = 0; j < c; ++j) y[j] /= sum;
    }
  }
  void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& gout, Tensor<T>* gin) override {
    if (!gin) return;
    gin->resize(in.shape);
    const std::size_t n = in.dim(0), c = in.dim(1);
    for (std::size_t s = 0; s < n; ++s) {
      T dot = 0;
      for (std::size_t j = 0; j < c; ++j) dot += gout[s * c + j] * out[s * c + j];
      for (std::size_t j = 0; j < c; ++j)
        (*gin)[s * c + j] = out[s * c + j] * (gout[s * c + j] - dot);
    }
  }
};

}  // namespace distractnet::ad
