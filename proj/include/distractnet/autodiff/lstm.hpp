#pragma once

#include <cmath>
#include <random>

#include "distractnet/autodiff/graph.hpp"
#include "distractnet/autodiff/layers.hpp"

namespace distractnet::ad {

/// LSTM over [N, T, F]. Gate order in the packed weights is input, forget,
/// candidate, output. Emits [N, T, H] or, with `last_only`, [N, H].
template <typename T>
class Lstm final : public Op<T> {
 public:
  Lstm(std::size_t input_size, std::size_t hidden, bool last_only, std::mt19937_64& rng)
      : f_(input_size),
        h_(hidden),
        last_only_(last_only),
        w_input_("w_input", {4 * hidden, input_size}),
        w_recurrent_("w_recurrent", {4 * hidden, hidden}),
        bias_("bias", {4 * hidden}) {
    detail::glorot_uniform(w_input_.value, input_size, 4 * hidden, rng);
    // Orthonormal columns for the stacked recurrent matrix.
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(static_cast<Eigen::Index>(4 * hidden), static_cast<Eigen::Index>(hidden));
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
    // Fix the sign ambiguity of QR so the result is uniformly distributed.
    const Eigen::MatrixXd r = qr.matrixQR().topRows(g.cols()).template triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j)
      if (r(j, j) < 0) q.col(j) *= -1.0;
    for (Eigen::Index i = 0; i < q.rows(); ++i)
      for (Eigen::Index j = 0; j < q.cols(); ++j)
        w_recurrent_.value[static_cast<std::size_t>(i * q.cols() + j)] = static_cast<T>(q(i, j));
    for (std::size_t j = hidden; j < 2 * hidden; ++j) bias_.value[j] = T(1);  // forget gate
  }

  std::size_t hidden() const { return h_; }
  bool last_only() const { return last_only_; }
  std::string kind() const override { return "LSTM"; }

  Shape infer(const Shape& in) const override {
    detail::expect_rank(in, 3, "LSTM");
    if (in[2] != f_)
      throw InputError("LSTM expects " + std::to_string(f_) + " features per step, got " +
                       std::to_string(in[2]));
    if (in[1] == 0) throw InputError("LSTM needs at least one time step");
    return last_only_ ? Shape{in[0], h_} : Shape{in[0], in[1], h_};
  }

  void forward(const Tensor<T>& in, Tensor<T>& out, const OpContext&) override {
    out.resize(infer(in.shape));
    n_ = in.dim(0);
    steps_ = in.dim(1);
    const auto n = static_cast<Eigen::Index>(n_), g4 = static_cast<Eigen::Index>(4 * h_),
               h = static_cast<Eigen::Index>(h_);
    ConstMatMap<T> x(in.data(), n * static_cast<Eigen::Index>(steps_), static_cast<Eigen::Index>(f_));
    ConstMatMap<T> wx(w_input_.value.data(), g4, static_cast<Eigen::Index>(f_));
    ConstMatMap<T> wh(w_recurrent_.value.data(), g4, h);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.data(), g4);

    // Rows of xw are indexed sample * steps + t.
    xw_.resize(n * static_cast<Eigen::Index>(steps_), g4);
    xw_.noalias() = x * wx.transpose();
    xw_.rowwise() += b;

    gates_.assign(steps_, RowMat<T>());
    cells_.assign(steps_ + 1, RowMat<T>::Zero(n, h));
    hiddens_.assign(steps_ + 1, RowMat<T>::Zero(n, h));
    tanh_c_.assign(steps_, RowMat<T>());
    RowMat<T> z(n, g4);
    for (std::size_t t = 0; t < steps_; ++t) {
      for (Eigen::Index s = 0; s < n; ++s) z.row(s) = xw_.row(s * static_cast<Eigen::Index>(steps_) + static_cast<Eigen::Index>(t));
      z.noalias() += hiddens_[t] * wh.transpose();
      auto& gt = gates_[t];
      gt.resize(n, g4);
      for (Eigen::Index s = 0; s < n; ++s)
        for (Eigen::Index j = 0; j < g4; ++j) {
          const T v = z(s, j);
          gt(s, j) = (j >= 2 * h && j < 3 * h) ? std::tanh(v) : T(1) / (T(1) + std::exp(-v));
        }
      const auto i_g = gt.leftCols(h), f_g = gt.middleCols(h, h), c_g = gt.middleCols(2 * h, h),
                 o_g = gt.rightCols(h);
      cells_[t + 1] = f_g.cwiseProduct(cells_[t]) + i_g.cwiseProduct(c_g);
      tanh_c_[t] = cells_[t + 1].array().tanh().matrix();
      hiddens_[t + 1] = o_g.cwiseProduct(tanh_c_[t]);
      if (!last_only_)
        for (Eigen::Index s = 0; s < n; ++s)
          for (Eigen::Index j = 0; j < h; ++j)
            out[(static_cast<std::size_t>(s) * steps_ + t) * h_ + static_cast<std::size_t>(j)] = hiddens_[t + 1](s, j);
    }
    if (last_only_)
      std::copy(hiddens_[steps_].data(), hiddens_[steps_].data() + n * h, out.data());
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& gout,
                Tensor<T>* gin) override {
    const auto n = static_cast<Eigen::Index>(n_), g4 = static_cast<Eigen::Index>(4 * h_),
               h = static_cast<Eigen::Index>(h_);
    const auto st = static_cast<Eigen::Index>(steps_);
    ConstMatMap<T> x(in.data(), n * st, static_cast<Eigen::Index>(f_));
    ConstMatMap<T> wx(w_input_.value.data(), g4, static_cast<Eigen::Index>(f_));
    ConstMatMap<T> wh(w_recurrent_.value.data(), g4, h);
    MatMap<T> gwx(w_input_.grad.data(), g4, static_cast<Eigen::Index>(f_));
    MatMap<T> gwh(w_recurrent_.grad.data(), g4, h);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(bias_.grad.data(), g4);

    RowMat<T> dz_all(n * st, g4);
    RowMat<T> dh = RowMat<T>::Zero(n, h), dc = RowMat<T>::Zero(n, h), dz(n, g4);
    for (std::size_t tt = steps_; tt-- > 0;) {
      if (last_only_) {
        if (tt + 1 == steps_) dh += ConstMatMap<T>(gout.data(), n, h);
      } else {
        for (Eigen::Index s = 0; s < n; ++s)
          for (Eigen::Index j = 0; j < h; ++j)
            dh(s, j) += gout[(static_cast<std::size_t>(s) * steps_ + tt) * h_ + static_cast<std::size_t>(j)];
      }
      const auto& gt = gates_[tt];
      const auto i_g = gt.leftCols(h), f_g = gt.middleCols(h, h), c_g = gt.middleCols(2 * h, h),
                 o_g = gt.rightCols(h);
      const auto& tc = tanh_c_[tt];
      dc.array() += dh.array() * o_g.array() * (T(1) - tc.array().square());
      dz.leftCols(h) = (dc.array() * c_g.array() * i_g.array() * (T(1) - i_g.array())).matrix();
      dz.middleCols(h, h) =
          (dc.array() * cells_[tt].array() * f_g.array() * (T(1) - f_g.array())).matrix();
      dz.middleCols(2 * h, h) = (dc.array() * i_g.array() * (T(1) - c_g.array().square())).matrix();
      dz.rightCols(h) = (dh.array() * tc.array() * o_g.array() * (T(1) - o_g.array())).matrix();
      gwh.noalias() += dz.transpose() * hiddens_[tt];
      dh.noalias() = dz * wh;
      dc = dc.cwiseProduct(f_g);
      for (Eigen::Index s = 0; s < n; ++s) dz_all.row(s * st + static_cast<Eigen::Index>(tt)) = dz.row(s);
    }
    gwx.noalias() += dz_all.transpose() * x;
    gb += dz_all.colwise().sum();
    if (gin) {
      gin->resize(in.shape);
      MatMap<T> gi(gin->data(), n * st, static_cast<Eigen::Index>(f_));
      gi.noalias() = dz_all * wx;
    }
  }

  std::vector<Param<T>*> params() override { return {&w_input_, &w_recurrent_, &bias_}; }

  nlohmann::json describe() const override {
    return {{"kind", kind()}, {"input_size", f_}, {"hidden", h_}, {"last_only", last_only_}};
  }

 private:
  std::size_t f_, h_;
  bool last_only_;
  Param<T> w_input_, w_recurrent_, bias_;
  std::size_t n_ = 0, steps_ = 0;
  RowMat<T> xw_;
  std::vector<RowMat<T>> gates_, cells_, hiddens_, tanh_c_;
};

}  // namespace distractnet::ad
