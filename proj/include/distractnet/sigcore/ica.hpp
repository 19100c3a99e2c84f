#pragma once

// FastICA (tanh contrast, symmetric decorrelation, PCA whitening) and
// EOG-correlation based artifact component removal.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "distractnet/error.hpp"
#include "distractnet/sigcore/recording.hpp"

namespace distractnet {

struct IcaOptions {
  double tol = 1e-6;
  int max_iter = 500;
  /// Fit on at most this many samples, taken at an even stride (0: all).
  /// Means, whitening and the returned model still cover every sample.
  Eigen::Index max_fit_samples = 0;
};

struct IcaModel {
  Eigen::MatrixXd unmixing;  // k x n, maps centred channels to sources
  Eigen::MatrixXd mixing;    // n x k
  Eigen::VectorXd channel_means;
  Eigen::MatrixXd whitener;  // k x n
  std::vector<std::string> channel_names;
  bool converged = false;
  int iterations = 0;
  double final_change = 0.0;

  Eigen::Index n_components() const { return unmixing.rows(); }
  Eigen::Index n_channels() const { return unmixing.cols(); }

  Eigen::MatrixXd sources(const SignalMatrix& x) const {
    return unmixing * (x.colwise() - channel_means);
  }

  SignalMatrix reconstruct(const Eigen::MatrixXd& s) const {
    SignalMatrix out = mixing * s;
    out.colwise() += channel_means;
    return out;
  }
};

namespace detail {

// (W W^T)^{-1/2} W
inline Eigen::MatrixXd symmetric_decorrelation(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w * w.transpose());
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * w;
}

}  // namespace detail

/// Fits `n_components` independent components to the rows of `x`
/// (channels x samples). Deterministic given `seed`. A run that hits
/// `max_iter` returns the partial result with `converged == false`.
inline IcaModel fit_ica(const SignalMatrix& x, int n_components, std::uint64_t seed,
                        const IcaOptions& opt = {}) {
  const Eigen::Index n = x.rows();
  const Eigen::Index t = x.cols();
  detail::require(n_components >= 1 && n_components <= n,
                  "n_components must be in [1, n_channels]");
  detail::require(t >= 20 * n, "ICA needs at least 20 x n_channels samples");
  const Eigen::Index k = n_components;

  IcaModel m;
  m.channel_means = x.rowwise().mean();
  const Eigen::MatrixXd xc = x.colwise() - m.channel_means;
  const Eigen::MatrixXd cov = (xc * xc.transpose()) / static_cast<double>(t);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  // Eigenvalues come back ascending; keep the top k.
  const Eigen::VectorXd evals = es.eigenvalues().tail(k).reverse();
  const Eigen::MatrixXd evecs = es.eigenvectors().rightCols(k).rowwise().reverse();
  const double top = evals(0);
  if (!(top > 0.0) || evals(k - 1) <= 1e-12 * top)
    throw NumericalError("rank-deficient data: cannot whiten " + std::to_string(k) +
                         " components");

  m.whitener = evals.cwiseSqrt().cwiseInverse().asDiagonal() * evecs.transpose();
  const Eigen::Index stride =
      opt.max_fit_samples > 0 && t > opt.max_fit_samples ? (t + opt.max_fit_samples - 1) / opt.max_fit_samples : 1;
  const Eigen::Index tf = (t + stride - 1) / stride;
  Eigen::MatrixXd z(k, tf);
  for (Eigen::Index j = 0; j < tf; ++j) z.col(j).noalias() = m.whitener * xc.col(j * stride);
  const double inv_t = 1.0 / static_cast<double>(tf);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) w(i, j) = normal(rng);
  w = detail::symmetric_decorrelation(w);

  Eigen::MatrixXd g(k, tf);
  for (m.iterations = 1; m.iterations <= opt.max_iter; ++m.iterations) {
    g.noalias() = w * z;
    // tanh(u) = 1 - 2 / (exp(2u) + 1), vectorized through Eigen's exp.
    g.array() = 1.0 - 2.0 / ((2.0 * g.array()).exp() + 1.0);
    const Eigen::VectorXd mean_deriv = (1.0 - g.array().square()).rowwise().sum().matrix() * inv_t;
    Eigen::MatrixXd w_next = (g * z.transpose()) * inv_t - mean_deriv.asDiagonal() * w;
    w_next = detail::symmetric_decorrelation(w_next);
    const Eigen::VectorXd agreement = (w_next * w.transpose()).diagonal().cwiseAbs();
    m.final_change = (agreement.array() - 1.0).abs().maxCoeff();
    w = std::move(w_next);
    if (!w.allFinite()) throw NumericalError("FastICA produced non-finite weights");
    if (m.final_change < opt.tol) {
      m.converged = true;
      break;
    }
  }
  m.iterations = std::min(m.iterations, opt.max_iter);

  m.unmixing = w * m.whitener;
  m.mixing = evecs * evals.cwiseSqrt().asDiagonal() * w.transpose();
  return m;
}

/// ICA over the EEG channels of `rec`.
inline IcaModel fit_ica(const Recording& rec, int n_components, std::uint64_t seed,
                        const IcaOptions& opt = {}) {
  const auto eeg = rec.layout.indices_of(ChannelKind::EEG);
  detail::require(!eeg.empty(), "recording has no EEG channels");
  const Recording sub = rec.select_channels(eeg);
  IcaModel m = fit_ica(sub.data, n_components, seed, opt);
  for (const auto& ch : sub.layout.channels()) m.channel_names.push_back(ch.name);
  return m;
}

/// Permutation- and scale-invariant separation error of `p = unmixing * true_mixing`;
/// 0 for a scaled permutation, normalized to [0, 1].
inline double amari_index(const Eigen::MatrixXd& p) {
  detail::require(p.rows() == p.cols() && p.rows() >= 2, "Amari index needs a square matrix");
  const Eigen::Index k = p.rows();
  const Eigen::MatrixXd a = p.cwiseAbs();
  double rows = 0.0, cols = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) rows += a.row(i).sum() / a.row(i).maxCoeff() - 1.0;
  for (Eigen::Index j = 0; j < k; ++j) cols += a.col(j).sum() / a.col(j).maxCoeff() - 1.0;
  return (rows + cols) / (2.0 * static_cast<double>(k) * static_cast<double>(k - 1));
}

inline double pearson(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                      const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const Eigen::RowVectorXd da = a.array() - a.mean();
  const Eigen::RowVectorXd db = b.array() - b.mean();
  const double den = std::sqrt(da.squaredNorm() * db.squaredNorm());
  return den > 0.0 ? da.dot(db) / den : 0.0;
}

struct CleanResult {
  Recording recording;         // EEG channels only
  std::vector<int> flagged;    // component indices removed
  Eigen::MatrixXd correlations;  // components x EOG channels
};

/// Zeroes every component whose |Pearson r| with any EOG channel exceeds
/// `corr_threshold`, reconstructs the EEG channels, and drops the EOG channels.
inline CleanResult clean_artifacts(const IcaModel& ica, const Recording& rec,
                                   const std::vector<std::string>& eog_names,
                                   double corr_threshold) {
  std::vector<std::size_t> eog;
  std::string missing;
  for (const auto& name : eog_names) {
    if (auto i = rec.layout.find(name))
      eog.push_back(*i);
    else
      missing += (missing.empty() ? "" : ", ") + name;
  }
  if (eog_names.empty() || !missing.empty())
    throw InputError("no EOG channels found" +
                     (missing.empty() ? std::string() : ": missing " + missing));

  std::vector<std::size_t> eeg;
  for (const auto& name : ica.channel_names) eeg.push_back(rec.layout.index_of(name));
  detail::require(static_cast<Eigen::Index>(eeg.size()) == ica.n_channels(),
                  "ICA model was not fitted on this recording's EEG channels");

  CleanResult out;
  out.recording = rec.select_channels(eeg);
  Eigen::MatrixXd s = ica.sources(out.recording.data);
  const Eigen::Index k = s.rows();
  out.correlations.resize(k, static_cast<Eigen::Index>(eog.size()));
  for (Eigen::Index c = 0; c < k; ++c) {
    bool flag = false;
    for (std::size_t e = 0; e < eog.size(); ++e) {
      const double r = pearson(s.row(c), rec.data.row(static_cast<Eigen::Index>(eog[e])));
      out.correlations(c, static_cast<Eigen::Index>(e)) = r;
      flag = flag || std::abs(r) > corr_threshold;
    }
    if (flag) {
      out.flagged.push_back(static_cast<int>(c));
      s.row(c).setZero();
    }
  }
  out.recording.data = ica.reconstruct(s);
  return out;
}

}  // namespace distractnet
