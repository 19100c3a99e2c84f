#pragma once

// Per-channel band-power maps per condition and channel-wise significance.

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "distractnet/evalstats/stats.hpp"
#include "distractnet/sigcore/epochs.hpp"
#include "distractnet/spectral/welch.hpp"

namespace distractnet {

enum class Contrast { HdVsNs, LevelTrend };

inline Contrast parse_contrast(std::string_view s) {
  if (s == "hd-vs-ns") return Contrast::HdVsNs;
  if (s == "level-trend") return Contrast::LevelTrend;
  throw InputError("unknown contrast '" + std::string(s) + "' (expected hd-vs-ns or level-trend)");
}

inline std::string_view to_string(Contrast c) { return c == Contrast::HdVsNs ? "hd-vs-ns" : "level-trend"; }

struct Significance {
  std::vector<double> p;
  std::vector<bool> mask;  // p < alpha
};

/// Welch t-test per column of A vs B (rows are epochs, columns channels).
inline Significance channel_significance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double alpha = 0.05,
                                         bool bonferroni_correct = false) {
  detail::require(a.cols() == b.cols(), "condition matrices disagree on channel count");
  detail::require(a.rows() >= 2 && b.rows() >= 2, "channel significance needs at least two epochs per condition");
  Significance s;
  const auto m = static_cast<std::size_t>(a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const Eigen::VectorXd ca = a.col(c), cb = b.col(c);
    double p = welch_test(std::span<const double>(ca.data(), static_cast<std::size_t>(ca.size())),
                          std::span<const double>(cb.data(), static_cast<std::size_t>(cb.size())))
                   .p;
    if (bonferroni_correct) p = bonferroni(p, m);
    s.p.push_back(p);
    s.mask.push_back(p < alpha);
  }
  return s;
}

/// Band power of every EEG channel of every epoch [n_epochs x n_eeg].
inline Eigen::MatrixXd epoch_band_power(const EpochSet& epochs, const Band& band, const WelchParams& welch = {}) {
  const auto eeg = epochs.layout.indices_of(ChannelKind::EEG);
  detail::require(!eeg.empty(), "epochs have no EEG channels");
  const auto nc = static_cast<Eigen::Index>(eeg.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(epochs.n_epochs), nc);
  SignalMatrix sub(nc, static_cast<Eigen::Index>(epochs.n_samples));
  for (std::size_t e = 0; e < epochs.n_epochs; ++e) {
    const auto ep = epochs.epoch(e);
    for (Eigen::Index c = 0; c < nc; ++c) sub.row(c) = ep.row(static_cast<Eigen::Index>(eeg[static_cast<std::size_t>(c)]));
    out.row(static_cast<Eigen::Index>(e)) = band_power(welch_psd(sub, epochs.fs, welch), band).transpose();
  }
  return out;
}

struct TopoResult {
  Band band;
  Contrast contrast = Contrast::HdVsNs;
  std::vector<std::string> channels;
  std::vector<double> x, y;
  Eigen::MatrixXd mean_power;   // conditions (NS, LD, HD) x channels
  Eigen::MatrixXd epoch_power;  // epochs x channels
  std::vector<int> classes;     // per epoch
  Significance significance;

  /// HD minus NS grand-average power per channel.
  Eigen::RowVectorXd hd_minus_ns() const {
    return mean_power.row(class_index(Condition::HD)) - mean_power.row(class_index(Condition::NS));
  }

  Eigen::MatrixXd rows_of(int cls) const {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == cls) idx.push_back(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), epoch_power.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = epoch_power.row(idx[r]);
    return out;
  }
};

struct TopoOptions {
  WelchParams welch;
  Contrast contrast = Contrast::HdVsNs;
  double alpha = 0.05;
  bool bonferroni = false;
};

inline TopoResult topography(const EpochSet& epochs, const Band& band, const TopoOptions& opt = {}) {
  epochs.validate();
  const auto counts = epochs.class_counts();
  for (auto c : kConditions)
    detail::require(counts[static_cast<std::size_t>(class_index(c))] > 0,
                    "topography needs epochs of every condition; none labeled " + std::string(to_string(c)));
  TopoResult r;
  r.band = band;
  r.contrast = opt.contrast;
  for (auto c : epochs.layout.indices_of(ChannelKind::EEG)) {
    r.channels.push_back(epochs.layout[c].name);
    r.x.push_back(epochs.layout[c].x);
    r.y.push_back(epochs.layout[c].y);
  }
  r.epoch_power = epoch_band_power(epochs, band, opt.welch);
  for (std::size_t i = 0; i < epochs.n_epochs; ++i) r.classes.push_back(epochs.class_of(i));

  r.mean_power = Eigen::MatrixXd::Zero(kNumConditions, r.epoch_power.cols());
  for (int c = 0; c < kNumConditions; ++c) r.mean_power.row(c) = r.rows_of(c).colwise().mean();

  if (opt.contrast == Contrast::HdVsNs) {
    r.significance = channel_significance(r.rows_of(class_index(Condition::HD)), r.rows_of(class_index(Condition::NS)),
                                          opt.alpha, opt.bonferroni);
  } else {
    std::vector<double> level(r.classes.begin(), r.classes.end());
    const auto m = static_cast<std::size_t>(r.epoch_power.cols());
    for (Eigen::Index c = 0; c < r.epoch_power.cols(); ++c) {
      const Eigen::VectorXd col = r.epoch_power.col(c);
      double p = slope_test(level, std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))).p;
      if (opt.bonferroni) p = bonferroni(p, m);
      r.significance.p.push_back(p);
      r.significance.mask.push_back(p < opt.alpha);
    }
  }
  return r;
}

inline void write_topography_csv(const std::filesystem::path& path, const TopoResult& r) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  os.precision(17);
  os << "channel,x,y,power_NS,power_LD,power_HD,p,significant\n";
  for (std::size_t c = 0; c < r.channels.size(); ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    os << r.channels[c] << ',' << r.x[c] << ',' << r.y[c] << ',' << r.mean_power(0, ci) << ',' << r.mean_power(1, ci)
       << ',' << r.mean_power(2, ci) << ',' << r.significance.p[c] << ',' << (r.significance.mask[c] ? 1 : 0) << '\n';
  }
}

}  // namespace distractnet
