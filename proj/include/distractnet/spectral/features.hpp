#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>
#include <vector>

#include "distractnet/error.hpp"
#include "distractnet/sigcore/epochs.hpp"
#include "distractnet/spectral/welch.hpp"

namespace distractnet {

struct ZScoreStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;
};

/// Log10 band powers, one row per epoch; columns are channel-major, band-minor.
struct FeatureMatrix {
  Eigen::MatrixXd rows;
  std::vector<Tag> tags;
  std::vector<std::string> columns;
  std::optional<ZScoreStats> normalization;

  Eigen::Index n_rows() const { return rows.rows(); }
  Eigen::Index n_cols() const { return rows.cols(); }

  FeatureMatrix subset(const std::vector<std::size_t>& idx) const {
    FeatureMatrix out;
    out.columns = columns;
    out.normalization = normalization;
    out.rows.resize(static_cast<Eigen::Index>(idx.size()), rows.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.rows.row(static_cast<Eigen::Index>(r)) = rows.row(static_cast<Eigen::Index>(idx[r]));
      out.tags.push_back(tags[idx[r]]);
    }
    return out;
  }
};

inline constexpr double kLogPowerFloor = 1e-12;

inline FeatureMatrix psd_features(const EpochSet& epochs, const WelchParams& welch = {}) {
  detail::require(epochs.n_epochs > 0, "no epochs to extract features from");
  const auto eeg = epochs.layout.indices_of(ChannelKind::EEG);
  detail::require(!eeg.empty(), "epochs have no EEG channels");
  const auto nb = static_cast<Eigen::Index>(kCanonicalBands.size());
  const auto nc = static_cast<Eigen::Index>(eeg.size());

  FeatureMatrix fm;
  fm.tags = epochs.tags;
  for (auto c : eeg)
    for (const auto& b : kCanonicalBands)
      fm.columns.push_back(epochs.layout[c].name + "_" + std::string(to_string(b.name)));
  fm.rows.resize(static_cast<Eigen::Index>(epochs.n_epochs), nc * nb);

  SignalMatrix sub(nc, static_cast<Eigen::Index>(epochs.n_samples));
  for (std::size_t e = 0; e < epochs.n_epochs; ++e) {
    const auto ep = epochs.epoch(e);
    for (Eigen::Index c = 0; c < nc; ++c) sub.row(c) = ep.row(static_cast<Eigen::Index>(eeg[static_cast<std::size_t>(c)]));
    const Spectrum s = welch_psd(sub, epochs.fs, welch);
    for (Eigen::Index b = 0; b < nb; ++b) {
      const Eigen::VectorXd bp = band_power(s, kCanonicalBands[static_cast<std::size_t>(b)]);
      for (Eigen::Index c = 0; c < nc; ++c)
        fm.rows(static_cast<Eigen::Index>(e), c * nb + b) = std::log10(bp(c) + kLogPowerFloor);
    }
  }
  return fm;
}

/// Column statistics over the given rows only (the training subset).
inline ZScoreStats fit_zscore(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  detail::require(!rows.empty(), "z-score needs at least one training row");
  ZScoreStats st;
  st.mean = Eigen::RowVectorXd::Zero(x.cols());
  for (auto r : rows) st.mean += x.row(static_cast<Eigen::Index>(r));
  st.mean /= static_cast<double>(rows.size());
  st.std = Eigen::RowVectorXd::Zero(x.cols());
  for (auto r : rows) st.std += (x.row(static_cast<Eigen::Index>(r)) - st.mean).array().square().matrix();
  st.std = (st.std / static_cast<double>(rows.size())).cwiseSqrt();
  for (Eigen::Index j = 0; j < st.std.size(); ++j)
    if (!(st.std(j) > 1e-12)) st.std(j) = 1.0;
  return st;
}

inline void apply_zscore(FeatureMatrix& fm, const ZScoreStats& st) {
  detail::require(st.mean.size() == fm.n_cols(), "z-score stats do not match feature width");
  fm.rows = ((fm.rows.rowwise() - st.mean).array().rowwise() / st.std.array()).matrix();
  fm.normalization = st;
}

inline void write_features_csv(const std::filesystem::path& path, const FeatureMatrix& fm) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  os << "label";
  for (const auto& c : fm.columns) os << ',' << c;
  os << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < fm.n_rows(); ++r) {
    os << to_string(condition_of(fm.tags[static_cast<std::size_t>(r)]));
    for (Eigen::Index c = 0; c < fm.n_cols(); ++c) os << ',' << fm.rows(r, c);
    os << '\n';
  }
}

}  // namespace distractnet
