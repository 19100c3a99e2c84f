#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <string_view>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "distractnet/error.hpp"
#include "distractnet/sigcore/recording.hpp"

namespace distractnet {

enum class BandName { Delta, Theta, Alpha, Beta };

struct Band {
  BandName name;
  double lo;  // inclusive
  double hi;  // exclusive
};

inline constexpr std::array<Band, 4> kCanonicalBands{{
    {BandName::Delta, 1.0, 4.0},
    {BandName::Theta, 4.0, 8.0},
    {BandName::Alpha, 8.0, 13.0},
    {BandName::Beta, 13.0, 30.0},
}};

inline std::string_view to_string(BandName b) {
  switch (b) {
    case BandName::Delta:
      return "delta";
    case BandName::Theta:
      return "theta";
    case BandName::Alpha:
      return "alpha";
    case BandName::Beta:
      return "beta";
  }
  return "?";
}

inline const Band& canonical_band(BandName name) {
  return kCanonicalBands[static_cast<std::size_t>(name)];
}

inline Band parse_band(std::string_view s) {
  for (const auto& b : kCanonicalBands)
    if (to_string(b.name) == s) return b;
  throw InputError("unknown band '" + std::string(s) + "' (expected delta|theta|alpha|beta)");
}

/// One-sided power spectral density, microvolt^2 / Hz.
struct Spectrum {
  Eigen::VectorXd freqs;
  Eigen::MatrixXd power;  // channels x freqs
};

struct WelchParams {
  int seg_len = 100;
  int overlap = 0;
};

/// Averaged Hann-windowed periodograms with density scaling, so that the
/// integral over frequency approximates the mean signal power.
inline Spectrum welch_psd(const Eigen::Ref<const SignalMatrix>& x, double fs, const WelchParams& p) {
  const auto n = static_cast<int>(x.cols());
  detail::require(fs > 0.0, "sampling rate must be positive");
  detail::require(p.seg_len >= 2, "Welch segment must have at least 2 samples");
  detail::require(p.seg_len <= n, "Welch segment (" + std::to_string(p.seg_len) +
                                      ") is longer than the epoch (" + std::to_string(n) + ")");
  detail::require(p.overlap >= 0 && p.overlap < p.seg_len, "Welch overlap must be in [0, seg_len)");

  const int len = p.seg_len;
  const int step = len - p.overlap;
  const int nfreq = len / 2 + 1;
  std::vector<double> window(static_cast<std::size_t>(len));
  double wss = 0.0;
  for (int i = 0; i < len; ++i) {
    window[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / len);
    wss += window[static_cast<std::size_t>(i)] * window[static_cast<std::size_t>(i)];
  }
  const double scale = 1.0 / (fs * wss);

  Spectrum s;
  s.freqs.resize(nfreq);
  for (int k = 0; k < nfreq; ++k) s.freqs(k) = k * fs / len;
  s.power = Eigen::MatrixXd::Zero(x.rows(), nfreq);

  Eigen::FFT<double> fft;
  std::vector<double> seg(static_cast<std::size_t>(len));
  std::vector<std::complex<double>> spec;
  int n_segments = 0;
  for (int start = 0; start + len <= n; start += step) ++n_segments;

  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (int start = 0; start + len <= n; start += step) {
      for (int i = 0; i < len; ++i)
        seg[static_cast<std::size_t>(i)] = x(c, start + i) * window[static_cast<std::size_t>(i)];
      fft.fwd(spec, seg);
      for (int k = 0; k < nfreq; ++k) {
        double pw = std::norm(spec[static_cast<std::size_t>(k)]) * scale;
        const bool unpaired = k == 0 || (len % 2 == 0 && k == len / 2);
        if (!unpaired) pw *= 2.0;
        s.power(c, k) += pw;
      }
    }
  }
  s.power /= static_cast<double>(n_segments);
  return s;
}

namespace detail {

// Integral of the piecewise-linear interpolant of (f, y) over [lo, hi].
inline double integrate_linear(const Eigen::VectorXd& f, const Eigen::Ref<const Eigen::RowVectorXd>& y,
                               double lo, double hi) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k + 1 < f.size(); ++k) {
    const double f0 = f(k), f1 = f(k + 1);
    const double a = std::max(lo, f0), b = std::min(hi, f1);
    if (b <= a) continue;
    const double slope = (y(k + 1) - y(k)) / (f1 - f0);
    const double ya = y(k) + slope * (a - f0);
    const double yb = y(k) + slope * (b - f0);
    acc += 0.5 * (ya + yb) * (b - a);
  }
  return acc;
}

}  // namespace detail

/// Trapezoidal integral of the density over [lo, hi) per channel.
inline Eigen::VectorXd band_power(const Spectrum& s, const Band& band) {
  detail::require(band.lo < band.hi, "band must satisfy lo < hi");
  detail::require(s.freqs.size() >= 2 && band.lo >= s.freqs(0) &&
                      band.hi <= s.freqs(s.freqs.size() - 1),
                  "band outside the spectrum's frequency range");
  Eigen::VectorXd out(s.power.rows());
  for (Eigen::Index c = 0; c < s.power.rows(); ++c)
    out(c) = detail::integrate_linear(s.freqs, s.power.row(c), band.lo, band.hi);
  return out;
}

/// Integral over the whole spectrum.
inline Eigen::VectorXd total_power(const Spectrum& s) {
  return band_power(s, Band{BandName::Delta, s.freqs(0), s.freqs(s.freqs.size() - 1)});
}

}  // namespace distractnet
