#pragma once

// IIR design by bilinear transform of analog Butterworth prototypes, biquad
// notch design, and zero-phase forward-backward application.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "distractnet/error.hpp"
#include "distractnet/sigcore/recording.hpp"

namespace distractnet {

enum class FilterKind { Bandpass, Lowpass, Notch };

struct FilterSpec {
  std::vector<double> b;  // numerator, b[0] multiplies x[n]
  std::vector<double> a;  // denominator, a[0] == 1
  double fs = 0.0;
  FilterKind kind = FilterKind::Bandpass;
  std::vector<double> edges_hz;  // {low, high} | {cutoff} | {center}
  int order = 0;                 // analog prototype order; 2 for the notch
  double q = 0.0;                // notch only

  std::size_t taps() const { return std::max(a.size(), b.size()); }
};

namespace detail {

using cplx = std::complex<double>;

inline std::vector<cplx> poly_from_roots(const std::vector<cplx>& roots) {
  std::vector<cplx> c{1.0};
  for (const auto& r : roots) {
    std::vector<cplx> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= r * c[i];
    }
    c = std::move(next);
  }
  return c;
}

inline std::vector<double> real_part(const std::vector<cplx>& v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](cplx z) { return z.real(); });
  return out;
}

// Left-half-plane poles of the unit-cutoff analog Butterworth low-pass.
inline std::vector<cplx> butterworth_prototype(int order) {
  std::vector<cplx> p;
  for (int k = 1; k <= order; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order - 1) / (2.0 * order);
    p.push_back(std::polar(1.0, theta));
  }
  return p;
}

inline double prewarp(double f_hz, double fs) {
  return 2.0 * fs * std::tan(std::numbers::pi * f_hz / fs);
}

struct Zpk {
  std::vector<cplx> z, p;
  double k = 1.0;
};

// Maps an analog zpk to the z-plane; zeros at infinity land on z = -1.
inline Zpk bilinear(const Zpk& analog, double fs) {
  const double fs2 = 2.0 * fs;
  Zpk d;
  cplx num = 1.0, den = 1.0;
  for (auto z : analog.z) {
    d.z.push_back((fs2 + z) / (fs2 - z));
    num *= fs2 - z;
  }
  for (auto p : analog.p) {
    d.p.push_back((fs2 + p) / (fs2 - p));
    den *= fs2 - p;
  }
  while (d.z.size() < d.p.size()) d.z.push_back(-1.0);
  d.k = analog.k * (num / den).real();
  return d;
}

inline void zpk_to_ba(const Zpk& d, FilterSpec& spec) {
  auto bz = poly_from_roots(d.z);
  spec.b = real_part(bz);
  for (auto& v : spec.b) v *= d.k;
  spec.a = real_part(poly_from_roots(d.p));
}

}  // namespace detail

/// Roots of the denominator polynomial.
inline std::vector<std::complex<double>> poles(const FilterSpec& spec) {
  const auto n = static_cast<Eigen::Index>(spec.a.size()) - 1;
  if (n <= 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) companion(0, j) = -spec.a[j + 1] / spec.a[0];
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  std::vector<std::complex<double>> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(es.eigenvalues()(i));
  return out;
}

inline double max_pole_magnitude(const FilterSpec& spec) {
  double m = 0.0;
  for (auto p : poles(spec)) m = std::max(m, std::abs(p));
  return m;
}

inline bool is_stable(const FilterSpec& spec) { return max_pole_magnitude(spec) < 1.0 - 1e-9; }

/// H(e^{j 2 pi f / fs}).
inline std::complex<double> frequency_response(const FilterSpec& spec, double f_hz) {
  const std::complex<double> zinv = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / spec.fs);
  auto horner = [&](const std::vector<double>& c) {
    std::complex<double> acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * zinv + *it;
    return acc;
  };
  return horner(spec.b) / horner(spec.a);
}

inline double magnitude(const FilterSpec& spec, double f_hz) {
  return std::abs(frequency_response(spec, f_hz));
}

namespace detail {

inline void check_stable(const FilterSpec& spec) {
  if (!is_stable(spec))
    throw NumericalError("filter design produced an unstable denominator (max |pole| = " +
                         std::to_string(max_pole_magnitude(spec)) + ")");
}

}  // namespace detail

/// Butterworth band-pass; `order` is the analog low-pass prototype order, so the
/// digital filter has order 2*order.
inline FilterSpec design_bandpass(double low_hz, double high_hz, int order, double fs) {
  detail::require(fs > 0.0, "sampling rate must be positive");
  detail::require(order >= 1, "filter order must be >= 1");
  detail::require(low_hz > 0.0 && low_hz < high_hz,
                  "band-pass edges must satisfy 0 < low < high");
  detail::require(high_hz < fs / 2.0, "band-pass high edge " + std::to_string(high_hz) +
                                          " Hz is at or above Nyquist (" +
                                          std::to_string(fs / 2.0) + " Hz)");

  const double wl = detail::prewarp(low_hz, fs);
  const double wh = detail::prewarp(high_hz, fs);
  const double bw = wh - wl;
  const double w0sq = wl * wh;

  detail::Zpk analog;
  for (auto p : detail::butterworth_prototype(order)) {
    const auto half = p * (bw / 2.0);
    const auto disc = std::sqrt(half * half - w0sq);
    analog.p.push_back(half + disc);
    analog.p.push_back(half - disc);
  }
  analog.z.assign(static_cast<std::size_t>(order), 0.0);
  analog.k = std::pow(bw, order);

  FilterSpec spec;
  spec.fs = fs;
  spec.kind = FilterKind::Bandpass;
  spec.edges_hz = {low_hz, high_hz};
  spec.order = order;
  detail::zpk_to_ba(detail::bilinear(analog, fs), spec);
  detail::check_stable(spec);
  return spec;
}

inline FilterSpec design_lowpass(double cutoff_hz, int order, double fs) {
  detail::require(fs > 0.0, "sampling rate must be positive");
  detail::require(order >= 1, "filter order must be >= 1");
  detail::require(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0,
                  "low-pass cutoff must lie strictly between 0 and Nyquist");
  const double wc = detail::prewarp(cutoff_hz, fs);
  detail::Zpk analog;
  for (auto p : detail::butterworth_prototype(order)) analog.p.push_back(p * wc);
  analog.k = std::pow(wc, order);

  FilterSpec spec;
  spec.fs = fs;
  spec.kind = FilterKind::Lowpass;
  spec.edges_hz = {cutoff_hz};
  spec.order = order;
  detail::zpk_to_ba(detail::bilinear(analog, fs), spec);
  detail::check_stable(spec);
  return spec;
}

/// Second-order notch with -3 dB bandwidth center/q.
inline FilterSpec design_notch(double center_hz, double fs, double q) {
  detail::require(fs > 0.0, "sampling rate must be positive");
  detail::require(q > 0.0, "notch quality factor must be positive");
  detail::require(center_hz > 0.0 && center_hz < fs / 2.0,
                  "notch center " + std::to_string(center_hz) + " Hz must lie in (0, " +
                      std::to_string(fs / 2.0) + ") Hz");
  const double w0 = 2.0 * std::numbers::pi * center_hz / fs;
  const double bw = w0 / q;
  const double gain = 1.0 / (1.0 + std::tan(bw / 2.0));
  const double c = std::cos(w0);

  FilterSpec spec;
  spec.fs = fs;
  spec.kind = FilterKind::Notch;
  spec.edges_hz = {center_hz};
  spec.order = 2;
  spec.q = q;
  spec.b = {gain, -2.0 * gain * c, gain};
  spec.a = {1.0, -2.0 * gain * c, 2.0 * gain - 1.0};
  detail::check_stable(spec);
  return spec;
}

/// Initial state of the transposed direct-form II filter that corresponds to
/// the steady state of a unit step input.
inline std::vector<double> lfilter_zi(const FilterSpec& spec) {
  const std::size_t n = spec.taps();
  std::vector<double> b = spec.b, a = spec.a;
  b.resize(n, 0.0);
  a.resize(n, 0.0);
  const auto m = static_cast<Eigen::Index>(n - 1);
  if (m == 0) return {};
  Eigen::MatrixXd ia = Eigen::MatrixXd::Identity(m, m);
  // I - companion(a)^T
  for (Eigen::Index i = 0; i < m; ++i) ia(i, 0) += a[i + 1];
  for (Eigen::Index i = 0; i + 1 < m; ++i) ia(i, i + 1) -= 1.0;
  Eigen::VectorXd rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) rhs(i) = b[i + 1] - a[i + 1] * b[0];
  Eigen::VectorXd zi = ia.fullPivLu().solve(rhs);
  return {zi.data(), zi.data() + m};
}

/// Causal transposed direct-form II filtering, in place. `state` is consumed.
inline void lfilter_inplace(const FilterSpec& spec, std::span<double> x, std::vector<double> state) {
  const std::size_t n = spec.taps();
  std::vector<double> b = spec.b, a = spec.a;
  b.resize(n, 0.0);
  a.resize(n, 0.0);
  state.resize(n - 1, 0.0);
  for (double& v : x) {
    const double in = v;
    const double out = b[0] * in + (n > 1 ? state[0] : 0.0);
    for (std::size_t i = 0; i + 1 < n - 1; ++i)
      state[i] = b[i + 1] * in + state[i + 1] - a[i + 1] * out;
    if (n > 1) state[n - 2] = b[n - 1] * in - a[n - 1] * out;
    v = out;
  }
}

inline std::size_t filtfilt_padlen(const FilterSpec& spec) { return 3 * spec.taps(); }

/// Forward-backward filtering with odd-reflection padding and steady-state
/// initial conditions. Net magnitude |H|^2, zero phase.
inline std::vector<double> filtfilt(const FilterSpec& spec, std::span<const double> x) {
  const std::size_t pad = filtfilt_padlen(spec);
  if (x.size() <= pad)
    throw InputError("signal of " + std::to_string(x.size()) +
                     " samples is too short for filtfilt padding of " + std::to_string(pad));
  const std::size_t n = x.size();
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  const auto zi = lfilter_zi(spec);
  auto scaled = [&](double s) {
    std::vector<double> z = zi;
    for (auto& v : z) v *= s;
    return z;
  };
  lfilter_inplace(spec, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  lfilter_inplace(spec, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

/// Applies `spec` zero-phase to every channel of `rec`.
inline Recording filtfilt(const FilterSpec& spec, Recording rec) {
  detail::require(std::abs(rec.fs - spec.fs) < 1e-9 * spec.fs,
                  "filter designed for " + std::to_string(spec.fs) + " Hz applied to a " +
                      std::to_string(rec.fs) + " Hz recording");
  for (Eigen::Index c = 0; c < rec.data.rows(); ++c) {
    std::span<const double> row(rec.data.row(c).data(), static_cast<std::size_t>(rec.data.cols()));
    auto y = filtfilt(spec, row);
    std::copy(y.begin(), y.end(), rec.data.row(c).data());
  }
  return rec;
}

}  // namespace distractnet
