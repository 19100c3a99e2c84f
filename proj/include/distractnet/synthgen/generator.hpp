#pragma once

// Synthetic recordings: 1/f background, narrow-band theta and alpha
// oscillators whose gain follows the condition at each sample, 60 Hz line
// interference and blink transients shared between EOG and frontal EEG.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <json.hpp>
#include <random>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "distractnet/fingerprint.hpp"
#include "distractnet/sigcore/epochs.hpp"
#include "distractnet/sigcore/recording.hpp"
#include "distractnet/spectral/features.hpp"
#include "distractnet/synthgen/protocol.hpp"

namespace distractnet {

struct Blink {
  std::int64_t peak = 0;  // sample index
  double amplitude = 0.0;
};

struct SyntheticSubject {
  Recording recording;
  std::vector<Blink> blinks;
  nlohmann::json manifest;
};

namespace detail {

// 1/f^exponent noise of unit rms, shaped in the frequency domain. Components
// below `floor_hz` take the floor's amplitude; DC is removed.
inline std::vector<double> pink_noise(std::size_t n, double fs, double exponent, std::mt19937_64& rng,
                                      double floor_hz = 0.1) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = normal(rng);
  if (n < 2) return x;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const std::size_t kk = std::min(k, n - k);
    if (kk == 0) {
      spec[k] = 0.0;
      continue;
    }
    const double f = std::max(static_cast<double>(kk) * fs / static_cast<double>(n), floor_hz);
    spec[k] *= std::pow(f, -0.5 * exponent);
  }
  fft.inv(x, spec);
  double ss = 0.0;
  for (double v : x) ss += v * v;
  const double rms = std::sqrt(ss / static_cast<double>(n));
  if (rms > 0.0)
    for (auto& v : x) v /= rms;
  return x;
}

// Constant-peak-gain band-pass biquad (peak 0 dB at f0, Q = f0 / bandwidth).
struct Resonator {
  double b0, b2, a1, a2;
  double noise_gain;  // output rms for unit-variance white input
  double z1 = 0.0, z2 = 0.0;

  Resonator(double f0, double bw, double fs) {
    const double w0 = 2.0 * M_PI * f0 / fs;
    const double alpha = std::sin(w0) * bw / (2.0 * f0);
    const double a0 = 1.0 + alpha;
    b0 = alpha / a0;
    b2 = -alpha / a0;
    a1 = -2.0 * std::cos(w0) / a0;
    a2 = (1.0 - alpha) / a0;
    // Impulse-response energy; the tail decays geometrically with pole radius sqrt(a2).
    double e = 0.0;
    Resonator probe = *this;
    const auto len = static_cast<std::size_t>(std::ceil(40.0 * fs / bw)) + 16;
    for (std::size_t i = 0; i < len; ++i) {
      const double y = probe.step(i == 0 ? 1.0 : 0.0);
      e += y * y;
    }
    noise_gain = std::sqrt(e);
  }

  Resonator(const Resonator&) = default;

  // Transposed direct form II.
  double step(double x) {
    const double y = b0 * x + z1;
    z1 = -a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }
};

// Frontal-pole weighting of blink artifacts in EEG channels.
inline double blink_weight(const Channel& ch) {
  const double dx = ch.x, dy = ch.y - 1.0;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * 0.5 * 0.5));
}

inline double eog_blink_weight(const std::string& name) {
  if (name == "VEOGU") return 1.0;
  if (name == "VEOGL") return -0.8;
  if (name == "HEOGL" || name == "HEOGR") return 0.15;
  return 0.0;
}

}  // namespace detail

/// Deterministic in (cfg, seed): every channel and the blink train draw from
/// their own derived stream.
inline SyntheticSubject generate_subject(const ProtocolConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SyntheticSubject out;
  Recording& rec = out.recording;
  rec.fs = cfg.fs;
  rec.layout = cfg.layout;
  rec.markers = session_script(cfg, derive_seed(seed, 0));
  const std::int64_t total = rec.markers.empty() ? 0 : rec.markers.back().end();
  const auto n = static_cast<std::size_t>(total);
  const auto n_ch = cfg.layout.size();
  rec.data.resize(static_cast<Eigen::Index>(n_ch), static_cast<Eigen::Index>(n));

  std::vector<std::uint8_t> cond(n);
  for (const auto& e : rec.markers)
    std::fill(cond.begin() + e.onset, cond.begin() + e.end(), static_cast<std::uint8_t>(class_index(e.tag)));

  // Blink train: Poisson arrivals, Gaussian bumps (width spans +-3 sigma).
  std::vector<double> blink(n, 0.0);
  {
    std::mt19937_64 rng(derive_seed(seed, 1));
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    const double sigma = cfg.blink_width_s / 6.0 * cfg.fs;
    const auto half = static_cast<std::int64_t>(std::ceil(3.0 * sigma));
    if (cfg.blink_rate_hz > 0.0 && cfg.blink_uv > 0.0) {
      std::exponential_distribution<double> gap(cfg.blink_rate_hz);
      for (double t = gap(rng); t * cfg.fs < static_cast<double>(total); t += gap(rng)) {
        const Blink b{static_cast<std::int64_t>(std::llround(t * cfg.fs)), cfg.blink_uv * jitter(rng)};
        out.blinks.push_back(b);
        for (std::int64_t i = std::max<std::int64_t>(0, b.peak - half); i <= b.peak + half && i < total; ++i) {
          const double z = static_cast<double>(i - b.peak) / sigma;
          blink[static_cast<std::size_t>(i)] += b.amplitude * std::exp(-0.5 * z * z);
        }
      }
    }
  }

  std::vector<bool> theta_set(n_ch, false), alpha_set(n_ch, false);
  for (const auto& name : cfg.theta_channels) theta_set[cfg.layout.index_of(name)] = true;
  for (const auto& name : cfg.alpha_channels) alpha_set[cfg.layout.index_of(name)] = true;
  const std::array<double, 3> theta_g{cfg.theta_gain.ns, cfg.theta_gain.ld, cfg.theta_gain.hd};
  const std::array<double, 3> alpha_g{cfg.alpha_gain.ns, cfg.alpha_gain.ld, cfg.alpha_gain.hd};
  const detail::Resonator theta_proto(cfg.theta_hz, cfg.theta_bw_hz, cfg.fs);
  const detail::Resonator alpha_proto(cfg.alpha_hz, cfg.alpha_bw_hz, cfg.fs);
  const auto warmup = static_cast<std::size_t>(2.0 * cfg.fs);

  for (std::size_t c = 0; c < n_ch; ++c) {
    const Channel& ch = cfg.layout[c];
    std::mt19937_64 rng(derive_seed(seed, 2 + c));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    auto row = rec.data.row(static_cast<Eigen::Index>(c));
    const double line_phase = phase(rng);
    const double w_line = 2.0 * M_PI * cfg.line_hz / cfg.fs;

    if (ch.kind == ChannelKind::EEG) {
      const auto bg = detail::pink_noise(n, cfg.fs, cfg.pink_exponent, rng);
      auto theta = theta_proto, alpha = alpha_proto;
      const double ts = cfg.theta_uv / theta.noise_gain, as = cfg.alpha_uv / alpha.noise_gain;
      for (std::size_t i = 0; i < warmup; ++i) {
        theta.step(normal(rng));
        alpha.step(normal(rng));
      }
      const double wb = cfg.blink_eeg_scale * detail::blink_weight(ch);
      for (std::size_t i = 0; i < n; ++i) {
        const double th = ts * theta.step(normal(rng)) * (theta_set[c] ? theta_g[cond[i]] : theta_g[0]);
        const double al = as * alpha.step(normal(rng)) * (alpha_set[c] ? alpha_g[cond[i]] : alpha_g[0]);
        row(static_cast<Eigen::Index>(i)) = cfg.background_uv * bg[i] + th + al + wb * blink[i] +
                                            cfg.line_uv * std::sin(w_line * static_cast<double>(i) + line_phase);
      }
    } else {
      const double wb = detail::eog_blink_weight(ch.name);
      for (std::size_t i = 0; i < n; ++i)
        row(static_cast<Eigen::Index>(i)) = cfg.eog_noise_uv * normal(rng) + wb * blink[i] +
                                            cfg.line_uv * std::sin(w_line * static_cast<double>(i) + line_phase);
    }
  }
  rec.data = rec.data.cwiseMax(-cfg.ceiling_uv).cwiseMin(cfg.ceiling_uv);

  std::array<std::size_t, 5> census{};
  for (const auto& e : rec.markers) census[static_cast<std::size_t>(e.tag)] += static_cast<std::size_t>(e.duration);
  nlohmann::json blinks = nlohmann::json::array();
  for (const auto& b : out.blinks) blinks.push_back({{"peak", b.peak}, {"amplitude_uv", b.amplitude}});
  nlohmann::json samples_per_tag;
  for (Tag t : kTags) samples_per_tag[std::string(to_string(t))] = census[static_cast<std::size_t>(t)];
  out.manifest = {{"seed", seed},
                  {"config", cfg.to_json()},
                  {"config_hash", fingerprint(cfg.to_json())},
                  {"n_samples", total},
                  {"planted", {{"theta", {{"channels", cfg.theta_channels}, {"gain", cfg.theta_gain.to_json()}}},
                               {"alpha", {{"channels", cfg.alpha_channels}, {"gain", cfg.alpha_gain.to_json()}}}}},
                  {"samples_per_tag", samples_per_tag},
                  {"blinks", blinks}};
  return out;
}

/// Mean pairwise Euclidean distance between the class means of the log
/// band-power features; grows with the separation the planted gains induce.
inline double separability_proxy(const EpochSet& epochs, const WelchParams& welch = {}) {
  const FeatureMatrix fm = psd_features(epochs, welch);
  std::array<Eigen::RowVectorXd, kNumConditions> means;
  std::array<double, kNumConditions> counts{};
  for (auto& m : means) m = Eigen::RowVectorXd::Zero(fm.n_cols());
  for (Eigen::Index i = 0; i < fm.n_rows(); ++i) {
    const auto c = static_cast<std::size_t>(class_index(fm.tags[static_cast<std::size_t>(i)]));
    means[c] += fm.rows.row(i);
    counts[c] += 1.0;
  }
  for (std::size_t c = 0; c < means.size(); ++c) {
    detail::require(counts[c] > 0.0, "separability needs epochs of every condition");
    means[c] /= counts[c];
  }
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < means.size(); ++a)
    for (std::size_t b = a + 1; b < means.size(); ++b, ++pairs) sum += (means[a] - means[b]).norm();
  return sum / pairs;
}

}  // namespace distractnet
