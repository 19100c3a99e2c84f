#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "distractnet/sigcore/epochs.hpp"
#include "distractnet/sigcore/recording.hpp"

namespace testing_support {

using namespace distractnet;

inline std::vector<double> sine(std::size_t n, double f, double fs, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs + phase);
  return x;
}

inline ChannelLayout eeg_layout(std::size_t n) {
  std::vector<Channel> ch;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    ch.push_back(Channel{"E" + std::to_string(i), ChannelKind::EEG, 0.5 * std::cos(a), 0.5 * std::sin(a)});
  }
  return ChannelLayout(std::move(ch));
}

inline Recording make_recording(const SignalMatrix& data, double fs, ChannelLayout layout, std::vector<Event> markers = {}) {
  Recording r;
  r.data = data;
  r.fs = fs;
  r.layout = std::move(layout);
  r.markers = std::move(markers);
  return r;
}

/// Gaussian epochs with a class-specific additive offset on every sample.
inline EpochSet toy_epochs(std::size_t per_class, std::size_t channels, std::size_t samples, double offset,
                           std::uint64_t seed, double noise = 1.0) {
  EpochSet e;
  e.n_channels = channels;
  e.n_samples = samples;
  e.fs = 100.0;
  e.layout = eeg_layout(channels);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  const Tag tags[3] = {Tag::RestPost, Tag::Level1, Tag::Level2};
  for (std::size_t i = 0; i < per_class * 3; ++i) {
    const int c = static_cast<int>(i % 3);
    e.tags.push_back(tags[c]);
    for (std::size_t ch = 0; ch < channels; ++ch)
      for (std::size_t s = 0; s < samples; ++s)
        e.data.push_back(noise * n01(rng) + offset * (c - 1) * (ch % 2 == 0 ? 1.0 : -1.0));
  }
  e.n_epochs = e.tags.size();
  return e;
}

}  // namespace testing_support
