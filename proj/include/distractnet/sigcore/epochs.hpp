#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "distractnet/error.hpp"
#include "distractnet/sigcore/recording.hpp"

namespace distractnet {

/// Fixed-length labelled windows, stored epoch-major then channel-major.
struct EpochSet {
  std::vector<double, Eigen::aligned_allocator<double>> data;  // aligned: see ad::Tensor
  std::size_t n_epochs = 0;
  std::size_t n_channels = 0;
  std::size_t n_samples = 0;
  std::vector<Tag> tags;
  double fs = 0.0;
  ChannelLayout layout;

  using ConstMap = Eigen::Map<const SignalMatrix>;
  using Map = Eigen::Map<SignalMatrix>;

  std::size_t epoch_size() const { return n_channels * n_samples; }

  ConstMap epoch(std::size_t i) const {
    return ConstMap(data.data() + i * epoch_size(), static_cast<Eigen::Index>(n_channels),
                    static_cast<Eigen::Index>(n_samples));
  }
  Map epoch(std::size_t i) {
    return Map(data.data() + i * epoch_size(), static_cast<Eigen::Index>(n_channels),
               static_cast<Eigen::Index>(n_samples));
  }

  Condition condition(std::size_t i) const { return condition_of(tags[i]); }
  int class_of(std::size_t i) const { return class_index(tags[i]); }

  std::array<std::size_t, kNumConditions> class_counts() const {
    std::array<std::size_t, kNumConditions> c{};
    for (Tag t : tags) ++c[static_cast<std::size_t>(class_index(t))];
    return c;
  }

  std::size_t count(Tag t) const { return static_cast<std::size_t>(std::count(tags.begin(), tags.end(), t)); }

  void validate() const {
    detail::require(tags.size() == n_epochs, "label count does not match epoch count");
    detail::require(data.size() == n_epochs * epoch_size(), "epoch payload size mismatch");
    detail::require(layout.size() == n_channels, "layout does not match channel count");
  }

  /// Empty set with the same geometry.
  EpochSet like(std::size_t epochs = 0) const {
    EpochSet e;
    e.n_channels = n_channels;
    e.n_samples = n_samples;
    e.fs = fs;
    e.layout = layout;
    e.n_epochs = epochs;
    e.data.assign(epochs * epoch_size(), 0.0);
    e.tags.assign(epochs, Tag::RestPost);
    return e;
  }

  EpochSet subset(const std::vector<std::size_t>& idx) const {
    EpochSet e = like(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const std::size_t src = idx[r];
      detail::require(src < n_epochs, "epoch index out of range");
      std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(src * epoch_size()), epoch_size(),
                  e.data.begin() + static_cast<std::ptrdiff_t>(r * epoch_size()));
      e.tags[r] = tags[src];
    }
    return e;
  }

  void append(const EpochSet& other) {
    if (n_epochs == 0 && data.empty()) {
      *this = other;
      return;
    }
    detail::require(other.n_channels == n_channels && other.n_samples == n_samples,
                    "cannot append epochs of a different shape");
    data.insert(data.end(), other.data.begin(), other.data.end());
    tags.insert(tags.end(), other.tags.begin(), other.tags.end());
    n_epochs += other.n_epochs;
  }
};

struct Segmentation {
  EpochSet epochs;
  std::vector<std::int64_t> onsets;  // first sample of each epoch in the source recording
  bool window_exceeds_all_events = false;
};

/// Cuts windows that lie entirely inside one event, stepping by
/// window - overlap; incomplete trailing windows are dropped.
inline Segmentation segment_epochs(const Recording& rec, double window_s, double overlap_s) {
  detail::require(window_s > 0.0, "window length must be positive");
  detail::require(overlap_s >= 0.0 && overlap_s < window_s, "overlap must be in [0, window)");
  detail::require(!rec.markers.empty(), "recording has no event markers");
  const auto win = static_cast<std::int64_t>(std::llround(window_s * rec.fs));
  const auto step = win - static_cast<std::int64_t>(std::llround(overlap_s * rec.fs));
  detail::require(win >= 1 && step >= 1, "window shorter than one sample");

  std::vector<Event> events = rec.markers;
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.onset < b.onset; });

  Segmentation seg;
  for (const auto& e : events) {
    detail::require(e.onset >= 0 && e.end() <= rec.n_samples(), "event outside the recording");
    for (std::int64_t s = e.onset; s + win <= e.end(); s += step) seg.onsets.push_back(s);
  }

  EpochSet& out = seg.epochs;
  out.n_channels = static_cast<std::size_t>(rec.n_channels());
  out.n_samples = static_cast<std::size_t>(win);
  out.fs = rec.fs;
  out.layout = rec.layout;
  out.n_epochs = seg.onsets.size();
  out.data.resize(out.n_epochs * out.epoch_size());
  std::size_t idx = 0;
  for (const auto& e : events) {
    for (std::int64_t s = e.onset; s + win <= e.end(); s += step, ++idx) {
      out.tags.push_back(e.tag);
      out.epoch(idx) = rec.data.middleCols(s, win);
    }
  }
  seg.window_exceeds_all_events = out.n_epochs == 0;
  return seg;
}

/// Indices kept by random undersampling of every class down to the smallest
/// class count, in ascending (original) order.
inline std::vector<std::size_t> balance_indices(const std::vector<Tag>& tags, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumConditions> by_class;
  for (std::size_t i = 0; i < tags.size(); ++i)
    by_class[static_cast<std::size_t>(class_index(tags[i]))].push_back(i);
  std::size_t target = tags.size();
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].empty())
      throw InputError("cannot balance: class " +
                       std::string(to_string(static_cast<Condition>(c))) + " has no epochs");
    target = std::min(target, by_class[c].size());
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    keep.insert(keep.end(), members.begin(),
                members.begin() + static_cast<std::ptrdiff_t>(target));
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

inline EpochSet balance_classes(const EpochSet& epochs, std::uint64_t seed) {
  return epochs.subset(balance_indices(epochs.tags, seed));
}

}  // namespace distractnet
