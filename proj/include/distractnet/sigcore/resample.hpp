#pragma once

#include "distractnet/error.hpp"
#include "distractnet/sigcore/recording.hpp"

namespace distractnet {

/// Keeps every `factor`-th sample starting at index 0 (ceil(n / factor)
/// samples). The caller is responsible for band-limiting first. Marker onsets
/// and durations are floor-divided.
inline Recording decimate(const Recording& rec, int factor) {
  detail::require(factor >= 1, "decimation factor must be >= 1");
  if (factor == 1) return rec;
  const Eigen::Index n = rec.n_samples();
  const Eigen::Index m = (n + factor - 1) / factor;
  Recording out;
  out.fs = rec.fs / factor;
  out.layout = rec.layout;
  out.data.resize(rec.n_channels(), m);
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c)
    for (Eigen::Index j = 0; j < m; ++j) out.data(c, j) = rec.data(c, j * factor);
  out.markers.reserve(rec.markers.size());
  for (const auto& e : rec.markers)
    out.markers.push_back(Event{e.onset / factor, e.duration / factor, e.tag});
  return out;
}

}  // namespace distractnet
