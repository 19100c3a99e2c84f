#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "distractnet/error.hpp"
#include "distractnet/sigcore/label.hpp"
#include "distractnet/sigcore/layout.hpp"

namespace distractnet {

/// Channels x samples, each channel row contiguous.
using SignalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Event {
  std::int64_t onset = 0;     // sample index
  std::int64_t duration = 0;  // samples
  Tag tag = Tag::RestPost;

  std::int64_t end() const { return onset + duration; }
  bool operator==(const Event&) const = default;
};

/// Continuous multichannel signal in microvolts.
struct Recording {
  SignalMatrix data;
  double fs = 1000.0;
  ChannelLayout layout;
  std::vector<Event> markers;

  Eigen::Index n_channels() const { return data.rows(); }
  Eigen::Index n_samples() const { return data.cols(); }

  void validate() const {
    detail::require(fs > 0.0, "sampling rate must be positive");
    detail::require(static_cast<std::size_t>(data.rows()) == layout.size(),
                    "data rows do not match channel layout size");
    detail::require(data.allFinite(), "recording contains non-finite samples");
    std::vector<Event> sorted = markers;
    std::sort(sorted.begin(), sorted.end(),
              [](const Event& a, const Event& b) { return a.onset < b.onset; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const auto& e = sorted[i];
      detail::require(e.onset >= 0 && e.duration >= 0, "event with negative onset or duration");
      detail::require(e.end() <= data.cols(), "event extends past the end of the recording");
      if (i > 0) detail::require(sorted[i - 1].end() <= e.onset, "overlapping events");
    }
  }

  /// Rows of `data` restricted to the given channel indices.
  Recording select_channels(const std::vector<std::size_t>& idx) const {
    Recording out;
    out.fs = fs;
    out.markers = markers;
    out.layout = layout.subset(idx);
    out.data.resize(static_cast<Eigen::Index>(idx.size()), data.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
      out.data.row(static_cast<Eigen::Index>(r)) = data.row(static_cast<Eigen::Index>(idx[r]));
    return out;
  }
};

}  // namespace distractnet
