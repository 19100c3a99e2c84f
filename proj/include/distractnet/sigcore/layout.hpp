#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "distractnet/error.hpp"

namespace distractnet {

enum class ChannelKind { EEG, EOG };

struct Channel {
  std::string name;
  ChannelKind kind = ChannelKind::EEG;
  // Azimuthal projection onto the unit disc; +x is right ear, +y is nose.
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Channel&) const = default;
};

class ChannelLayout {
 public:
  ChannelLayout() = default;
  explicit ChannelLayout(std::vector<Channel> channels) : channels_(std::move(channels)) {
    validate();
  }

  void validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& ch : channels_) {
      detail::require(!ch.name.empty(), "channel with empty name");
      detail::require(seen.insert(ch.name).second, "duplicate channel name '" + ch.name + "'");
      if (ch.kind == ChannelKind::EEG)
        detail::require(std::hypot(ch.x, ch.y) <= 1.0 + 1e-12,
                        "EEG channel '" + ch.name + "' lies outside the unit disc");
    }
  }

  std::size_t size() const { return channels_.size(); }
  bool empty() const { return channels_.empty(); }
  const Channel& operator[](std::size_t i) const { return channels_[i]; }
  const std::vector<Channel>& channels() const { return channels_; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < channels_.size(); ++i)
      if (channels_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t index_of(const std::string& name) const {
    auto i = find(name);
    if (!i) throw InputError("channel '" + name + "' not in layout");
    return *i;
  }

  std::vector<std::size_t> indices_of(ChannelKind kind) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < channels_.size(); ++i)
      if (channels_[i].kind == kind) out.push_back(i);
    return out;
  }

  std::size_t count(ChannelKind kind) const { return indices_of(kind).size(); }

  ChannelLayout subset(const std::vector<std::size_t>& idx) const {
    std::vector<Channel> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(channels_.at(i));
    return ChannelLayout(std::move(out));
  }

  bool operator==(const ChannelLayout&) const = default;

 private:
  std::vector<Channel> channels_;
};

namespace detail {

// Inclination from vertex and azimuth (counter-clockwise from the right ear), degrees.
inline Channel place(std::string name, double incl_deg, double azim_deg) {
  const double r = 0.95 * incl_deg / 90.0;
  const double az = azim_deg * std::numbers::pi / 180.0;
  return Channel{std::move(name), ChannelKind::EEG, r * std::cos(az), r * std::sin(az)};
}

}  // namespace detail

/// 30 EEG channels on an approximate 10/20 grid (FCz reference and AFz ground
/// are not recorded) followed by four EOG channels.
inline ChannelLayout default_layout() {
  using detail::place;
  std::vector<Channel> ch{
      place("Fp1", 90, 108), place("Fp2", 90, 72),  place("F7", 90, 144),
      place("F3", 60, 129),  place("Fz", 45, 90),   place("F4", 60, 51),
      place("F8", 90, 36),   place("FC5", 69, 159), place("FC1", 31, 134),
      place("FC2", 31, 46),  place("FC6", 69, 21),  place("T7", 90, 180),
      place("C3", 45, 180),  place("Cz", 0, 0),     place("C4", 45, 0),
      place("T8", 90, 0),    place("CP5", 69, 201), place("CP1", 31, 226),
      place("CPz", 23, 270), place("CP2", 31, 314), place("CP6", 69, 339),
      place("P7", 90, 216),  place("P3", 60, 231),  place("Pz", 45, 270),
      place("P4", 60, 309),  place("P8", 90, 324),  place("PO3", 72, 248),
      place("PO4", 72, 292), place("O1", 90, 252),  place("O2", 90, 288),
  };
  for (const char* eog : {"HEOGL", "HEOGR", "VEOGU", "VEOGL"})
    ch.push_back(Channel{eog, ChannelKind::EOG, 0.0, 0.0});
  return ChannelLayout(std::move(ch));
}

inline const std::vector<std::string>& default_eog_names() {
  static const std::vector<std::string> names{"HEOGL", "HEOGR", "VEOGU", "VEOGL"};
  return names;
}

}  // namespace distractnet
