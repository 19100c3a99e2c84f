#pragma once

// On-disk formats: a JSON header next to a raw little-endian float32 payload,
// channel-major. Epoch sets add a labels array and are stored epoch by epoch.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "distractnet/error.hpp"
#include "distractnet/sigcore/epochs.hpp"
#include "distractnet/sigcore/recording.hpp"

namespace distractnet {

static_assert(std::endian::native == std::endian::little, "payload I/O assumes a little-endian host");

namespace io {

namespace fs = std::filesystem;

inline fs::path header_path(const fs::path& stem) { return fs::path(stem.string() + ".json"); }
inline fs::path payload_path(const fs::path& stem) { return fs::path(stem.string() + ".bin"); }

inline void write_f32(const fs::path& path, const double* values, std::size_t n) {
  std::vector<float> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(values[i]);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!os) throw InputError("short write to '" + path.string() + "'");
}

inline std::vector<double> read_f32(const fs::path& path, std::size_t n) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open payload '" + path.string() + "'");
  std::vector<float> buf(n);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<std::size_t>(is.gcount()) != n * sizeof(float))
    throw InputError("payload '" + path.string() + "' is shorter than its header declares");
  return {buf.begin(), buf.end()};
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
}

inline nlohmann::json layout_to_json(const ChannelLayout& layout) {
  auto arr = nlohmann::json::array();
  for (const auto& ch : layout.channels())
    arr.push_back({{"name", ch.name},
                   {"kind", ch.kind == ChannelKind::EEG ? "EEG" : "EOG"},
                   {"x", ch.x},
                   {"y", ch.y}});
  return arr;
}

inline ChannelLayout layout_from_json(const nlohmann::json& arr) {
  std::vector<Channel> chans;
  for (const auto& c : arr) {
    const std::string kind = c.at("kind").get<std::string>();
    detail::require(kind == "EEG" || kind == "EOG", "channel kind must be EEG or EOG");
    chans.push_back(Channel{c.at("name").get<std::string>(),
                            kind == "EEG" ? ChannelKind::EEG : ChannelKind::EOG,
                            c.at("x").get<double>(), c.at("y").get<double>()});
  }
  return ChannelLayout(std::move(chans));
}

inline void check_format(const nlohmann::json& h) {
  detail::require(h.value("dtype", "") == "f32le", "unsupported dtype (expected f32le)");
  detail::require(h.value("order", "") == "channel-major",
                  "unsupported sample order (expected channel-major)");
}

/// Writes `<stem>.json` and `<stem>.bin`.
inline void write_recording(const fs::path& stem, const Recording& rec) {
  auto markers = nlohmann::json::array();
  for (const auto& e : rec.markers)
    markers.push_back({{"onset", e.onset}, {"duration", e.duration}, {"label", to_string(e.tag)}});
  nlohmann::json h{{"fs", rec.fs},
                   {"channels", layout_to_json(rec.layout)},
                   {"markers", markers},
                   {"dtype", "f32le"},
                   {"order", "channel-major"},
                   {"n_samples", rec.n_samples()},
                   {"payload", payload_path(stem).filename().string()}};
  write_json(header_path(stem), h);
  write_f32(payload_path(stem), rec.data.data(), static_cast<std::size_t>(rec.data.size()));
}

inline Recording read_recording(const fs::path& stem) {
  const auto h = read_json(header_path(stem));
  try {
    check_format(h);
    Recording rec;
    rec.fs = h.at("fs").get<double>();
    rec.layout = layout_from_json(h.at("channels"));
    for (const auto& m : h.at("markers"))
      rec.markers.push_back(Event{m.at("onset").get<std::int64_t>(),
                                  m.at("duration").get<std::int64_t>(),
                                  parse_tag(m.at("label").get<std::string>())});
    const auto ns = h.at("n_samples").get<std::int64_t>();
    const auto nc = static_cast<std::int64_t>(rec.layout.size());
    auto values = read_f32(stem.parent_path() / h.at("payload").get<std::string>(),
                           static_cast<std::size_t>(nc * ns));
    rec.data = Eigen::Map<SignalMatrix>(values.data(), nc, ns);
    rec.validate();
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid recording header '" + header_path(stem).string() + "': " + e.what());
  }
}

inline void write_epochs(const fs::path& stem, const EpochSet& ep) {
  auto labels = nlohmann::json::array();
  for (Tag t : ep.tags) labels.push_back(to_string(t));
  nlohmann::json h{{"fs", ep.fs},
                   {"channels", layout_to_json(ep.layout)},
                   {"markers", nlohmann::json::array()},
                   {"labels", labels},
                   {"dtype", "f32le"},
                   {"order", "channel-major"},
                   {"n_epochs", ep.n_epochs},
                   {"n_samples", ep.n_samples},
                   {"payload", payload_path(stem).filename().string()}};
  write_json(header_path(stem), h);
  write_f32(payload_path(stem), ep.data.data(), ep.data.size());
}

inline EpochSet read_epochs(const fs::path& stem) {
  const auto h = read_json(header_path(stem));
  try {
    check_format(h);
    EpochSet ep;
    ep.fs = h.at("fs").get<double>();
    ep.layout = layout_from_json(h.at("channels"));
    ep.n_channels = ep.layout.size();
    ep.n_epochs = h.at("n_epochs").get<std::size_t>();
    ep.n_samples = h.at("n_samples").get<std::size_t>();
    for (const auto& l : h.at("labels")) ep.tags.push_back(parse_tag(l.get<std::string>()));
    const auto values = read_f32(stem.parent_path() / h.at("payload").get<std::string>(),
                                 ep.n_epochs * ep.epoch_size());
    ep.data.assign(values.begin(), values.end());
    ep.validate();
    return ep;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid epoch header '" + header_path(stem).string() + "': " + e.what());
  }
}

}  // namespace io
}  // namespace distractnet
