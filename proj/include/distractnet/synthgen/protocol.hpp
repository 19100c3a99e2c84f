#pragma once

// Session script: shuffled task trials of three difficulty levels, a rest
// after each trial, and one long rest between sessions.

#include <algorithm>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "distractnet/error.hpp"
#include "distractnet/sigcore/label.hpp"
#include "distractnet/sigcore/layout.hpp"
#include "distractnet/sigcore/recording.hpp"

namespace distractnet {

/// Oscillator gain per condition (amplitude factor; power scales with its square).
struct ConditionGains {
  double ns = 1.0;
  double ld = 1.0;
  double hd = 1.0;

  double operator[](Condition c) const { return c == Condition::NS ? ns : (c == Condition::LD ? ld : hd); }
  nlohmann::json to_json() const { return {{"NS", ns}, {"LD", ld}, {"HD", hd}}; }
};

struct ProtocolConfig {
  std::size_t trials_per_level = 40;
  double trial_s = 10.0;
  double rest_post_s = 4.0;
  /// Unset means one rest after every trial (3 x trials_per_level).
  std::optional<std::size_t> rest_post_count;
  double inter_session_rest_s = 180.0;
  std::size_t sessions = 2;
  double fs = 1000.0;
  ChannelLayout layout = default_layout();

  // Planted effects.
  std::vector<std::string> theta_channels{"CP5", "CP1", "CPz", "CP2", "CP6"};
  std::vector<std::string> alpha_channels{"C3", "Cz", "C4"};
  ConditionGains theta_gain{1.0, 1.6, 2.4};
  ConditionGains alpha_gain{1.0, 1.6, 2.4};

  // Signal content, microvolts.
  double background_uv = 10.0;  // rms of the 1/f background
  double pink_exponent = 1.0;   // power ~ 1/f^exponent
  double theta_uv = 4.0;        // rms of the theta oscillator at gain 1
  double theta_hz = 6.0;
  double theta_bw_hz = 3.0;
  double alpha_uv = 5.0;
  double alpha_hz = 10.5;
  double alpha_bw_hz = 3.0;
  double line_uv = 20.0;
  double line_hz = 60.0;
  double blink_rate_hz = 0.2;
  double blink_uv = 150.0;  // peak at the upper vertical EOG electrode
  double blink_width_s = 0.3;
  double blink_eeg_scale = 1.0;  // frontal pole weight relative to VEOGU
  double eog_noise_uv = 5.0;
  double ceiling_uv = 500.0;

  std::size_t total_trials() const { return 3 * trials_per_level; }
  std::size_t rests() const { return rest_post_count.value_or(total_trials()); }
  std::int64_t samples(double seconds) const { return static_cast<std::int64_t>(std::llround(seconds * fs)); }

  void validate() const {
    detail::require(fs > 0.0, "fs must be positive");
    detail::require(trial_s >= 0.0 && rest_post_s >= 0.0 && inter_session_rest_s >= 0.0,
                    "durations must be non-negative");
    detail::require(sessions >= 1, "need at least one session");
    for (const auto* g : {&theta_gain, &alpha_gain}) {
      detail::require(g->ns > 0.0, "NS gain must be positive");
      detail::require(g->ld >= 1.0 && g->hd >= 1.0, "task-level gains must be >= 1");
    }
    detail::require(background_uv >= 0.0 && theta_uv >= 0.0 && alpha_uv >= 0.0 && line_uv >= 0.0 &&
                        blink_uv >= 0.0 && eog_noise_uv >= 0.0 && blink_rate_hz >= 0.0,
                    "amplitudes and rates must be non-negative");
    detail::require(blink_width_s > 0.0, "blink width must be positive");
    detail::require(ceiling_uv > 0.0, "amplitude ceiling must be positive");
    for (double f : {theta_hz, alpha_hz})
      detail::require(f > 0.0 && f < fs / 2.0, "oscillator frequency must lie below Nyquist");
    detail::require(theta_bw_hz > 0.0 && alpha_bw_hz > 0.0, "oscillator bandwidth must be positive");
    for (const auto& name : theta_channels) layout.index_of(name);
    for (const auto& name : alpha_channels) layout.index_of(name);
    detail::require(layout.count(ChannelKind::EEG) >= 1, "layout has no EEG channels");
  }

  nlohmann::json to_json() const {
    nlohmann::json channels = nlohmann::json::array();
    for (const auto& c : layout.channels()) channels.push_back(c.name);
    return {{"trials_per_level", trials_per_level},
            {"trial_s", trial_s},
            {"rest_post_s", rest_post_s},
            {"rest_post_count", rests()},
            {"inter_session_rest_s", inter_session_rest_s},
            {"sessions", sessions},
            {"fs", fs},
            {"channels", channels},
            {"theta", {{"channels", theta_channels}, {"gain", theta_gain.to_json()}, {"uv", theta_uv},
                       {"hz", theta_hz}, {"bw_hz", theta_bw_hz}}},
            {"alpha", {{"channels", alpha_channels}, {"gain", alpha_gain.to_json()}, {"uv", alpha_uv},
                       {"hz", alpha_hz}, {"bw_hz", alpha_bw_hz}}},
            {"background_uv", background_uv},
            {"pink_exponent", pink_exponent},
            {"line", {{"uv", line_uv}, {"hz", line_hz}}},
            {"blink", {{"rate_hz", blink_rate_hz}, {"uv", blink_uv}, {"width_s", blink_width_s},
                       {"eeg_scale", blink_eeg_scale}}},
            {"eog_noise_uv", eog_noise_uv},
            {"ceiling_uv", ceiling_uv}};
  }
};

/// Event list covering [0, total) without gaps. Trials are shuffled across
/// levels and split evenly over sessions; one rest follows each of the first
/// `rests()` trials and any surplus rests close the last session.
inline std::vector<Event> session_script(const ProtocolConfig& cfg, std::uint64_t seed) {
  std::vector<Tag> trials;
  for (Tag t : {Tag::Level1, Tag::Level2, Tag::Level3}) trials.insert(trials.end(), cfg.trials_per_level, t);
  std::mt19937_64 rng(seed);
  std::shuffle(trials.begin(), trials.end(), rng);

  const auto trial = cfg.samples(cfg.trial_s);
  const auto rest = cfg.samples(cfg.rest_post_s);
  const auto inter = cfg.samples(cfg.inter_session_rest_s);
  std::vector<Event> ev;
  std::int64_t t = 0;
  auto push = [&](std::int64_t dur, Tag tag) {
    if (dur <= 0) return;
    ev.push_back({t, dur, tag});
    t += dur;
  };
  std::size_t rests_left = cfg.rests();
  const std::size_t n = trials.size();
  for (std::size_t s = 0; s < cfg.sessions; ++s) {
    const std::size_t begin = n * s / cfg.sessions, end = n * (s + 1) / cfg.sessions;
    for (std::size_t i = begin; i < end; ++i) {
      push(trial, trials[i]);
      if (rests_left > 0) {
        push(rest, Tag::RestPost);
        --rests_left;
      }
    }
    if (s + 1 == cfg.sessions)
      for (; rests_left > 0; --rests_left) push(rest, Tag::RestPost);
    else
      push(inter, Tag::RestInterSession);
  }
  return ev;
}

}  // namespace distractnet
