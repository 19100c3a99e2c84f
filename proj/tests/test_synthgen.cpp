#include <gtest/gtest.h>

#include "distractnet/evalstats/topography.hpp"
#include "distractnet/sigcore/ica.hpp"
#include "distractnet/sigcore/pipeline.hpp"
#include "distractnet/synthgen/generator.hpp"

using namespace distractnet;

namespace {

// Desk-scale protocol sampled at 100 Hz so epochs can be cut from the raw
// recording; line noise would alias at this rate and is switched off.
ProtocolConfig fast_protocol(std::size_t trials_per_level) {
  ProtocolConfig c;
  c.trials_per_level = trials_per_level;
  c.fs = 100.0;
  c.line_uv = 0.0;
  return c;
}

double theta_power(const EpochSet& e, std::size_t channel, Condition cond) {
  const auto band = canonical_band(BandName::Theta);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < e.n_epochs; ++i) {
    if (e.condition(i) != cond) continue;
    SignalMatrix row = e.epoch(i).row(static_cast<Eigen::Index>(channel));
    sum += band_power(welch_psd(row, e.fs, WelchParams{}), band)(0);
    ++n;
  }
  return sum / static_cast<double>(n);
}

}  // namespace

TEST(Protocol, ScriptCoversTimelineWithoutGaps) {
  const ProtocolConfig cfg;
  const auto ev = session_script(cfg, 3);
  std::int64_t t = 0;
  std::array<std::size_t, 5> count{};
  for (const auto& e : ev) {
    EXPECT_EQ(e.onset, t);
    t = e.end();
    ++count[static_cast<std::size_t>(e.tag)];
  }
  EXPECT_EQ(count[static_cast<std::size_t>(Tag::Level1)], 40u);
  EXPECT_EQ(count[static_cast<std::size_t>(Tag::Level2)], 40u);
  EXPECT_EQ(count[static_cast<std::size_t>(Tag::Level3)], 40u);
  EXPECT_EQ(count[static_cast<std::size_t>(Tag::RestPost)], 120u);
  EXPECT_EQ(count[static_cast<std::size_t>(Tag::RestInterSession)], 1u);
  EXPECT_EQ(t, (120 * 14 + 180) * 1000);
  EXPECT_NE(session_script(cfg, 4), ev);  // trial order is shuffled per seed
}

TEST(Protocol, ExplicitRestCount) {
  ProtocolConfig cfg = fast_protocol(2);
  cfg.rest_post_count = 10;  // 6 after trials, 4 closing the last session
  std::size_t rests = 0;
  for (const auto& e : session_script(cfg, 1)) rests += e.tag == Tag::RestPost;
  EXPECT_EQ(rests, 10u);
}

TEST(Protocol, Validation) {
  ProtocolConfig cfg;
  cfg.theta_gain.ld = 0.9;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = ProtocolConfig{};
  cfg.alpha_channels = {"Cz", "NotAChannel"};
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = ProtocolConfig{};
  cfg.theta_hz = 600.0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = ProtocolConfig{};
  cfg.sessions = 0;
  EXPECT_THROW(cfg.validate(), InputError);
}

TEST(Generator, CensusFormulaForAnyTrialCount) {
  for (std::size_t T : {1u, 3u, 7u, 40u}) {
    const auto subj = generate_subject(fast_protocol(T), T);
    const auto seg = segment_epochs(subj.recording, 1.0, 0.0);
    EXPECT_EQ(seg.epochs.n_epochs, 3 * 10 * T + 4 * 3 * T + 180) << T;
    EXPECT_EQ(seg.epochs.count(Tag::Level1), 10 * T);
    EXPECT_EQ(seg.epochs.count(Tag::RestPost), 12 * T);
    EXPECT_EQ(seg.epochs.count(Tag::RestInterSession), 180u);
  }
}

TEST(Generator, DeterministicPerSeed) {
  const auto cfg = fast_protocol(2);
  const auto a = generate_subject(cfg, 5), b = generate_subject(cfg, 5), c = generate_subject(cfg, 6);
  EXPECT_TRUE(a.recording.data == b.recording.data);
  EXPECT_EQ(a.manifest.dump(), b.manifest.dump());
  EXPECT_FALSE(a.recording.data == c.recording.data);
}

TEST(Generator, ManifestRecordsGroundTruth) {
  const auto cfg = fast_protocol(2);
  const auto s = generate_subject(cfg, 9);
  EXPECT_EQ(s.manifest["planted"]["theta"]["channels"], nlohmann::json(cfg.theta_channels));
  EXPECT_EQ(s.manifest["planted"]["alpha"]["gain"]["HD"], cfg.alpha_gain.hd);
  EXPECT_EQ(s.manifest["blinks"].size(), s.blinks.size());
  EXPECT_EQ(s.manifest["n_samples"].get<Eigen::Index>(), s.recording.n_samples());
  EXPECT_EQ(s.manifest["samples_per_tag"]["RestInterSession"], 18000);
  EXPECT_GT(s.blinks.size(), 0u);
}

TEST(Generator, FiniteAndBelowCeiling) {
  auto cfg = fast_protocol(1);
  cfg.ceiling_uv = 30.0;
  const auto s = generate_subject(cfg, 2);
  EXPECT_TRUE(s.recording.data.allFinite());
  EXPECT_LE(s.recording.data.cwiseAbs().maxCoeff(), 30.0);
}

TEST(Generator, PinkBackgroundHasUnitRmsAndOneOverFSlope) {
  std::mt19937_64 rng(4);
  const auto x = detail::pink_noise(1 << 16, 100.0, 1.0, rng);
  double ss = 0.0;
  for (double v : x) ss += v * v;
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(x.size())), 1.0, 1e-9);

  SignalMatrix row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const auto spec = welch_psd(row, 100.0, {400, 200});
  // Least-squares slope of log power against log frequency over 1-40 Hz.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (Eigen::Index k = 0; k < spec.freqs.size(); ++k) {
    if (spec.freqs(k) < 1.0 || spec.freqs(k) > 40.0) continue;
    const double lx = std::log(spec.freqs(k)), ly = std::log(spec.power(0, k));
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly, ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, -1.0, 0.1);
}

TEST(Generator, PlantedThetaGainSetsPowerRatio) {
  auto cfg = fast_protocol(10);
  cfg.theta_channels = {"CPz"};
  cfg.theta_gain = {1.0, 1.5, 2.0};
  const auto s = generate_subject(cfg, 11);
  const auto e = segment_epochs(s.recording, 1.0, 0.0).epochs;
  const auto cpz = cfg.layout.index_of("CPz");
  const double ratio = theta_power(e, cpz, Condition::HD) / theta_power(e, cpz, Condition::NS);
  EXPECT_GE(ratio, 1.5 * 1.5);
  EXPECT_LE(ratio, 2.5 * 2.5);
  // The planted channel set is the only one affected.
  const auto oz = cfg.layout.index_of("O1");
  EXPECT_NEAR(theta_power(e, oz, Condition::HD) / theta_power(e, oz, Condition::NS), 1.0, 0.25);
}

TEST(Generator, SeparabilityGrowsWithGain) {
  double last = 0.0;
  for (double g : {1.0, 1.4, 1.8, 2.4, 3.0}) {
    auto cfg = fast_protocol(4);
    cfg.theta_gain = {1.0, 1.0 + (g - 1.0) / 2.0, g};
    cfg.alpha_gain = cfg.theta_gain;
    const auto e = segment_epochs(generate_subject(cfg, 21).recording, 1.0, 0.0).epochs;
    const double s = separability_proxy(e);
    EXPECT_GT(s, last) << g;
    last = s;
  }
}

TEST(Generator, NoBlinksMeansNoOcularComponents) {
  auto cfg = fast_protocol(2);
  cfg.blink_rate_hz = 0.0;
  cfg.inter_session_rest_s = 30.0;
  int clean = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto s = generate_subject(cfg, static_cast<std::uint64_t>(seed));
    EXPECT_TRUE(s.blinks.empty());
    const auto ica = fit_ica(s.recording, 30, static_cast<std::uint64_t>(seed), IcaOptions{1e-6, 200, 50000});
    clean += clean_artifacts(ica, s.recording, default_eog_names(), 0.7).flagged.empty();
  }
  EXPECT_GE(static_cast<double>(clean) / seeds, 0.95);
}

TEST(Generator, PlantedBlinksAreRemoved) {
  auto cfg = fast_protocol(2);
  cfg.inter_session_rest_s = 30.0;
  cfg.blink_rate_hz = 0.5;
  const auto s = generate_subject(cfg, 3);
  const auto ica = fit_ica(s.recording, 30, 3, IcaOptions{1e-6, 200, 50000});
  const auto res = clean_artifacts(ica, s.recording, default_eog_names(), 0.7);
  EXPECT_GE(res.flagged.size(), 1u);
  const auto fp1 = static_cast<Eigen::Index>(s.recording.layout.index_of("Fp1"));
  const auto veog = static_cast<Eigen::Index>(s.recording.layout.index_of("VEOGU"));
  const auto fp1_clean = static_cast<Eigen::Index>(res.recording.layout.index_of("Fp1"));
  const double before = std::abs(pearson(s.recording.data.row(fp1), s.recording.data.row(veog)));
  const double after = std::abs(pearson(res.recording.data.row(fp1_clean), s.recording.data.row(veog)));
  EXPECT_GT(before, 0.5);
  EXPECT_LT(after, 0.5 * before);
}
