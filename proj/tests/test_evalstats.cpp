#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "distractnet/evalstats/crossval.hpp"
#include "distractnet/evalstats/topography.hpp"
#include "oracles/ttest_cases.hpp"
#include "support.hpp"

using namespace distractnet;
using testing_support::toy_epochs;

namespace {

std::span<const double> sp(const std::vector<double>& v) { return {v.data(), v.size()}; }

// Classifier that predicts the true class of every epoch whose first sample is
// positive, and class 0 otherwise. Lets fold scores be computed by hand.
class ThresholdClassifier final : public Classifier {
 public:
  void fit(const EpochSet&, std::uint64_t) override {}
  std::vector<int> predict(const EpochSet& e) override {
    std::vector<int> out;
    for (std::size_t i = 0; i < e.n_epochs; ++i) out.push_back(e.data[i * e.epoch_size()] > 0.0 ? e.class_of(i) : 0);
    return out;
  }
};

class ThrowingClassifier final : public Classifier {
 public:
  explicit ThrowingClassifier(bool numerical) : numerical_(numerical) {}
  void fit(const EpochSet& e, std::uint64_t) override {
    if (numerical_ && e.n_epochs % 2 == 0) throw NumericalError("diverged");
    if (!numerical_) throw InputError("bad input");
  }
  std::vector<int> predict(const EpochSet& e) override { return std::vector<int>(e.n_epochs, 0); }

 private:
  bool numerical_;
};

// Epochs whose per-channel band power is planted per condition: channel c of an
// HD epoch carries a 10 Hz sine of amplitude `hd_amp[c]`, other epochs amplitude 1.
EpochSet alpha_epochs(const std::vector<double>& hd_amp, std::size_t per_class, std::uint64_t seed) {
  const std::size_t nc = hd_amp.size();
  EpochSet e;
  e.n_channels = nc;
  e.n_samples = 100;
  e.fs = 100.0;
  e.layout = testing_support::eeg_layout(nc);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  const Tag tags[3] = {Tag::RestPost, Tag::Level1, Tag::Level3};
  for (std::size_t i = 0; i < 3 * per_class; ++i) {
    const int c = static_cast<int>(i % 3);
    e.tags.push_back(tags[c]);
    for (std::size_t ch = 0; ch < nc; ++ch) {
      const double amp = c == 2 ? hd_amp[ch] : 1.0;
      const double ph = phase(rng);
      for (std::size_t s = 0; s < 100; ++s)
        e.data.push_back(amp * std::sin(6.283185307179586 * 10.0 * static_cast<double>(s) / 100.0 + ph) +
                         0.5 * n01(rng));
    }
  }
  e.n_epochs = e.tags.size();
  return e;
}

}  // namespace

// ---------------------------------------------------------------- t statistics

TEST(Stats, IncompleteBetaMatchesReference) {
  EXPECT_NEAR(incomplete_beta(0.5, 0.5, 0.3), 0.36901011956554536, 1e-13);
  EXPECT_NEAR(incomplete_beta(2, 3, 0.4), 0.5247999999999999, 1e-13);
  EXPECT_NEAR(incomplete_beta(10, 0.5, 0.9), 0.15164090963470994, 1e-13);
  EXPECT_NEAR(incomplete_beta(4.5, 0.5, 0.99), 0.7698749998921366, 1e-13);
  EXPECT_NEAR(incomplete_beta(0.1, 7, 0.01), 0.7961237717987596, 1e-13);
  EXPECT_EQ(incomplete_beta(3, 2, 0.0), 0.0);
  EXPECT_EQ(incomplete_beta(3, 2, 1.0), 1.0);
  EXPECT_THROW(incomplete_beta(0, 2, 0.5), InputError);
}

TEST(Stats, StudentCdfMatchesReference) {
  EXPECT_NEAR(student_t_cdf(2.0, 9), 0.9617235881146495, 1e-13);
  EXPECT_NEAR(student_t_cdf(-1.3, 4), 0.13172579823561206, 1e-13);
  EXPECT_EQ(student_t_cdf(0.0, 3), 0.5);
  EXPECT_NEAR(student_t_cdf(5.2, 20), 0.9999782629647292, 1e-13);
  EXPECT_NEAR(student_t_cdf(2.262157162798205, 9), 0.975, 1e-12);  // tabulated critical value
}

TEST(Stats, PairedTestMatchesReferenceCases) {
  for (const auto& c : oracles::paired_cases()) {
    const auto r = paired_test(sp(c.a), sp(c.b));
    EXPECT_NEAR(r.t, c.t, 1e-9 * std::abs(c.t));
    EXPECT_NEAR(r.p, c.p, 1e-6);
    EXPECT_NEAR(r.p, c.p, 1e-9 * c.p + 1e-15) << "relative agreement, n = " << c.a.size();
    EXPECT_EQ(r.df, static_cast<double>(c.a.size() - 1));
  }
}

TEST(Stats, WelchTestMatchesReferenceCases) {
  for (const auto& c : oracles::welch_cases()) {
    const auto r = welch_test(sp(c.a), sp(c.b));
    EXPECT_NEAR(r.t, c.t, 1e-9 * std::abs(c.t));
    EXPECT_NEAR(r.p, c.p, 1e-9);
  }
}

TEST(Stats, PairedTestDegenerateCases) {
  const std::vector<double> a{0.8, 0.7, 0.9, 0.85};
  auto r = paired_test(sp(a), sp(a));
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
  EXPECT_TRUE(r.zero_variance);

  r = paired_test(std::vector<double>{1.0, 2.0, 3.0}, std::vector<double>{0.5, 1.5, 2.5});
  EXPECT_TRUE(r.zero_variance);
  EXPECT_LT(r.p, 1e-12);

  // Differences of 0.1 that differ from each other only by rounding.
  std::vector<double> b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] - 0.1;
  r = paired_test(sp(a), sp(b));
  EXPECT_TRUE(r.zero_variance);
  EXPECT_LT(r.p, 1e-12);
  EXPECT_GT(r.t, 0.0);

  EXPECT_THROW(paired_test(std::vector<double>{1.0}, std::vector<double>{2.0}), InputError);
  EXPECT_THROW(paired_test(std::vector<double>{1.0, 2.0}, std::vector<double>{2.0}), InputError);
}

TEST(Stats, PairedTestIsSymmetricAndMonotoneInShift) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  std::vector<double> a(10), noise(10);
  for (std::size_t i = 0; i < 10; ++i) {
    a[i] = 0.8 + 0.05 * n01(rng);
    noise[i] = 0.03 * n01(rng);
  }
  double last = 2.0;
  for (double shift = 0.0; shift <= 0.2; shift += 0.01) {
    std::vector<double> b(10);
    for (std::size_t i = 0; i < 10; ++i) b[i] = a[i] - shift + noise[i];
    const double p = paired_test(sp(a), sp(b)).p;
    EXPECT_EQ(p, paired_test(sp(b), sp(a)).p);
    if (shift > 0.05) EXPECT_LT(p, last) << shift;
    last = p;
  }
}

TEST(Stats, AccuracyBounds) {
  const std::vector<int> x{0, 1, 2, 2, 1};
  EXPECT_EQ(accuracy(x, x), 1.0);
  EXPECT_EQ(accuracy(x, std::vector<int>{1, 2, 0, 0, 2}), 0.0);
  EXPECT_DOUBLE_EQ(accuracy(x, std::vector<int>{0, 1, 0, 0, 0}), 0.4);
  EXPECT_THROW(accuracy(x, std::vector<int>{0}), InputError);
}

TEST(Stats, SlopeTestRecoversTrend) {
  std::vector<double> x, y;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 60; ++i) {
    x.push_back(i % 3);
    y.push_back(2.0 * (i % 3) + 0.1 * n01(rng));
  }
  EXPECT_LT(slope_test(x, y).p, 1e-12);
  EXPECT_GT(slope_test(x, y).t, 0.0);
}

// ---------------------------------------------------------------- folds and reports

TEST(Folds, SizesFollowRemainderRule) {
  const auto plan = kfold_split(11, 5, 3);
  std::vector<std::size_t> sizes;
  for (const auto& f : plan.folds) sizes.push_back(f.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 2, 2, 2, 2}));
  for (const auto& f : kfold_split(1200, 5, 3).folds) EXPECT_EQ(f.size(), 240u);
  EXPECT_THROW(kfold_split(4, 5, 1), InputError);
  EXPECT_THROW(kfold_split(10, 1, 1), InputError);
}

TEST(Folds, DisjointCoveringAndSeeded) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 37 + seed * 7;
    const auto plan = kfold_split(n, 5, seed);
    std::vector<int> seen(n, 0);
    std::size_t lo = n, hi = 0;
    for (const auto& f : plan.folds) {
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      for (auto i : f) ++seen[i];
    }
    EXPECT_LE(hi - lo, 1u);
    for (int s : seen) EXPECT_EQ(s, 1);
    const auto tr = plan.training_indices(2);
    EXPECT_EQ(tr.size() + plan.folds[2].size(), n);
    EXPECT_TRUE(std::is_sorted(tr.begin(), tr.end()));
  }
  EXPECT_EQ(kfold_split(50, 5, 9).folds, kfold_split(50, 5, 9).folds);
  EXPECT_NE(kfold_split(50, 5, 9).folds, kfold_split(50, 5, 10).folds);
}

TEST(CrossVal, ScoresMatchHandComputation) {
  auto set = toy_epochs(20, 2, 10, 0.0, 4);
  CvOptions opt;
  opt.seed = 11;
  opt.proposed = "Threshold";
  const auto report = cross_validate(set, {{"Threshold", [] { return std::make_unique<ThresholdClassifier>(); }},
                                           {"Majority", [] { return std::make_unique<MajorityClassifier>(); }}},
                                     opt);
  const auto plan = kfold_split(set.n_epochs, 5, 11);
  const auto* th = report.find("Threshold");
  ASSERT_NE(th, nullptr);
  for (std::size_t f = 0; f < 5; ++f) {
    std::size_t hits = 0;
    for (auto i : plan.folds[f]) {
      const int pred = set.data[i * set.epoch_size()] > 0.0 ? set.class_of(i) : 0;
      hits += pred == set.class_of(i);
    }
    EXPECT_DOUBLE_EQ(th->scores[f], static_cast<double>(hits) / static_cast<double>(plan.folds[f].size()));
  }
  for (const auto& m : report.models) {
    EXPECT_NEAR(m.mean, mean(m.scores), 1e-12);
    EXPECT_NEAR(m.std, sample_std(m.scores), 1e-12);
  }
  const auto* maj = report.find("Majority");
  ASSERT_TRUE(maj->vs_proposed.has_value());
  EXPECT_EQ(maj->vs_proposed->p, paired_test(th->scores, maj->scores).p);
  EXPECT_FALSE(th->vs_proposed.has_value());
}

TEST(CrossVal, SummaryArithmetic) {
  ModelResult m{"x", {0.8, 0.8, 0.9, 0.9, 0.85}, std::vector<std::string>(5), 0, 0, {}};
  detail::summarize(m);
  EXPECT_NEAR(m.mean, 0.85, 1e-12);
  EXPECT_NEAR(m.std, 0.05, 1e-12);  // squared deviations sum to 0.01; sqrt(0.01 / 4)

  std::vector<int> truth(32, 1), pred(32, 1);
  for (int i = 0; i < 5; ++i) pred[static_cast<std::size_t>(i)] = 2;
  EXPECT_EQ(accuracy(pred, truth), 0.84375);
}

TEST(CrossVal, DuplicateSpecsAndThreadCountAgree) {
  const auto set = toy_epochs(10, 3, 100, 0.3, 5);
  const ModelSpec svm{"A", [] { return std::make_unique<PsdSvmClassifier>(); }};
  ModelSpec svm2 = svm;
  svm2.name = "B";
  CvOptions opt;
  opt.seed = 2;
  opt.proposed = "A";
  const auto one = cross_validate(set, {svm, svm2}, opt);
  EXPECT_EQ(one.find("A")->scores, one.find("B")->scores);
  EXPECT_TRUE(one.find("B")->vs_proposed->zero_variance);
  opt.jobs = 3;
  const auto many = cross_validate(set, {svm, svm2}, opt);
  EXPECT_EQ(one.to_json().dump(), many.to_json().dump());
}

TEST(CrossVal, NumericalFailuresAreRecordedOthersPropagate) {
  const auto set = toy_epochs(9, 2, 10, 0.0, 1);  // 27 epochs: training sizes 21 and 22 alternate
  CvOptions opt;
  opt.proposed = "none";
  const auto rep = cross_validate(set, {{"flaky", [] { return std::make_unique<ThrowingClassifier>(true); }}}, opt);
  const auto& m = rep.models.front();
  std::size_t failed = 0;
  for (std::size_t f = 0; f < 5; ++f) {
    if (std::isnan(m.scores[f])) {
      ++failed;
      EXPECT_EQ(m.failures[f], "diverged");
    } else {
      EXPECT_TRUE(m.failures[f].empty());
    }
  }
  EXPECT_GT(failed, 0u);
  EXPECT_LT(failed, 5u);
  EXPECT_TRUE(std::isfinite(m.mean));
  EXPECT_NE(format_table(rep).find("failed"), std::string::npos);
  EXPECT_TRUE(rep.to_json()["models"][0]["scores"].dump().find("null") != std::string::npos);

  EXPECT_THROW(cross_validate(set, {{"bad", [] { return std::make_unique<ThrowingClassifier>(false); }}}, opt),
               InputError);
}

TEST(CrossVal, SubjectAggregation) {
  CvReport r1, r2, r3;
  for (auto* r : {&r1, &r2, &r3}) r->proposed = "P";
  const double p[3] = {0.9, 0.85, 0.95}, b[3] = {0.7, 0.72, 0.8};
  CvReport* rs[3] = {&r1, &r2, &r3};
  for (int s = 0; s < 3; ++s) {
    ModelResult mp{"P", {p[s], p[s]}, {"", ""}, 0, 0, {}}, mb{"B", {b[s], b[s]}, {"", ""}, 0, 0, {}};
    detail::summarize(mp);
    detail::summarize(mb);
    rs[s]->models = {mp, mb};
  }
  const auto agg = aggregate_subjects({r1, r2, r3});
  EXPECT_EQ(agg.unit, "subject");
  EXPECT_EQ(agg.find("P")->scores, (std::vector<double>{0.9, 0.85, 0.95}));
  EXPECT_NEAR(agg.find("B")->vs_proposed->p,
              paired_test(std::vector<double>{0.9, 0.85, 0.95}, std::vector<double>{0.7, 0.72, 0.8}).p, 1e-15);
  EXPECT_NE(format_table(agg).find("Subject"), std::string::npos);
}

TEST(CrossVal, TableLayout) {
  CvReport r;
  r.proposed = "P";
  r.models = {{"P", {0.5, 1.0}, {"", ""}, 0, 0, {}}};
  detail::summarize(r.models[0]);
  const auto t = format_table(r);
  EXPECT_NE(t.find("0.5000"), std::string::npos);
  EXPECT_NE(t.find("Mean (±std)"), std::string::npos);
  EXPECT_NE(t.find("0.7500"), std::string::npos);
}

// ---------------------------------------------------------------- topography

TEST(Topography, PlantedChannelsRankFirst) {
  std::vector<double> amp(8, 1.0);
  amp[2] = amp[5] = 2.0;
  const auto r = topography(alpha_epochs(amp, 30, 1), canonical_band(BandName::Alpha));
  const auto d = r.hd_minus_ns();
  std::vector<Eigen::Index> order(8);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return d(x) > d(y); });
  EXPECT_EQ(std::set<Eigen::Index>(order.begin(), order.begin() + 2), (std::set<Eigen::Index>{2, 5}));
  EXPECT_TRUE(r.significance.mask[2] && r.significance.mask[5]);
  for (int c = 0; c < 8; ++c)
    if (c != 2 && c != 5) EXPECT_GT(r.mean_power(2, 2), r.mean_power(0, c));
}

TEST(Topography, IdenticalSignalsGiveEqualMaps) {
  auto e = alpha_epochs(std::vector<double>(4, 1.0), 1, 2);
  const std::size_t sz = e.epoch_size();
  e.data.resize(sz);
  e.tags = {Tag::RestPost};
  e.n_epochs = 1;
  for (Tag t : {Tag::RestInterSession, Tag::Level1, Tag::Level2, Tag::Level3, Tag::RestPost}) {
    e.data.insert(e.data.end(), e.data.begin(), e.data.begin() + static_cast<std::ptrdiff_t>(sz));
    e.tags.push_back(t);
    ++e.n_epochs;
  }
  const auto r = topography(e, canonical_band(BandName::Alpha));
  EXPECT_LT((r.mean_power.row(0) - r.mean_power.row(1)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((r.mean_power.row(0) - r.mean_power.row(2)).cwiseAbs().maxCoeff(), 1e-9);
  for (double p : r.significance.p) EXPECT_EQ(p, 1.0);
}

TEST(Topography, PermutationEquivariant) {
  std::vector<double> amp{1.0, 1.5, 2.0, 1.0, 3.0};
  const auto e = alpha_epochs(amp, 6, 3);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  EpochSet p = e;
  p.layout = ChannelLayout([&] {
    std::vector<Channel> ch;
    for (auto i : perm) ch.push_back(e.layout[i]);
    return ch;
  }());
  for (std::size_t k = 0; k < e.n_epochs; ++k)
    for (std::size_t c = 0; c < 5; ++c) p.epoch(k).row(static_cast<Eigen::Index>(c)) = e.epoch(k).row(static_cast<Eigen::Index>(perm[c]));
  const auto band = canonical_band(BandName::Alpha);
  const auto a = topography(e, band), b = topography(p, band);
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_EQ(b.channels[c], a.channels[perm[c]]);
    for (int k = 0; k < 3; ++k)
      EXPECT_NEAR(b.mean_power(k, static_cast<Eigen::Index>(c)), a.mean_power(k, static_cast<Eigen::Index>(perm[c])), 1e-12);
    EXPECT_NEAR(b.significance.p[c], a.significance.p[perm[c]], 1e-12);
  }
}

TEST(Topography, MissingConditionIsAnError) {
  auto e = alpha_epochs(std::vector<double>(3, 1.0), 4, 1);
  for (auto& t : e.tags)
    if (t == Tag::Level3) t = Tag::Level1;
  EXPECT_THROW(topography(e, canonical_band(BandName::Theta)), InputError);
}

TEST(Topography, LevelTrendContrast) {
  std::vector<double> amp(4, 1.0);
  amp[1] = 3.0;
  TopoOptions opt;
  opt.contrast = Contrast::LevelTrend;
  const auto r = topography(alpha_epochs(amp, 20, 5), canonical_band(BandName::Alpha), opt);
  EXPECT_TRUE(r.significance.mask[1]);
  EXPECT_EQ(parse_contrast("level-trend"), Contrast::LevelTrend);
  EXPECT_THROW(parse_contrast("anova"), InputError);
}

TEST(Topography, CsvColumns) {
  const auto r = topography(alpha_epochs(std::vector<double>(3, 1.0), 3, 1), canonical_band(BandName::Alpha));
  const auto path = std::filesystem::temp_directory_path() / "distractnet_topo_test.csv";
  write_topography_csv(path, r);
  std::ifstream is(path);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header, "channel,x,y,power_NS,power_LD,power_HD,p,significant");
  EXPECT_EQ(row.rfind("E0,", 0), 0u);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 7);
  std::filesystem::remove(path);
}

// ---------------------------------------------------------------- channel significance

TEST(ChannelSignificance, NullRateAndPowerOnGaussianColumns) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  const Eigen::Index n = 30, m = 2000;
  Eigen::MatrixXd a(n, m), b(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < m; ++c) {
      a(i, c) = n01(rng) + (c < 200 ? 1.0 : 0.0);  // effect size 1 in the first 200 columns
      b(i, c) = n01(rng);
    }
  const auto s = channel_significance(a, b);
  double fp = 0, tp = 0;
  for (Eigen::Index c = 0; c < m; ++c) (c < 200 ? tp : fp) += s.mask[static_cast<std::size_t>(c)];
  EXPECT_GE(fp / 1800.0, 0.03);
  EXPECT_LE(fp / 1800.0, 0.07);
  EXPECT_GE(tp / 200.0, 0.9);

  const auto bonf = channel_significance(a, b, 0.05, true);
  for (std::size_t c = 0; c < static_cast<std::size_t>(m); ++c) EXPECT_EQ(bonf.p[c], std::min(1.0, s.p[c] * 2000.0));
}

TEST(ChannelSignificance, DuplicatedConditionGivesUnitP) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(5, 4);
  for (double p : channel_significance(a, a).p) EXPECT_EQ(p, 1.0);
  EXPECT_THROW(channel_significance(a.topRows(1), a), InputError);
}
