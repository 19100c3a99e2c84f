#pragma once

// k-fold cross-validation over classifier specs, the report type and its
// table rendering.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <json.hpp>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "distractnet/evalstats/stats.hpp"
#include "distractnet/models/classifier.hpp"

namespace distractnet {

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;

  /// Indices outside fold `f`, ascending.
  std::vector<std::size_t> training_indices(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) out.insert(out.end(), folds[g].begin(), folds[g].end());
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// Seeded shuffle of 0..n-1 cut into k contiguous parts; the first n mod k
/// folds take one extra index.
inline FoldPlan kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  detail::require(k >= 2, "k-fold needs k >= 2");
  detail::require(n >= k, "cannot split " + std::to_string(n) + " items into " + std::to_string(k) + " folds");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  FoldPlan plan{k, seed, {}};
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    plan.folds.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                            idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return plan;
}

struct ModelResult {
  std::string name;
  std::vector<double> scores;        // per unit (fold or subject); NaN when failed
  std::vector<std::string> failures;  // empty string for successful units
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation
  std::optional<TestResult> vs_proposed;

  std::vector<double> valid_scores() const {
    std::vector<double> v;
    for (double s : scores)
      if (std::isfinite(s)) v.push_back(s);
    return v;
  }
};

struct CvReport {
  std::string unit = "fold";  // "fold" or "subject"
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::string proposed;
  std::vector<ModelResult> models;

  const ModelResult* find(const std::string& name) const {
    for (const auto& m : models)
      if (m.name == name) return &m;
    return nullptr;
  }

  nlohmann::json to_json() const {
    auto ms = nlohmann::json::array();
    for (const auto& m : models) {
      auto scores = nlohmann::json::array();
      for (double s : m.scores) scores.push_back(std::isfinite(s) ? nlohmann::json(s) : nlohmann::json(nullptr));
      nlohmann::json j = {{"name", m.name}, {"scores", scores}, {"failures", m.failures},
                          {"mean", m.mean}, {"std", m.std}};
      if (m.vs_proposed)
        j["vs_proposed"] = {{"t", std::isfinite(m.vs_proposed->t) ? nlohmann::json(m.vs_proposed->t) : nlohmann::json(nullptr)},
                            {"df", m.vs_proposed->df},
                            {"p", m.vs_proposed->p},
                            {"zero_variance", m.vs_proposed->zero_variance}};
      else
        j["vs_proposed"] = nullptr;
      ms.push_back(j);
    }
    return {{"unit", unit}, {"k", k}, {"seed", seed}, {"proposed", proposed}, {"models", ms}};
  }
};

namespace detail {

inline void summarize(ModelResult& m) {
  const auto v = m.valid_scores();
  m.mean = v.empty() ? std::numeric_limits<double>::quiet_NaN() : mean(v);
  m.std = v.size() >= 2 ? sample_std(v) : 0.0;
}

inline void compare_to_proposed(CvReport& report) {
  const ModelResult* prop = report.find(report.proposed);
  if (!prop) return;
  for (auto& m : report.models) {
    m.vs_proposed.reset();
    if (m.name == report.proposed) continue;
    std::vector<double> a, b;
    for (std::size_t i = 0; i < m.scores.size() && i < prop->scores.size(); ++i)
      if (std::isfinite(m.scores[i]) && std::isfinite(prop->scores[i])) {
        a.push_back(prop->scores[i]);
        b.push_back(m.scores[i]);
      }
    if (a.size() >= 2) m.vs_proposed = paired_test(a, b);
  }
}

}  // namespace detail

struct CvOptions {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string proposed = "Proposed";
};

/// Fits every spec on k-1 folds and scores the held-out fold. Fold seeds depend
/// only on (seed, fold), so a spec listed twice scores identically. A
/// NumericalError while fitting marks that fold failed for that model.
inline CvReport cross_validate(const EpochSet& dataset, const std::vector<ModelSpec>& specs, const CvOptions& opt) {
  dataset.validate();
  detail::require(!specs.empty(), "cross-validation needs at least one model");
  const FoldPlan plan = kfold_split(dataset.n_epochs, opt.k, opt.seed);

  CvReport report;
  report.k = opt.k;
  report.seed = opt.seed;
  report.proposed = opt.proposed;
  for (const auto& s : specs)
    report.models.push_back({s.name, std::vector<double>(opt.k, 0.0), std::vector<std::string>(opt.k), 0, 0, {}});

  const std::size_t tasks = specs.size() * opt.k;
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks;) {
      const std::size_t m = t / opt.k, f = t % opt.k;
      try {
        const EpochSet train = dataset.subset(plan.training_indices(f));
        const EpochSet test = dataset.subset(plan.folds[f]);
        auto clf = specs[m].make();
        clf->fit(train, derive_seed(opt.seed, f));
        const auto pred = clf->predict(test);
        std::vector<int> truth(test.n_epochs);
        for (std::size_t i = 0; i < test.n_epochs; ++i) truth[i] = test.class_of(i);
        report.models[m].scores[f] = accuracy(pred, truth);
      } catch (const NumericalError& e) {
        report.models[m].scores[f] = std::numeric_limits<double>::quiet_NaN();
        report.models[m].failures[f] = e.what();
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(opt.jobs, tasks));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  for (auto& m : report.models) detail::summarize(m);
  detail::compare_to_proposed(report);
  return report;
}

/// One score per subject (that subject's fold mean); paired tests then run
/// across subjects.
inline CvReport aggregate_subjects(const std::vector<CvReport>& subjects) {
  detail::require(!subjects.empty(), "no subject reports to aggregate");
  CvReport out;
  out.unit = "subject";
  out.k = subjects.front().k;
  out.seed = subjects.front().seed;
  out.proposed = subjects.front().proposed;
  for (const auto& m : subjects.front().models) {
    ModelResult r{m.name, {}, {}, 0, 0, {}};
    for (const auto& s : subjects) {
      const ModelResult* sm = s.find(m.name);
      detail::require(sm != nullptr, "subject report is missing model '" + m.name + "'");
      r.scores.push_back(sm->mean);
      r.failures.push_back(std::isfinite(sm->mean) ? "" : "all folds failed");
    }
    detail::summarize(r);
    out.models.push_back(std::move(r));
  }
  detail::compare_to_proposed(out);
  return out;
}

/// Plain-text table: one column per model, one row per unit, then the
/// "mean (±std)" and p-value rows.
inline std::string format_table(const CvReport& report) {
  std::ostringstream os;
  char buf[64];
  const int width = 16;
  auto cell = [&](const std::string& s) {
    os << ' ';
    os.width(width);
    os << s;
  };
  os.setf(std::ios::left);
  os.width(12);
  os << (report.unit == "subject" ? "Subject" : "Fold");
  for (const auto& m : report.models) cell(m.name);
  os << '\n';
  const std::size_t units = report.models.front().scores.size();
  for (std::size_t u = 0; u < units; ++u) {
    os.width(12);
    os << std::to_string(u + 1);
    for (const auto& m : report.models) {
      if (std::isfinite(m.scores[u])) {
        std::snprintf(buf, sizeof buf, "%.4f", m.scores[u]);
        cell(buf);
      } else {
        cell("failed");
      }
    }
    os << '\n';
  }
  os.width(12);
  os << "Mean (±std)";
  for (const auto& m : report.models) {
    std::snprintf(buf, sizeof buf, "%.4f (±%.4f)", m.mean, m.std);
    cell(buf);
  }
  os << '\n';
  os.width(12);
  os << "p-value";
  for (const auto& m : report.models) {
    if (m.vs_proposed) {
      if (m.vs_proposed->p < 1e-4)
        std::snprintf(buf, sizeof buf, "%.2e", m.vs_proposed->p);
      else
        std::snprintf(buf, sizeof buf, "%.4f", m.vs_proposed->p);
      cell(buf);
    } else {
      cell("-");
    }
  }
  os << '\n';
  return os.str();
}

}  // namespace distractnet
